#include "mner/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mner/errors.hpp"

namespace mner {

namespace {

using Values = std::vector<double>;

std::vector<double> copy_of(std::span<const double> s) { return {s.begin(), s.end()}; }

bool is_suffix(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

void check_broadcast(const char* op, const Tensor& a, const Tensor& b) {
  if (!is_suffix(a.shape(), b.shape())) {
    throw ShapeError(std::string(op) + ": cannot combine " + shape_to_string(a.shape()) + " with " +
                     shape_to_string(b.shape()));
  }
}

std::size_t normalize_axis(int axis, std::size_t rank) {
  const long r = static_cast<long>(rank);
  const long a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// outer x k x inner decomposition around one axis.
struct AxisSplit {
  std::size_t outer = 1, k = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.k = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_to_string(t.shape()));
}

void require_finite(const char* op, std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

// C[p x r] += A[p x q] * B[q x r]
void gemm_nn(const double* A, const double* B, double* C, std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    double* c = C + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double av = A[i * q + k];
      if (av == 0.0) continue;
      const double* b = B + k * r;
      for (std::size_t j = 0; j < r; ++j) c[j] += av * b[j];
    }
  }
}

// C[p x r] += A[p x q] * B[r x q]^T
void gemm_nt(const double* A, const double* B, double* C, std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const double* a = A + i * q;
    for (std::size_t j = 0; j < r; ++j) {
      const double* b = B + j * q;
      double acc = 0.0;
      for (std::size_t k = 0; k < q; ++k) acc += a[k] * b[k];
      C[i * r + j] += acc;
    }
  }
}

// C[q x r] += A[p x q]^T * B[p x r]
void gemm_tn(const double* A, const double* B, double* C, std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const double* b = B + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double av = A[i * q + k];
      if (av == 0.0) continue;
      double* c = C + k * r;
      for (std::size_t j = 0; j < r; ++j) c[j] += av * b[j];
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_broadcast("add", a, b);
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t bn = bv.size();
  Values out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i % bn];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b, bn](std::span<const double> g) {
    auto ga = grad_sink(a);
    auto gb = grad_sink(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!ga.empty()) ga[i] += g[i];
      if (!gb.empty()) gb[i % bn] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_broadcast("sub", a, b);
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t bn = bv.size();
  Values out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i % bn];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b, bn](std::span<const double> g) {
    auto ga = grad_sink(a);
    auto gb = grad_sink(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!ga.empty()) ga[i] += g[i];
      if (!gb.empty()) gb[i % bn] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_broadcast("mul", a, b);
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t bn = bv.size();
  Values out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i % bn];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b, bn](std::span<const double> g) {
    auto ga = grad_sink(a);
    auto gb = grad_sink(b);
    const auto av = a.data();
    const auto bv = b.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!ga.empty()) ga[i] += g[i] * bv[i % bn];
      if (!gb.empty()) gb[i % bn] += g[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  Values out = copy_of(a.data());
  for (double& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), {a}, [a, factor](std::span<const double> g) {
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Tensor add_scalar(const Tensor& a, double value) {
  Values out = copy_of(a.data());
  for (double& v : out) v += value;
  return make_result(a.shape(), std::move(out), {a}, [a](std::span<const double> g) {
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
  if (b.dim(0) != q) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  Values out(p * r, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), p, q, r);
  return make_result({p, r}, std::move(out), {a, b}, [a, b, p, q, r](std::span<const double> g) {
    auto ga = grad_sink(a);
    auto gb = grad_sink(b);
    if (!ga.empty()) gemm_nt(g.data(), b.data().data(), ga.data(), p, r, q);
    if (!gb.empty()) gemm_tn(a.data().data(), g.data(), gb.data(), p, q, r);
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  const auto av = a.data();
  Values out(av.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = av[i * cols + j];
  return make_result({cols, rows}, std::move(out), {a}, [a, rows, cols](std::span<const double> g) {
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) ga[i * cols + j] += g[j * rows + i];
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix("linear", weight);
  const bool vector_input = x.rank() == 1;
  if (!vector_input) require_matrix("linear", x);
  const std::size_t n = vector_input ? 1 : x.dim(0);
  const std::size_t in = vector_input ? x.dim(0) : x.dim(1);
  const std::size_t out_dim = weight.dim(1);
  if (weight.dim(0) != in) {
    throw ShapeError("linear: input " + shape_to_string(x.shape()) + " does not match weight " +
                     shape_to_string(weight.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != out_dim) {
    throw ShapeError("linear: bias " + shape_to_string(bias.shape()) + " does not match weight " +
                     shape_to_string(weight.shape()));
  }
  Values out(n * out_dim);
  const auto bv = bias.data();
  for (std::size_t i = 0; i < n; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * out_dim);
  gemm_nn(x.data().data(), weight.data().data(), out.data(), n, in, out_dim);
  Shape shape = vector_input ? Shape{out_dim} : Shape{n, out_dim};
  return make_result(std::move(shape), std::move(out), {x, weight, bias},
                     [x, weight, bias, n, in, out_dim](std::span<const double> g) {
                       auto gx = grad_sink(x);
                       auto gw = grad_sink(weight);
                       auto gb = grad_sink(bias);
                       if (!gx.empty()) gemm_nt(g.data(), weight.data().data(), gx.data(), n, out_dim, in);
                       if (!gw.empty()) gemm_tn(x.data().data(), g.data(), gw.data(), n, in, out_dim);
                       if (!gb.empty()) {
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[i * out_dim + j];
                       }
                     });
}

Tensor relu(const Tensor& x) {
  Values out = copy_of(x.data());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(x.shape(), std::move(out), {x}, [x](std::span<const double> g) {
    auto gx = grad_sink(x);
    const auto xv = x.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

Tensor gelu(const Tensor& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  Values out = copy_of(x.data());
  for (double& v : out) v = 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v)));
  return make_result(x.shape(), std::move(out), {x}, [x](std::span<const double> g) {
    auto gx = grad_sink(x);
    const auto xv = x.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = xv[i];
      const double t = std::tanh(kC * (v + kA * v * v * v));
      const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
      gx[i] += g[i] * d;
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  const auto xv = x.data();
  require_finite("softmax", xv);
  const auto s = split_axis(x.shape(), normalize_axis(axis, x.rank()));
  Values out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.k * s.inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.k; ++j) m = std::max(m, xv[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.k; ++j) {
        const double e = std::exp(xv[base + j * s.inner] - m);
        out[base + j * s.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < s.k; ++j) out[base + j * s.inner] /= z;
    }
  }
  Values y = out;
  return make_result(x.shape(), std::move(out), {x}, [x, s, y = std::move(y)](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.k * s.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.k; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
        for (std::size_t j = 0; j < s.k; ++j) {
          const std::size_t idx = base + j * s.inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, int axis) {
  const auto xv = x.data();
  require_finite("log_softmax", xv);
  const auto s = split_axis(x.shape(), normalize_axis(axis, x.rank()));
  Values out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.k * s.inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.k; ++j) m = std::max(m, xv[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.k; ++j) z += std::exp(xv[base + j * s.inner] - m);
      const double lse = m + std::log(z);
      for (std::size_t j = 0; j < s.k; ++j) out[base + j * s.inner] = xv[base + j * s.inner] - lse;
    }
  }
  Values y = out;
  return make_result(x.shape(), std::move(out), {x}, [x, s, y = std::move(y)](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.k * s.inner + in;
        double gsum = 0.0;
        for (std::size_t j = 0; j < s.k; ++j) gsum += g[base + j * s.inner];
        for (std::size_t j = 0; j < s.k; ++j) {
          const std::size_t idx = base + j * s.inner;
          gx[idx] += g[idx] - std::exp(y[idx]) * gsum;
        }
      }
    }
  });
}

Tensor log_sum_exp(const Tensor& x, int axis) {
  const auto xv = x.data();
  const std::size_t ax = normalize_axis(axis, x.rank());
  const auto s = split_axis(x.shape(), ax);
  Values out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.k * s.inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.k; ++j) m = std::max(m, xv[base + j * s.inner]);
      if (!std::isfinite(m)) {
        out[o * s.inner + in] = m;
        continue;
      }
      double z = 0.0;
      for (std::size_t j = 0; j < s.k; ++j) z += std::exp(xv[base + j * s.inner] - m);
      out[o * s.inner + in] = m + std::log(z);
    }
  }
  Values lse = out;
  return make_result(drop_axis(x.shape(), ax), std::move(out), {x},
                     [x, s, lse = std::move(lse)](std::span<const double> g) {
                       auto gx = grad_sink(x);
                       const auto xv = x.data();
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t in = 0; in < s.inner; ++in) {
                           const std::size_t base = o * s.k * s.inner + in;
                           const double go = g[o * s.inner + in];
                           const double l = lse[o * s.inner + in];
                           for (std::size_t j = 0; j < s.k; ++j) {
                             const std::size_t idx = base + j * s.inner;
                             gx[idx] += go * std::exp(xv[idx] - l);
                           }
                         }
                       }
                     });
}

Tensor mean(const Tensor& x, int axis) {
  const auto xv = x.data();
  const std::size_t ax = normalize_axis(axis, x.rank());
  const auto s = split_axis(x.shape(), ax);
  Values out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.k; ++j)
      for (std::size_t in = 0; in < s.inner; ++in) out[o * s.inner + in] += xv[(o * s.k + j) * s.inner + in];
  const double inv = 1.0 / static_cast<double>(s.k);
  for (double& v : out) v *= inv;
  return make_result(drop_axis(x.shape(), ax), std::move(out), {x}, [x, s, inv](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t j = 0; j < s.k; ++j)
        for (std::size_t in = 0; in < s.inner; ++in) gx[(o * s.k + j) * s.inner + in] += g[o * s.inner + in] * inv;
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({1}, {total}, {x}, [x](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (double& v : gx) v += g[0];
  });
}

Tensor mean_all(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
  const std::size_t d = x.shape().back();
  if (gamma.rank() != 1 || gamma.dim(0) != d || beta.rank() != 1 || beta.dim(0) != d) {
    throw ShapeError("layer_norm: affine parameters " + shape_to_string(gamma.shape()) + "/" +
                     shape_to_string(beta.shape()) + " do not match input " + shape_to_string(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  Values out(xv.size());
  Values xhat(xv.size());
  Values inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * inv_std[r];
      xhat[r * d + j] = h;
      out[r * d + j] = gv[j] * h + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [x, gamma, beta, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                         std::span<const double> g) {
                       auto gx = grad_sink(x);
                       auto ggamma = grad_sink(gamma);
                       auto gbeta = grad_sink(beta);
                       const auto gv = gamma.data();
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* gr = g.data() + r * d;
                         const double* hr = xhat.data() + r * d;
                         if (!ggamma.empty())
                           for (std::size_t j = 0; j < d; ++j) ggamma[j] += gr[j] * hr[j];
                         if (!gbeta.empty())
                           for (std::size_t j = 0; j < d; ++j) gbeta[j] += gr[j];
                         if (gx.empty()) continue;
                         double mean_g = 0.0, mean_gh = 0.0;
                         for (std::size_t j = 0; j < d; ++j) {
                           const double gh = gr[j] * gv[j];
                           mean_g += gh;
                           mean_gh += gh * hr[j];
                         }
                         mean_g /= static_cast<double>(d);
                         mean_gh /= static_cast<double>(d);
                         for (std::size_t j = 0; j < d; ++j) {
                           gx[r * d + j] += inv_std[r] * (gr[j] * gv[j] - mean_g - hr[j] * mean_gh);
                         }
                       }
                     });
}

Tensor dropout(const Tensor& x, double p, bool train, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must lie in [0, 1)");
  if (!train || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const double factor = 1.0 / (1.0 - p);
  const auto xv = x.data();
  Values mask(xv.size());
  Values out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = keep(rng) ? factor : 0.0;
    out[i] = xv[i] * mask[i];
  }
  return make_result(x.shape(), std::move(out), {x}, [x, mask = std::move(mask)](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts[0].shape();
  const std::size_t ax = normalize_axis(axis, first.size());
  Shape out_shape = first;
  out_shape[ax] = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == ax) || s[i] == first[i];
    if (!ok) {
      throw ShapeError("concat: " + shape_to_string(s) + " incompatible with " + shape_to_string(first) +
                       " along axis " + std::to_string(ax));
    }
    out_shape[ax] += s[ax];
  }
  const auto split = split_axis(out_shape, ax);
  Values out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;  // offset of each part within one outer slab
  std::size_t offset = 0;
  for (const Tensor& t : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = t.dim(ax) * split.inner;
    const auto tv = t.data();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(tv.begin() + o * chunk, chunk, out.begin() + o * split.k * split.inner + offset);
    }
    offset += chunk;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result(std::move(out_shape), std::move(out), inputs,
                     [inputs, offsets, split, ax](std::span<const double> g) {
                       for (std::size_t p = 0; p < inputs.size(); ++p) {
                         auto gp = grad_sink(inputs[p]);
                         if (gp.empty()) continue;
                         const std::size_t chunk = inputs[p].dim(ax) * split.inner;
                         for (std::size_t o = 0; o < split.outer; ++o) {
                           const double* src = g.data() + o * split.k * split.inner + offsets[p];
                           double* dst = gp.data() + o * chunk;
                           for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                         }
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_to_string(x.shape()) + " to " + shape_to_string(shape));
  }
  return make_result(std::move(shape), copy_of(x.data()), {x}, [x](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  require_matrix("slice_rows", x);
  const std::size_t cols = x.dim(1);
  if (count == 0 || start + count > x.dim(0)) {
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + shape_to_string(x.shape()));
  }
  const auto xv = x.data();
  Values out(xv.begin() + start * cols, xv.begin() + (start + count) * cols);
  return make_result({count, cols}, std::move(out), {x}, [x, start, cols](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[start * cols + i] += g[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_matrix("slice_cols", x);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (count == 0 || start + count > cols) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + shape_to_string(x.shape()));
  }
  const auto xv = x.data();
  Values out(rows * count);
  for (std::size_t i = 0; i < rows; ++i)
    std::copy_n(xv.begin() + i * cols + start, count, out.begin() + i * count);
  return make_result({rows, count}, std::move(out), {x}, [x, start, count, rows, cols](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < count; ++j) gx[i * cols + start + j] += g[i * count + j];
  });
}

Tensor embedding_gather(const Tensor& table, std::span<const std::size_t> indices) {
  require_matrix("embedding_gather", table);
  if (indices.empty()) throw ShapeError("embedding_gather: empty index list");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  const auto tv = table.data();
  Values out(indices.size() * d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw ShapeError("embedding_gather: index " + std::to_string(indices[i]) + " out of range for " +
                       shape_to_string(table.shape()));
    }
    std::copy_n(tv.begin() + indices[i] * d, d, out.begin() + i * d);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result({idx.size(), d}, std::move(out), {table}, [table, idx, d](std::span<const double> g) {
    auto gt = grad_sink(table);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) gt[idx[i] * d + j] += g[i * d + j];
  });
}

Tensor take(const Tensor& x, std::span<const std::size_t> flat_indices) {
  if (flat_indices.empty()) throw ShapeError("take: empty index list");
  const auto xv = x.data();
  Values out(flat_indices.size());
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= xv.size()) {
      throw ShapeError("take: index " + std::to_string(flat_indices[i]) + " out of range for " +
                       shape_to_string(x.shape()));
    }
    out[i] = xv[flat_indices[i]];
  }
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  return make_result({idx.size()}, std::move(out), {x}, [x, idx](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
  });
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
  require_matrix("l2_normalize_rows", x);
  const std::size_t rows = x.dim(0), d = x.dim(1);
  const auto xv = x.data();
  Values out(xv.size());
  Values denom(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += xv[r * d + j] * xv[r * d + j];
    const double norm = std::sqrt(sq);
    if (norm == 0.0) throw NumericError("l2_normalize_rows: row " + std::to_string(r) + " has zero norm");
    denom[r] = std::max(norm, eps);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = xv[r * d + j] / denom[r];
  }
  Values y = out;
  return make_result({rows, d}, std::move(out), {x},
                     [x, rows, d, eps, y = std::move(y), denom = std::move(denom)](std::span<const double> g) {
                       auto gx = grad_sink(x);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* gr = g.data() + r * d;
                         const double* yr = y.data() + r * d;
                         if (denom[r] <= eps) {
                           for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += gr[j] / denom[r];
                           continue;
                         }
                         double dot = 0.0;
                         for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
                         for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += (gr[j] - yr[j] * dot) / denom[r];
                       }
                     });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding) {
  if (x.rank() != 3 || weight.rank() != 4 || bias.rank() != 1) {
    throw ShapeError("conv2d: expected [C x H x W] input and [Co x Ci x k x k] weight, got " +
                     shape_to_string(x.shape()) + " and " + shape_to_string(weight.shape()));
  }
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin || weight.dim(3) != k || bias.dim(0) != cout) {
    throw ShapeError("conv2d: weight " + shape_to_string(weight.shape()) + " / bias " +
                     shape_to_string(bias.shape()) + " incompatible with input " + shape_to_string(x.shape()));
  }
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  if (h + 2 * padding < k || w + 2 * padding < k) {
    throw ShapeError("conv2d: kernel larger than padded input " + shape_to_string(x.shape()));
  }
  const std::size_t ho = (h + 2 * padding - k) / stride + 1;
  const std::size_t wo = (w + 2 * padding - k) / stride + 1;
  const std::size_t patch = cin * k * k;
  const std::size_t positions = ho * wo;

  // im2col: cols[(c, ky, kx), (oy, ox)]
  const auto xv = x.data();
  Values cols(patch * positions, 0.0);
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = cols.data() + ((c * k + ky) * k + kx) * positions;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(padding);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(padding);
            if (ix < 0 || ix >= static_cast<long>(w)) continue;
            dst[oy * wo + ox] = xv[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
          }
        }
      }

  Values out(cout * positions);
  const auto bv = bias.data();
  for (std::size_t co = 0; co < cout; ++co) std::fill_n(out.begin() + co * positions, positions, bv[co]);
  gemm_nn(weight.data().data(), cols.data(), out.data(), cout, patch, positions);

  return make_result(
      {cout, ho, wo}, std::move(out), {x, weight, bias},
      [x, weight, bias, cols = std::move(cols), cin, h, w, cout, k, ho, wo, stride, padding, patch,
       positions](std::span<const double> g) {
        auto gw = grad_sink(weight);
        auto gb = grad_sink(bias);
        auto gx = grad_sink(x);
        if (!gw.empty()) gemm_nt(g.data(), cols.data(), gw.data(), cout, positions, patch);
        if (!gb.empty()) {
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t p = 0; p < positions; ++p) gb[co] += g[co * positions + p];
        }
        if (gx.empty()) return;
        Values gcols(patch * positions, 0.0);
        gemm_tn(weight.data().data(), g.data(), gcols.data(), cout, patch, positions);
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const double* src = gcols.data() + ((c * k + ky) * k + kx) * positions;
              for (std::size_t oy = 0; oy < ho; ++oy) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(padding);
                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                for (std::size_t ox = 0; ox < wo; ++ox) {
                  const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(padding);
                  if (ix < 0 || ix >= static_cast<long>(w)) continue;
                  gx[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] += src[oy * wo + ox];
                }
              }
            }
      });
}

Tensor patchify(const Tensor& image, std::size_t patch) {
  if (image.rank() != 3) throw ShapeError("patchify: expected [C x H x W], got " + shape_to_string(image.shape()));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (patch == 0 || h % patch != 0 || w % patch != 0) {
    throw ShapeError("patchify: patch size " + std::to_string(patch) + " does not tile " +
                     shape_to_string(image.shape()));
  }
  const std::size_t gh = h / patch, gw = w / patch;
  const std::size_t n = gh * gw, width = c * patch * patch;
  // flat source index for each output element
  std::vector<std::size_t> src(n * width);
  for (std::size_t pr = 0; pr < gh; ++pr)
    for (std::size_t pc = 0; pc < gw; ++pc)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t py = 0; py < patch; ++py)
          for (std::size_t px = 0; px < patch; ++px) {
            const std::size_t row = pr * gw + pc;
            const std::size_t col = (ch * patch + py) * patch + px;
            src[row * width + col] = (ch * h + pr * patch + py) * w + pc * patch + px;
          }
  return reshape(take(image, src), {n, width});
}

}  // namespace mner
