#include "mner/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mner/errors.hpp"
#include "mner/ops.hpp"

namespace mner {

namespace {

struct CrfDims {
  std::size_t n;
  std::size_t labels;
  std::size_t stride;  // transition row width, L + 2
  std::size_t begin;
  std::size_t end;
};

CrfDims check_dims(const Tensor& emissions, const Tensor& transitions) {
  if (emissions.rank() != 2) throw ShapeError("crf: emissions must be [n x L], got " + shape_to_string(emissions.shape()));
  const std::size_t n = emissions.dim(0), labels = emissions.dim(1);
  const Shape expected{labels + 2, labels + 2};
  if (transitions.shape() != expected) {
    throw ShapeError("crf: transitions " + shape_to_string(transitions.shape()) + " do not match emissions " +
                     shape_to_string(emissions.shape()) + ", expected " + shape_to_string(expected));
  }
  return {n, labels, labels + 2, labels, labels + 1};
}

double lse(const double* v, std::size_t k) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) m = std::max(m, v[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < k; ++i) z += std::exp(v[i] - m);
  return m + std::log(z);
}

// Forward (alpha) and backward (beta) tables in log space, [n x L] each.
struct Lattice {
  std::vector<double> alpha;
  std::vector<double> beta;
  double log_z = 0.0;
};

Lattice run_lattice(const CrfDims& dims, std::span<const double> e, std::span<const double> t) {
  const std::size_t n = dims.n, L = dims.labels, S = dims.stride;
  Lattice lat;
  lat.alpha.assign(n * L, 0.0);
  lat.beta.assign(n * L, 0.0);
  std::vector<double> scratch(L);
  for (std::size_t j = 0; j < L; ++j) lat.alpha[j] = t[dims.begin * S + j] + e[j];
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t k = 0; k < L; ++k) scratch[k] = lat.alpha[(i - 1) * L + k] + t[k * S + j];
      lat.alpha[i * L + j] = e[i * L + j] + lse(scratch.data(), L);
    }
  }
  for (std::size_t j = 0; j < L; ++j) lat.beta[(n - 1) * L + j] = t[j * S + dims.end];
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t k = 0; k < L; ++k) scratch[k] = t[j * S + k] + e[(i + 1) * L + k] + lat.beta[(i + 1) * L + k];
      lat.beta[i * L + j] = lse(scratch.data(), L);
    }
  }
  for (std::size_t j = 0; j < L; ++j) scratch[j] = lat.alpha[(n - 1) * L + j] + lat.beta[(n - 1) * L + j];
  lat.log_z = lse(scratch.data(), L);
  return lat;
}

void check_path(const CrfDims& dims, std::span<const std::size_t> path) {
  if (path.size() != dims.n) {
    throw ContractError("crf: path length " + std::to_string(path.size()) + " differs from " +
                        std::to_string(dims.n) + " emission rows");
  }
  for (std::size_t y : path) {
    if (y >= dims.labels) {
      throw ContractError("crf: label index " + std::to_string(y) + " out of range for " +
                          std::to_string(dims.labels) + " labels");
    }
  }
}

}  // namespace

Tensor crf_score(const Tensor& emissions, const Tensor& transitions, std::span<const std::size_t> path) {
  const CrfDims dims = check_dims(emissions, transitions);
  check_path(dims, path);
  std::vector<std::size_t> e_idx(dims.n);
  std::vector<std::size_t> t_idx;
  t_idx.reserve(dims.n + 1);
  t_idx.push_back(dims.begin * dims.stride + path[0]);
  for (std::size_t i = 0; i < dims.n; ++i) {
    e_idx[i] = i * dims.labels + path[i];
    if (i + 1 < dims.n) t_idx.push_back(path[i] * dims.stride + path[i + 1]);
  }
  t_idx.push_back(path[dims.n - 1] * dims.stride + dims.end);
  return add(sum(take(emissions, e_idx)), sum(take(transitions, t_idx)));
}

Tensor crf_log_partition(const Tensor& emissions, const Tensor& transitions) {
  const CrfDims dims = check_dims(emissions, transitions);
  Lattice lat = run_lattice(dims, emissions.data(), transitions.data());
  const double log_z = lat.log_z;
  return make_result({1}, {log_z}, {emissions, transitions},
                     [emissions, transitions, dims, lat = std::move(lat)](std::span<const double> g) {
                       const std::size_t n = dims.n, L = dims.labels, S = dims.stride;
                       const auto e = emissions.data();
                       const auto t = transitions.data();
                       auto ge = grad_sink(emissions);
                       auto gt = grad_sink(transitions);
                       const double go = g[0];
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j < L; ++j) {
                           const double p = std::exp(lat.alpha[i * L + j] + lat.beta[i * L + j] - lat.log_z);
                           if (!ge.empty()) ge[i * L + j] += go * p;
                           if (gt.empty()) continue;
                           if (i == 0) gt[dims.begin * S + j] += go * p;
                           if (i + 1 == n) gt[j * S + dims.end] += go * p;
                         }
                       }
                       if (gt.empty()) return;
                       for (std::size_t i = 0; i + 1 < n; ++i) {
                         for (std::size_t a = 0; a < L; ++a) {
                           for (std::size_t b = 0; b < L; ++b) {
                             const double p = std::exp(lat.alpha[i * L + a] + t[a * S + b] + e[(i + 1) * L + b] +
                                                       lat.beta[(i + 1) * L + b] - lat.log_z);
                             gt[a * S + b] += go * p;
                           }
                         }
                       }
                     });
}

Tensor crf_nll(const Tensor& emissions, const Tensor& transitions, std::span<const std::size_t> gold) {
  return sub(crf_log_partition(emissions, transitions), crf_score(emissions, transitions, gold));
}

std::vector<double> crf_marginals(const Tensor& emissions, const Tensor& transitions) {
  const CrfDims dims = check_dims(emissions, transitions);
  const Lattice lat = run_lattice(dims, emissions.data(), transitions.data());
  std::vector<double> out(dims.n * dims.labels);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(lat.alpha[i] + lat.beta[i] - lat.log_z);
  return out;
}

ViterbiResult viterbi(const Tensor& emissions, const Tensor& transitions) {
  const CrfDims dims = check_dims(emissions, transitions);
  const std::size_t n = dims.n, L = dims.labels, S = dims.stride;
  const auto e = emissions.data();
  const auto t = transitions.data();
  std::vector<double> best(L), next(L);
  std::vector<std::size_t> back(n * L, 0);
  for (std::size_t j = 0; j < L; ++j) best[j] = t[dims.begin * S + j] + e[j];
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      std::size_t arg = 0;
      double top = best[0] + t[j];
      for (std::size_t k = 1; k < L; ++k) {
        const double s = best[k] + t[k * S + j];
        if (s > top) {
          top = s;
          arg = k;
        }
      }
      next[j] = top + e[i * L + j];
      back[i * L + j] = arg;
    }
    std::swap(best, next);
  }
  std::size_t last = 0;
  double top = best[0] + t[dims.end];
  for (std::size_t j = 1; j < L; ++j) {
    const double s = best[j] + t[j * S + dims.end];
    if (s > top) {
      top = s;
      last = j;
    }
  }
  ViterbiResult result;
  result.score = top;
  result.path.assign(n, 0);
  result.path[n - 1] = last;
  for (std::size_t i = n - 1; i > 0; --i) result.path[i - 1] = back[i * L + result.path[i]];
  return result;
}

CrfDecoder::CrfDecoder(LabelSchema schema, std::size_t feature_dim, bool mask_invalid, Initializer& init)
    : emission(feature_dim, schema.size(), init),
      transitions(init.constant({schema.transition_size(), schema.transition_size()}, 0.0)),
      schema_(std::move(schema)),
      mask_invalid_(mask_invalid) {
  apply_mask();
}

Tensor CrfDecoder::emissions(const Tensor& features) const { return emission(features); }

void CrfDecoder::apply_mask() {
  const std::size_t S = schema_.transition_size();
  auto t = transitions.mutable_data();
  for (std::size_t i = 0; i < S; ++i) {
    t[i * S + schema_.begin_index()] = kForbiddenTransition;
    t[schema_.end_index() * S + i] = kForbiddenTransition;
  }
  if (!mask_invalid_) return;
  for (std::size_t from = 0; from < S; ++from) {
    if (from == schema_.end_index()) continue;
    for (std::size_t to = 0; to < schema_.size(); ++to) {
      if (!schema_.allows(from, to)) t[from * S + to] = kForbiddenTransition;
    }
  }
}

void CrfDecoder::collect(const std::string& prefix, ParameterList& out) const {
  emission.collect(prefix + ".emission", out);
  out.push_back({prefix + ".transitions", transitions});
}

}  // namespace mner
