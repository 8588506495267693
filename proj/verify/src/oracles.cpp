#include "mner/verify/oracles.hpp"

#include <cmath>
#include <limits>

#include "mner/errors.hpp"

namespace mner::verify {

namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix to_matrix(std::span<const double> data, std::size_t rows, std::size_t cols) {
  Matrix m(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m[i][j] = data[i * cols + j];
  return m;
}

Matrix to_matrix(const Tensor& t) { return to_matrix(t.data(), t.dim(0), t.dim(1)); }

Matrix product(const Matrix& a, const Matrix& b) {
  Matrix c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

void layer_norm_rows(Matrix& x, std::span<const double> gamma, std::span<const double> beta, double eps) {
  for (auto& row : x) {
    double mu = 0.0;
    for (double v : row) mu += v;
    mu /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mu) / std::sqrt(var + eps) * gamma[j] + beta[j];
  }
}

double gelu(double x) {
  const double pi = std::acos(-1.0);
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / pi) * (x + 0.044715 * x * x * x)));
}

Matrix affine(const Matrix& x, const Linear& layer) {
  Matrix y = product(x, to_matrix(layer.weight));
  const auto b = layer.bias.data();
  for (auto& row : y)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  return y;
}

}  // namespace

CrfEnumeration crf_enumerate(const Tensor& emissions, const Tensor& transitions) {
  const std::size_t n = emissions.dim(0), labels = emissions.dim(1);
  const std::size_t begin = labels, end = labels + 1, width = labels + 2;
  if (transitions.shape() != Shape{width, width}) throw ShapeError("crf_enumerate: transition shape");
  const auto e = emissions.data();
  const auto t = transitions.data();

  std::vector<double> scores;
  std::vector<std::size_t> path(n, 0);
  CrfEnumeration out;
  out.best_score = -std::numeric_limits<double>::infinity();
  auto later_is_smaller = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    for (std::size_t i = n; i-- > 0;) {
      if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
  };
  while (true) {
    double s = t[begin * width + path[0]] + t[path[n - 1] * width + end];
    for (std::size_t i = 0; i < n; ++i) s += e[i * labels + path[i]];
    for (std::size_t i = 1; i < n; ++i) s += t[path[i - 1] * width + path[i]];
    scores.push_back(s);
    if (s > out.best_score || (s == out.best_score && later_is_smaller(path, out.best_path))) {
      out.best_score = s;
      out.best_path = path;
    }
    std::size_t pos = n;
    while (pos > 0 && ++path[pos - 1] == labels) path[--pos] = 0;
    if (pos == 0) break;
  }
  double total = 0.0;
  for (double s : scores) total += std::exp(s - out.best_score);
  out.log_partition = out.best_score + std::log(total);
  for (double s : scores) out.probability_sum += std::exp(s - out.log_partition);
  return out;
}

double contrastive_direct(const Tensor& text_batch, const Tensor& image_batch, double temperature) {
  const std::size_t n = text_batch.dim(0), d = text_batch.dim(1);
  Matrix a = to_matrix(text_batch), b = to_matrix(image_batch);
  for (Matrix* m : {&a, &b}) {
    for (auto& row : *m) {
      double norm = 0.0;
      for (double v : row) norm += v * v;
      norm = std::sqrt(norm);
      for (double& v : row) v /= norm;
    }
  }
  Matrix sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < d; ++k) sim[i][j] += a[i][k] * b[j][k];
      sim[i][j] /= temperature;
    }
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += std::exp(sim[i][j]);
      col += std::exp(sim[j][i]);
    }
    loss -= std::log(std::exp(sim[i][i]) / row);
    loss -= std::log(std::exp(sim[i][i]) / col);
  }
  return loss / static_cast<double>(2 * n);
}

std::vector<double> cross_attention_loop(const CrossAttentionBlock& block, const Tensor& text, const Tensor& visual) {
  const std::size_t n = text.dim(0), v = visual.dim(0), d = text.dim(1);
  const std::size_t heads = block.heads, dh = d / heads;
  const Matrix tx = to_matrix(text), vx = to_matrix(visual);
  const Matrix wq = to_matrix(block.query), wk = to_matrix(block.key), wv = to_matrix(block.value);
  const Matrix wo = to_matrix(block.output);

  Matrix concat(n, std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    // Head projections use columns [h*dh, (h+1)*dh) of each weight.
    Matrix q(n, std::vector<double>(dh, 0.0)), k(v, std::vector<double>(dh, 0.0)), val(v, std::vector<double>(dh, 0.0));
    for (std::size_t c = 0; c < dh; ++c) {
      const std::size_t col = h * dh + c;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < d; ++r) q[i][c] += tx[i][r] * wq[r][col];
      for (std::size_t i = 0; i < v; ++i)
        for (std::size_t r = 0; r < d; ++r) {
          k[i][c] += vx[i][r] * wk[r][col];
          val[i][c] += vx[i][r] * wv[r][col];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> logits(v);
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < v; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += q[i][c] * k[j][c];
        logits[j] = s / std::sqrt(static_cast<double>(dh));
        peak = std::max(peak, logits[j]);
      }
      double z = 0.0;
      for (double& l : logits) z += (l = std::exp(l - peak));
      for (std::size_t c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < v; ++j) acc += logits[j] / z * val[j][c];
        concat[i][h * dh + c] = acc;
      }
    }
  }
  Matrix x = product(concat, wo);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x[i][j] += tx[i][j];
  layer_norm_rows(x, block.attention_norm.gamma.data(), block.attention_norm.beta.data(), block.attention_norm.eps);

  Matrix hidden = affine(x, block.mlp.first);
  for (auto& row : hidden)
    for (double& h : row) h = gelu(h);
  Matrix y = affine(hidden, block.mlp.second);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) y[i][j] += x[i][j];
  layer_norm_rows(y, block.output_norm.gamma.data(), block.output_norm.beta.data(), block.output_norm.eps);

  std::vector<double> out;
  out.reserve(n * d);
  for (const auto& row : y) out.insert(out.end(), row.begin(), row.end());
  return out;
}

}  // namespace mner::verify
