#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mner/labels.hpp"
#include "mner/nn.hpp"
#include "mner/tensor.hpp"

namespace mner {

// Stand-in for -inf in transition scores; keeps log-space sums finite.
inline constexpr double kForbiddenTransition = -1e4;

// The functions below take emissions [n x L] and a transition matrix
// [(L+2) x (L+2)] whose row L is BEGIN and column L+1 is END.

// Sum of emissions along `path` plus BEGIN->y0, y(i)->y(i+1) and y(n-1)->END.
Tensor crf_score(const Tensor& emissions, const Tensor& transitions, std::span<const std::size_t> path);

// log of the sum of exp(score) over all L^n paths (forward algorithm).
Tensor crf_log_partition(const Tensor& emissions, const Tensor& transitions);

// -log P(gold) = log_partition - score(gold).
Tensor crf_nll(const Tensor& emissions, const Tensor& transitions, std::span<const std::size_t> gold);

// Per-position label marginals P(y_i = j), [n x L] row-major.
std::vector<double> crf_marginals(const Tensor& emissions, const Tensor& transitions);

struct ViterbiResult {
  std::vector<std::size_t> path;
  double score = 0.0;
};

// Max-scoring path. Ties go to the lowest label index, both at each
// backpointer and for the final label.
ViterbiResult viterbi(const Tensor& emissions, const Tensor& transitions);

// Emission map plus learned transitions over a label schema.
class CrfDecoder {
 public:
  CrfDecoder() = default;
  CrfDecoder(LabelSchema schema, std::size_t feature_dim, bool mask_invalid, Initializer& init);

  Tensor emissions(const Tensor& features) const;
  // Re-imposes the boundary constants and, when masking, invalid IOB2 moves.
  void apply_mask();
  void collect(const std::string& prefix, ParameterList& out) const;

  const LabelSchema& schema() const { return schema_; }
  bool masks_invalid() const { return mask_invalid_; }

  Linear emission;     // [feature_dim x L]
  Tensor transitions;  // [(L+2) x (L+2)]

 private:
  LabelSchema schema_;
  bool mask_invalid_ = false;
};

}  // namespace mner
