#pragma once

#include <cstddef>
#include <vector>

#include "mner/collaboration.hpp"
#include "mner/tensor.hpp"

// Slow, loop-based reference implementations used only to check the library.

namespace mner::verify {

struct CrfEnumeration {
  double log_partition = 0.0;
  double probability_sum = 0.0;  // sum over all paths of exp(score - log_partition)
  std::vector<std::size_t> best_path;
  double best_score = 0.0;
};

// Scores every one of the L^n paths. Among equal best scores the path that is
// smallest when compared from the last position backwards wins, which is the
// outcome of lowest-index tie-breaking at every Viterbi step.
CrfEnumeration crf_enumerate(const Tensor& emissions, const Tensor& transitions);

// Explicit double sum over anchors, with exp and log taken directly.
double contrastive_direct(const Tensor& text_batch, const Tensor& image_batch, double temperature);

// Cross-attention block in inference mode, computed head by head with
// hand-written matrix products, layer norm and tanh-GELU.
std::vector<double> cross_attention_loop(const CrossAttentionBlock& block, const Tensor& text, const Tensor& visual);

}  // namespace mner::verify
