#pragma once

#include <span>
#include <vector>

#include "hwgen/autograd.hpp"

namespace hwgen {

// Per-frame log-probabilities over {blank} ∪ alphabet, shape [T, K].
struct FramePosteriors {
  Tensor log_probs;

  int frames() const { return log_probs.dim(0); }
  int classes() const { return log_probs.dim(1); }
};

struct CtcResult {
  double loss = 0;  // -log p(target | log_probs)
  Tensor grad;      // d loss / d log_probs, shape [T, K]
};

// Log-space forward/backward over the blank-extended target. Entries of
// `log_probs` are treated as independent inputs (no normalization assumed).
// Throws InfeasibleTarget when T < min_ctc_length(target).
CtcResult ctc_forward_backward(const Tensor& log_probs, std::span<const int> target);

double ctc_loss(const FramePosteriors& posteriors, std::span<const int> target);
// Differentiable form for training; input is [T, K] log-probabilities.
Var ctc_loss(const Var& log_probs, std::span<const int> target);

struct GreedyDecode {
  std::vector<int> labels;  // collapsed text
  std::vector<int> tokens;  // per-frame argmax
};

GreedyDecode greedy_decode(const FramePosteriors& posteriors);

// One recognized character: a maximal run of equal non-blank argmax frames.
struct CharInstance {
  int label = 0;
  int center = 0;           // floor of the run's midpoint frame
  double confidence = 0;    // mean probability of `label` over the run
};

std::vector<CharInstance> char_instances(const FramePosteriors& posteriors);

}  // namespace hwgen
