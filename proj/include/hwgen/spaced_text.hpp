#pragma once

#include <span>
#include <string>
#include <vector>

#include "hwgen/alphabet.hpp"
#include "hwgen/tensor.hpp"

namespace hwgen {

// Token sequence over {blank} ∪ alphabet whose positions carry horizontal
// layout: blanks are gaps, repeated tokens widen a character.
struct SpacedText {
  std::vector<int> tokens;

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const SpacedText&, const SpacedText&) = default;
};

struct CharSpacing {
  double blanks_before = 0;
  double repeats = 1;
};

// Per-character layout; trailing blanks act as the blanks_before of a
// virtual end-of-sequence character.
struct SpacingTargets {
  std::vector<CharSpacing> chars;
  double trailing_blanks = 0;
};

// Merge runs of equal non-blank tokens, then drop blanks.
std::vector<int> collapse(std::span<const int> tokens);
inline std::vector<int> collapse(const SpacedText& s) { return collapse(s.tokens); }

// Fewest frames that can carry `labels` under CTC: one per label plus a
// separator between equal neighbours.
int min_ctc_length(std::span<const int> labels);

SpacingTargets spacing_targets(const SpacedText& spaced);

// Rounds targets to the nearest non-negative integers (repeats clamped to
// >= 1) and lays the text out; equal neighbours always get a separating
// blank. Exact inverse of spacing_targets.
SpacedText render_spaced(std::span<const int> labels, const SpacingTargets& targets);

// Minimal-gap layout spread evenly over `positions` frames (at least
// min_ctc_length(labels)).
SpacedText uniform_layout(std::span<const int> labels, int positions);

struct DerivedSpacedText {
  SpacedText spaced;
  // True when the logits were too short and a uniform layout was used.
  bool fallback = false;
};

// Dataset spaced text: per-frame argmax of recognizer logits ([T, K]),
// corrected so that it collapses to `ground_truth` exactly. Recognition
// errors are fixed through a minimal edit alignment of the collapsed
// prediction against the ground truth:
//  - substitutions relabel the predicted run,
//  - spurious runs become blanks,
//  - missing characters take one blank frame next to the gap, or a frame
//    split from the wider neighbouring run, or a newly inserted frame.
DerivedSpacedText derive_spaced_text(const Tensor& logits, std::span<const int> ground_truth);

// [num_classes, L] one-hot columns; labels outside [0, num_classes) throw.
Tensor one_hot(const SpacedText& spaced, int num_classes);
// Plain text encoding for the spacing network: N character columns followed
// by one end-token column that uses the blank slot.
Tensor text_one_hot(std::span<const int> labels, int num_classes);

// Debug form with "<b>" for blanks.
std::string to_debug_string(const SpacedText& spaced, const Alphabet& alphabet);

}  // namespace hwgen
