#include "hwgen/spaced_text.hpp"

#include <algorithm>
#include <cmath>

#include "hwgen/error.hpp"

namespace hwgen {

std::vector<int> collapse(std::span<const int> tokens) {
  std::vector<int> out;
  int prev = Alphabet::kBlank;
  for (int t : tokens) {
    if (t != Alphabet::kBlank && t != prev) out.push_back(t);
    prev = t;
  }
  return out;
}

int min_ctc_length(std::span<const int> labels) {
  int n = static_cast<int>(labels.size());
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

SpacingTargets spacing_targets(const SpacedText& spaced) {
  SpacingTargets out;
  int blanks = 0;
  int prev = Alphabet::kBlank;
  for (int t : spaced.tokens) {
    if (t == Alphabet::kBlank) {
      ++blanks;
    } else if (t == prev) {
      out.chars.back().repeats += 1;
    } else {
      out.chars.push_back({static_cast<double>(blanks), 1.0});
      blanks = 0;
    }
    prev = t;
  }
  out.trailing_blanks = blanks;
  return out;
}

namespace {

int round_count(double v, int floor_value) {
  if (!std::isfinite(v)) return floor_value;
  return std::max(floor_value, static_cast<int>(std::lround(std::max(0.0, v))));
}

}  // namespace

SpacedText render_spaced(std::span<const int> labels, const SpacingTargets& targets) {
  if (labels.size() != targets.chars.size()) {
    throw ShapeError("render_spaced: " + std::to_string(labels.size()) + " characters but " +
                     std::to_string(targets.chars.size()) + " spacing targets");
  }
  SpacedText out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int blanks = round_count(targets.chars[i].blanks_before, 0);
    if (i > 0 && labels[i] == labels[i - 1]) blanks = std::max(blanks, 1);
    int reps = round_count(targets.chars[i].repeats, 1);
    out.tokens.insert(out.tokens.end(), blanks, Alphabet::kBlank);
    out.tokens.insert(out.tokens.end(), reps, labels[i]);
  }
  out.tokens.insert(out.tokens.end(), round_count(targets.trailing_blanks, 0), Alphabet::kBlank);
  return out;
}

SpacedText uniform_layout(std::span<const int> labels, int positions) {
  const int n = static_cast<int>(labels.size());
  const int total = std::max(positions, min_ctc_length(labels));
  const int extra = total - min_ctc_length(labels);
  SpacedText out;
  auto share = [&](int k) {
    return static_cast<int>(static_cast<long>(k + 1) * extra / (n + 1) -
                            static_cast<long>(k) * extra / (n + 1));
  };
  for (int i = 0; i < n; ++i) {
    int blanks = share(i);
    if (i > 0 && labels[i] == labels[i - 1]) ++blanks;
    out.tokens.insert(out.tokens.end(), blanks, Alphabet::kBlank);
    out.tokens.push_back(labels[i]);
  }
  out.tokens.insert(out.tokens.end(), share(n), Alphabet::kBlank);
  return out;
}

namespace {

struct Piece {
  int label;
  int count;
  int gt = -1;  // ground-truth index owning this piece, -1 for blanks
};

enum class EditOp { kKeep, kSpurious, kMissing };

struct AlignStep {
  EditOp op;
  int run = -1;  // predicted run index
  int gt = -1;   // ground-truth index
};

// Minimal edit alignment between predicted run labels and the ground truth,
// returned in left-to-right order. Ties prefer the diagonal.
std::vector<AlignStep> align(std::span<const int> pred, std::span<const int> gt) {
  const std::size_t n = pred.size(), m = gt.size();
  std::vector<int> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> int& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      int sub = at(i - 1, j - 1) + (pred[i - 1] == gt[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  std::vector<AlignStep> steps;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (pred[i - 1] == gt[j - 1] ? 0 : 1)) {
      steps.push_back({EditOp::kKeep, static_cast<int>(i - 1), static_cast<int>(j - 1)});
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      steps.push_back({EditOp::kSpurious, static_cast<int>(i - 1), -1});
      --i;
    } else {
      steps.push_back({EditOp::kMissing, -1, static_cast<int>(j - 1)});
      --j;
    }
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

}  // namespace

DerivedSpacedText derive_spaced_text(const Tensor& logits, std::span<const int> ground_truth) {
  if (ground_truth.empty()) throw DataError("derive_spaced_text: empty ground-truth text");
  if (logits.rank() != 2) throw ShapeError("derive_spaced_text: logits must be [T, K]");
  const int frames = logits.dim(0), classes = logits.dim(1);
  for (int g : ground_truth) {
    if (g <= 0 || g >= classes) throw DataError("derive_spaced_text: label outside logit classes");
  }
  if (frames < min_ctc_length(ground_truth)) {
    return {uniform_layout(ground_truth, frames), true};
  }

  // Frame argmax, grouped into runs.
  std::vector<Piece> pieces;
  for (int t = 0; t < frames; ++t) {
    const Real* row = logits.data() + static_cast<std::size_t>(t) * classes;
    int best = static_cast<int>(std::max_element(row, row + classes) - row);
    if (!pieces.empty() && pieces.back().label == best) {
      ++pieces.back().count;
    } else {
      pieces.push_back({best, 1});
    }
  }
  std::vector<int> run_piece, run_label;
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    if (pieces[p].label != Alphabet::kBlank) {
      run_piece.push_back(static_cast<int>(p));
      run_label.push_back(pieces[p].label);
    }
  }

  std::vector<Piece> out;
  std::size_t next = 0;
  auto emit_until = [&](std::size_t stop) {
    for (; next < stop; ++next) {
      if (pieces[next].count > 0) out.push_back(pieces[next]);
    }
  };
  for (const AlignStep& s : align(run_label, ground_truth)) {
    switch (s.op) {
      case EditOp::kKeep: {
        auto p = static_cast<std::size_t>(run_piece[s.run]);
        emit_until(p);
        out.push_back({ground_truth[s.gt], pieces[p].count, s.gt});
        next = p + 1;
        break;
      }
      case EditOp::kSpurious: {
        auto p = static_cast<std::size_t>(run_piece[s.run]);
        emit_until(p);
        out.push_back({Alphabet::kBlank, pieces[p].count});
        next = p + 1;
        break;
      }
      case EditOp::kMissing: {
        const Piece fill{ground_truth[s.gt], 1, s.gt};
        if (next < pieces.size() && pieces[next].label == Alphabet::kBlank &&
            pieces[next].count > 0) {
          // Centre the character in the upcoming gap; the rest stays pending.
          int before = (pieces[next].count - 1) / 2;
          if (before > 0) out.push_back({Alphabet::kBlank, before});
          out.push_back(fill);
          pieces[next].count -= before + 1;
          if (pieces[next].count == 0) ++next;
        } else if (!out.empty() && out.back().label == Alphabet::kBlank) {
          if (--out.back().count == 0) out.pop_back();
          out.push_back(fill);
        } else {
          Piece* left = out.empty() ? nullptr : &out.back();
          Piece* right = next < pieces.size() ? &pieces[next] : nullptr;
          int lc = left ? left->count : 0, rc = right ? right->count : 0;
          if (lc >= 2 && lc >= rc) {
            --left->count;
          } else if (rc >= 2) {
            --right->count;
          }
          out.push_back(fill);
        }
        break;
      }
    }
  }
  emit_until(pieces.size());

  // Equal neighbouring characters need a blank between them.
  std::vector<Piece> fixed;
  for (const Piece& p : out) {
    if (p.count == 0) continue;
    if (!fixed.empty()) {
      Piece& prev = fixed.back();
      if (p.label == Alphabet::kBlank && prev.label == Alphabet::kBlank) {
        prev.count += p.count;
        continue;
      }
      if (p.label != Alphabet::kBlank && p.label == prev.label) {
        Piece cur = p;
        if (prev.count >= 2) {
          --prev.count;
        } else if (cur.count >= 2) {
          --cur.count;
        }
        fixed.push_back({Alphabet::kBlank, 1});
        fixed.push_back(cur);
        continue;
      }
    }
    fixed.push_back(p);
  }

  DerivedSpacedText result;
  for (const Piece& p : fixed) result.spaced.tokens.insert(result.spaced.tokens.end(), p.count, p.label);
  if (collapse(result.spaced) != std::vector<int>(ground_truth.begin(), ground_truth.end())) {
    // Unreachable by construction; keep the contract regardless.
    return {uniform_layout(ground_truth, frames), true};
  }
  return result;
}

Tensor one_hot(const SpacedText& spaced, int num_classes) {
  const int len = static_cast<int>(spaced.size());
  Tensor out(Shape{num_classes, len});
  for (int j = 0; j < len; ++j) {
    int t = spaced.tokens[j];
    if (t < 0 || t >= num_classes) {
      throw DataError("one_hot: token " + std::to_string(t) + " at position " + std::to_string(j) +
                      " is not a known symbol");
    }
    out.at(t, j) = 1;
  }
  return out;
}

Tensor text_one_hot(std::span<const int> labels, int num_classes) {
  SpacedText s{std::vector<int>(labels.begin(), labels.end())};
  for (int l : s.tokens) {
    if (l == Alphabet::kBlank) throw DataError("text_one_hot: plain text cannot contain blanks");
  }
  s.tokens.push_back(Alphabet::kBlank);
  return one_hot(s, num_classes);
}

std::string to_debug_string(const SpacedText& spaced, const Alphabet& alphabet) {
  std::string out;
  for (int t : spaced.tokens) {
    if (t == Alphabet::kBlank) {
      out += "<b>";
    } else {
      int one[] = {t};
      out += alphabet.decode(one);
    }
  }
  return out;
}

}  // namespace hwgen
