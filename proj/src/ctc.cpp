#include "hwgen/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hwgen/alphabet.hpp"
#include "hwgen/error.hpp"
#include "hwgen/spaced_text.hpp"

namespace hwgen {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

CtcResult ctc_forward_backward(const Tensor& log_probs, std::span<const int> target) {
  if (log_probs.rank() != 2) throw ShapeError("ctc: log_probs must be [T, K]");
  const int frames = log_probs.dim(0), classes = log_probs.dim(1);
  for (int l : target) {
    if (l <= Alphabet::kBlank || l >= classes) {
      throw DataError("ctc: target label " + std::to_string(l) + " outside [1, " +
                      std::to_string(classes - 1) + "]");
    }
  }
  if (frames < 1 || frames < min_ctc_length(target)) {
    throw InfeasibleTarget("ctc: target of length " + std::to_string(target.size()) + " needs " +
                           std::to_string(min_ctc_length(target)) + " frames, got " +
                           std::to_string(frames));
  }

  // Extended sequence: blank, l1, blank, l2, ..., blank.
  const int S = 2 * static_cast<int>(target.size()) + 1;
  std::vector<int> ext(S, Alphabet::kBlank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto skip_ok = [&](int s) { return s >= 2 && ext[s] != Alphabet::kBlank && ext[s] != ext[s - 2]; };
  auto lp = [&](int t, int s) { return static_cast<double>(log_probs.at(t, ext[s])); };

  std::vector<double> alpha(static_cast<std::size_t>(frames) * S, kNegInf);
  std::vector<double> beta(static_cast<std::size_t>(frames) * S, kNegInf);
  auto A = [&](int t, int s) -> double& { return alpha[static_cast<std::size_t>(t) * S + s]; };
  auto B = [&](int t, int s) -> double& { return beta[static_cast<std::size_t>(t) * S + s]; };

  A(0, 0) = lp(0, 0);
  if (S > 1) A(0, 1) = lp(0, 1);
  for (int t = 1; t < frames; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = A(t - 1, s);
      if (s >= 1) acc = log_add(acc, A(t - 1, s - 1));
      if (skip_ok(s)) acc = log_add(acc, A(t - 1, s - 2));
      A(t, s) = acc == kNegInf ? kNegInf : acc + lp(t, s);
    }
  }
  double log_p = A(frames - 1, S - 1);
  if (S > 1) log_p = log_add(log_p, A(frames - 1, S - 2));

  // Beta excludes the emission at its own frame.
  B(frames - 1, S - 1) = 0;
  if (S > 1) B(frames - 1, S - 2) = 0;
  for (int t = frames - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double acc = B(t + 1, s) == kNegInf ? kNegInf : B(t + 1, s) + lp(t + 1, s);
      if (s + 1 < S && B(t + 1, s + 1) != kNegInf) acc = log_add(acc, B(t + 1, s + 1) + lp(t + 1, s + 1));
      if (s + 2 < S && skip_ok(s + 2) && B(t + 1, s + 2) != kNegInf) {
        acc = log_add(acc, B(t + 1, s + 2) + lp(t + 1, s + 2));
      }
      B(t, s) = acc;
    }
  }

  if (!std::isfinite(log_p)) throw NumericError("ctc: non-finite log-likelihood");
  CtcResult r;
  r.loss = -log_p;
  r.grad = Tensor(Shape{frames, classes});
  for (int t = 0; t < frames; ++t) {
    for (int s = 0; s < S; ++s) {
      double v = A(t, s) + B(t, s);
      if (v == kNegInf) continue;
      r.grad.at(t, ext[s]) -= static_cast<Real>(std::exp(v - log_p));
    }
  }
  return r;
}

double ctc_loss(const FramePosteriors& posteriors, std::span<const int> target) {
  return ctc_forward_backward(posteriors.log_probs, target).loss;
}

Var ctc_loss(const Var& log_probs, std::span<const int> target) {
  CtcResult r = ctc_forward_backward(log_probs.value(), target);
  Tensor grad = std::move(r.grad);
  return make_node(Tensor::scalar(static_cast<Real>(r.loss)), {log_probs},
                   [grad](const Tensor& g, std::span<Tensor* const> pg) {
                     for (std::size_t i = 0; i < grad.size(); ++i) (*pg[0])[i] += g[0] * grad[i];
                   });
}

GreedyDecode greedy_decode(const FramePosteriors& posteriors) {
  GreedyDecode out;
  const int frames = posteriors.frames(), classes = posteriors.classes();
  out.tokens.reserve(frames);
  for (int t = 0; t < frames; ++t) {
    const Real* row = posteriors.log_probs.data() + static_cast<std::size_t>(t) * classes;
    out.tokens.push_back(static_cast<int>(std::max_element(row, row + classes) - row));
  }
  out.labels = collapse(out.tokens);
  return out;
}

std::vector<CharInstance> char_instances(const FramePosteriors& posteriors) {
  const GreedyDecode dec = greedy_decode(posteriors);
  std::vector<CharInstance> out;
  const int frames = static_cast<int>(dec.tokens.size());
  int t = 0;
  while (t < frames) {
    const int label = dec.tokens[t];
    int end = t;
    while (end + 1 < frames && dec.tokens[end + 1] == label) ++end;
    if (label != Alphabet::kBlank) {
      double conf = 0;
      for (int k = t; k <= end; ++k) conf += std::exp(static_cast<double>(posteriors.log_probs.at(k, label)));
      out.push_back({label, (t + end) / 2, conf / (end - t + 1)});
    }
    t = end + 1;
  }
  return out;
}

}  // namespace hwgen
