#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hwgen/autograd.hpp"

namespace hwgen {

// The five generator-side losses whose gradients get balanced.
enum class LossId { kAutoR, kAdvG, kRecG, kAdvR, kRecR };

std::string_view loss_id_name(LossId id);
std::optional<LossId> parse_loss_id(std::string_view name);

// Multipliers applied after normalization.
struct BalanceWeights {
  double auto_r = 1.0;
  double adv_g = 0.5;
  double rec_g = 0.6;
  double adv_r = 0.4;
  double rec_r = 0.75;

  double of(LossId id) const;
};

// Parameter id -> gradient.
using GradMap = std::map<std::string, Tensor>;

// Gradients of one loss with their per-layer mean magnitudes. A "layer" is
// one parameter tensor; parameters the loss never reached are absent.
struct GradientBundle {
  LossId loss = LossId::kAutoR;
  GradMap grads;
  std::map<std::string, double> layer_means;
};

// Snapshot of every parameter that currently carries a gradient.
GradMap collect_grads(std::span<Parameter* const> params);

// Builds a bundle; non-finite gradients throw NumericError.
GradientBundle record(LossId loss, GradMap grads);

// Holds at most one bundle per loss until reset.
class GradientCache {
 public:
  // Throws if a bundle for the same loss is already held.
  void store(GradientBundle bundle);
  bool has(LossId loss) const;
  const GradientBundle* get(LossId loss) const;
  std::vector<GradientBundle> bundles() const;
  std::size_t size() const { return bundles_.size(); }
  void reset() { bundles_.clear(); }

 private:
  std::map<LossId, GradientBundle> bundles_;
};

inline constexpr double kBalanceEps = 1e-12;

// Rescales every non-reference bundle layer-wise so its mean |g| matches the
// reference's (m_ref / m_x), dropping layers with m_x <= eps, then returns
// weight-summed gradients. The reference enters unscaled with its own
// weight. Throws when the reference bundle is missing.
GradMap combine(std::span<const GradientBundle> bundles, const BalanceWeights& weights,
                LossId reference = LossId::kAutoR, double eps = kBalanceEps);

// The layer-wise normalization alone: `bundle` rescaled to `reference`.
GradMap normalize_to(const GradientBundle& bundle, const GradientBundle& reference,
                     double eps = kBalanceEps);

}  // namespace hwgen
