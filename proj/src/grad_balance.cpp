#include "hwgen/grad_balance.hpp"

#include <cmath>

#include "hwgen/error.hpp"

namespace hwgen {

std::string_view loss_id_name(LossId id) {
  switch (id) {
    case LossId::kAutoR: return "auto_r";
    case LossId::kAdvG: return "adv_g";
    case LossId::kRecG: return "rec_g";
    case LossId::kAdvR: return "adv_r";
    case LossId::kRecR: return "rec_r";
  }
  return "?";
}

std::optional<LossId> parse_loss_id(std::string_view name) {
  for (LossId id : {LossId::kAutoR, LossId::kAdvG, LossId::kRecG, LossId::kAdvR, LossId::kRecR}) {
    if (loss_id_name(id) == name) return id;
  }
  return std::nullopt;
}

double BalanceWeights::of(LossId id) const {
  switch (id) {
    case LossId::kAutoR: return auto_r;
    case LossId::kAdvG: return adv_g;
    case LossId::kRecG: return rec_g;
    case LossId::kAdvR: return adv_r;
    case LossId::kRecR: return rec_r;
  }
  return 0;
}

GradMap collect_grads(std::span<Parameter* const> params) {
  GradMap out;
  for (const Parameter* p : params) {
    if (p->grad) out.emplace(p->id, *p->grad);
  }
  return out;
}

namespace {

double mean_abs(const Tensor& t) {
  if (t.empty()) return 0;
  double s = 0;
  for (Real v : t.values()) s += std::abs(static_cast<double>(v));
  return s / static_cast<double>(t.size());
}

}  // namespace

GradientBundle record(LossId loss, GradMap grads) {
  GradientBundle b;
  b.loss = loss;
  for (const auto& [id, g] : grads) {
    if (!g.all_finite()) {
      throw NumericError("non-finite gradient for " + id + " under loss " +
                         std::string(loss_id_name(loss)));
    }
    b.layer_means[id] = mean_abs(g);
  }
  b.grads = std::move(grads);
  return b;
}

void GradientCache::store(GradientBundle bundle) {
  LossId id = bundle.loss;
  if (!bundles_.emplace(id, std::move(bundle)).second) {
    throw Error("gradient bundle for " + std::string(loss_id_name(id)) +
                " already recorded; reset before recording again");
  }
}

bool GradientCache::has(LossId loss) const { return bundles_.contains(loss); }

const GradientBundle* GradientCache::get(LossId loss) const {
  auto it = bundles_.find(loss);
  return it == bundles_.end() ? nullptr : &it->second;
}

std::vector<GradientBundle> GradientCache::bundles() const {
  std::vector<GradientBundle> out;
  for (const auto& [id, b] : bundles_) out.push_back(b);
  return out;
}

GradMap normalize_to(const GradientBundle& bundle, const GradientBundle& reference, double eps) {
  GradMap out;
  for (const auto& [id, g] : bundle.grads) {
    const double m_x = bundle.layer_means.at(id);
    if (!(m_x > eps)) continue;
    auto ref = reference.layer_means.find(id);
    const double m_ref = ref == reference.layer_means.end() ? 0.0 : ref->second;
    Tensor scaled = g;
    const double k = m_ref / m_x;
    for (auto& v : scaled.values()) v = static_cast<Real>(static_cast<double>(v) * k);
    out.emplace(id, std::move(scaled));
  }
  return out;
}

GradMap combine(std::span<const GradientBundle> bundles, const BalanceWeights& weights,
                LossId reference, double eps) {
  const GradientBundle* ref = nullptr;
  for (const auto& b : bundles) {
    if (b.loss == reference) ref = &b;
  }
  if (ref == nullptr) {
    throw Error("combine: reference bundle " + std::string(loss_id_name(reference)) + " missing");
  }

  GradMap out;
  auto accumulate = [&out](const std::string& id, const Tensor& g, double w) {
    auto [it, inserted] = out.try_emplace(id, Tensor(g.shape()));
    if (it->second.shape() != g.shape()) throw ShapeError("combine: gradient shape mismatch for " + id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      it->second[i] += static_cast<Real>(w * static_cast<double>(g[i]));
    }
  };

  for (const auto& [id, g] : ref->grads) accumulate(id, g, weights.of(reference));
  for (const auto& b : bundles) {
    if (&b == ref) continue;
    const double w = weights.of(b.loss);
    for (const auto& [id, g] : normalize_to(b, *ref, eps)) accumulate(id, g, w);
  }
  for (const auto& [id, g] : out) {
    if (!g.all_finite()) throw NumericError("combine: non-finite balanced gradient for " + id);
  }
  return out;
}

}  // namespace hwgen
