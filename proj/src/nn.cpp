#include "hwgen/nn.hpp"

#include <cmath>

#include "hwgen/error.hpp"

namespace hwgen {

Parameter& ParamSet::add(const std::string& name, Tensor init) {
  std::string id = prefix_ + "/" + name;
  if (find(id) != nullptr) throw Error("duplicate parameter id " + id);
  auto p = std::make_unique<Parameter>();
  p->id = std::move(id);
  p->value = std::move(init);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParamSet::find(const std::string& id) {
  for (auto& p : params_) {
    if (p->id == id) return p.get();
  }
  return nullptr;
}

std::vector<Parameter*> ParamSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamSet::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p->grad.reset();
}

void ParamSet::set_trainable(bool trainable) {
  for (auto& p : params_) p->trainable = trainable;
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

Tensor he_normal(Shape shape, int fan_in, NoiseSource& rng, Real gain) {
  Tensor t(std::move(shape));
  const double sd = gain * std::sqrt(2.0 / fan_in);
  for (auto& v : t.values()) v = static_cast<Real>(sd * rng.normal());
  return t;
}

Conv2d Conv2d::make(ParamSet& ps, const std::string& name, int in, int out, int kh, int kw,
                    NoiseSource& rng, int stride_h, int stride_w) {
  Conv2d c;
  c.weight = &ps.add(name + "/weight", he_normal({out, in, kh, kw}, in * kh * kw, rng));
  c.bias = &ps.add(name + "/bias", Tensor(Shape{out}));
  c.stride_h = stride_h;
  c.stride_w = stride_w;
  c.pad_h = kh / 2;
  c.pad_w = kw / 2;
  return c;
}

Var Conv2d::operator()(const Var& x) const {
  return conv2d(x, param(*weight), param(*bias), stride_h, stride_w, pad_h, pad_w);
}

Conv1d Conv1d::make(ParamSet& ps, const std::string& name, int in, int out, int k,
                    NoiseSource& rng, Real gain) {
  Conv1d c;
  c.weight = &ps.add(name + "/weight", he_normal({out, in, k}, in * k, rng, gain));
  c.bias = &ps.add(name + "/bias", Tensor(Shape{out}));
  c.pad = k / 2;
  return c;
}

Var Conv1d::operator()(const Var& x) const {
  return conv1d(x, param(*weight), param(*bias), stride, pad);
}

Linear Linear::make(ParamSet& ps, const std::string& name, int in, int out, NoiseSource& rng,
                    Real gain) {
  Linear l;
  l.weight = &ps.add(name + "/weight", he_normal({out, in}, in, rng, gain));
  l.bias = &ps.add(name + "/bias", Tensor(Shape{out}));
  return l;
}

Var Linear::operator()(const Var& x) const { return linear(x, param(*weight), param(*bias)); }

void Adam::step(Parameter& p, const Tensor& grad) {
  if (grad.shape() != p.value.shape()) throw ShapeError("adam: gradient shape mismatch for " + p.id);
  auto& s = slots_[p.id];
  if (s.m.shape() != p.value.shape()) {
    s.m = Tensor(p.value.shape());
    s.v = Tensor(p.value.shape());
    s.t = 0;
  }
  ++s.t;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
  const double step = config_.lr * std::sqrt(c2) / c1;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    s.m[i] = static_cast<Real>(b1 * s.m[i] + (1 - b1) * g);
    s.v[i] = static_cast<Real>(b2 * s.v[i] + (1 - b2) * g * g);
    p.value[i] -= static_cast<Real>(step * s.m[i] / (std::sqrt(static_cast<double>(s.v[i])) +
                                                     config_.eps * std::sqrt(c2)));
  }
}

void Adam::step(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (p->grad) step(*p, *p->grad);
  }
}

}  // namespace hwgen
