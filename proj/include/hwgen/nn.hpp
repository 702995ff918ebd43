#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hwgen/autograd.hpp"
#include "hwgen/ops.hpp"

namespace hwgen {

// Owns the parameters of one network. Addresses are stable for the
// lifetime of the set.
class ParamSet {
 public:
  explicit ParamSet(std::string prefix) : prefix_(std::move(prefix)) {}
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  // Registers "<prefix>/<name>"; throws if the id is already taken.
  Parameter& add(const std::string& name, Tensor init);
  Parameter* find(const std::string& id);
  const std::string& prefix() const { return prefix_; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void zero_grad();
  void set_trainable(bool trainable);
  std::size_t numel() const;

 private:
  std::string prefix_;
  std::vector<std::unique_ptr<Parameter>> params_;
};

// He-normal init: N(0, gain^2 * 2 / fan_in).
Tensor he_normal(Shape shape, int fan_in, NoiseSource& rng, Real gain = Real(1));

struct Conv2d {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  int stride_h = 1, stride_w = 1, pad_h = 0, pad_w = 0;

  static Conv2d make(ParamSet& ps, const std::string& name, int in, int out, int kh, int kw,
                     NoiseSource& rng, int stride_h = 1, int stride_w = 1);
  Var operator()(const Var& x) const;
};

struct Conv1d {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  int stride = 1, pad = 0;

  static Conv1d make(ParamSet& ps, const std::string& name, int in, int out, int k,
                     NoiseSource& rng, Real gain = Real(1));
  Var operator()(const Var& x) const;
};

struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Linear make(ParamSet& ps, const std::string& name, int in, int out, NoiseSource& rng,
                     Real gain = Real(1));
  Var operator()(const Var& x) const;
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with per-parameter moment buffers keyed by Parameter::id.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  const AdamConfig& config() const { return config_; }

  void step(Parameter& p, const Tensor& grad);
  // Steps every parameter that carries a gradient.
  void step(std::span<Parameter* const> params);

 private:
  struct Slot {
    Tensor m, v;
    long t = 0;
  };
  AdamConfig config_;
  std::map<std::string, Slot> slots_;
};

}  // namespace hwgen
