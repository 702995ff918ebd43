#pragma once

// Central finite-difference oracle for reverse-mode gradients. Test-only.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "hwgen/autograd.hpp"
#include "hwgen/ops.hpp"

namespace hwgen::testing {

using ScalarFn = std::function<Var(std::span<const Var>)>;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::max(std::abs(analytic), std::abs(numeric)) + 1e-8);
}

// Max relative error between backward() and central differences with step h
// over every element of every input.
inline double gradcheck(const std::vector<Tensor>& inputs, const ScalarFn& f, double h = 1e-5) {
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(leaf(t));
  Var loss = f(leaves);
  std::vector<Tensor> analytic = backward(loss, leaves);

  auto eval = [&](const std::vector<Tensor>& xs) {
    std::vector<Var> vs;
    for (const auto& t : xs) vs.push_back(constant(t));
    return static_cast<double>(f(vs).value()[0]);
  };

  double worst = 0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const Real orig = probe[i][j];
      probe[i][j] = orig + static_cast<Real>(h);
      const double up = eval(probe);
      probe[i][j] = orig - static_cast<Real>(h);
      const double down = eval(probe);
      probe[i][j] = orig;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, relative_error(analytic[i][j], numeric));
    }
  }
  return worst;
}

inline Tensor random_tensor(Shape shape, NoiseSource& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<Real>(scale * rng.normal());
  return t;
}

// Values bounded away from zero so kinked activations stay differentiable
// under the finite-difference step.
inline Tensor random_away_from_zero(Shape shape, NoiseSource& rng, double margin = 1e-2) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) {
    double x = rng.normal();
    if (std::abs(x) < margin) x = x < 0 ? -margin - 0.1 : margin + 0.1;
    v = static_cast<Real>(x);
  }
  return t;
}

// Fixed random linear functional so every output element gets a distinct
// weight; identical across calls with the same seed.
inline Var project(const Var& y, std::uint64_t seed = 99) {
  NoiseSource rng(seed);
  Tensor w(y.shape());
  for (auto& v : w.values()) v = static_cast<Real>(rng.normal());
  return sum(mul(y, constant(std::move(w))));
}

}  // namespace hwgen::testing
