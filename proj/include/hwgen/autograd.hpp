#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hwgen/tensor.hpp"

namespace hwgen {

// A learnable tensor. `id` is a stable "network/layer/name" path.
struct Parameter {
  std::string id;
  Tensor value;
  std::optional<Tensor> grad;  // absent until a backward pass reaches it
  bool trainable = true;
};

// One vertex of the define-by-run graph.
struct Node {
  Tensor value;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Adds this node's contribution to each parent's adjoint. Entries of
  // `parent_grads` are null for parents that need no gradient.
  std::function<void(const Tensor& grad, std::span<Tensor* const> parent_grads)> backward;
  Parameter* param = nullptr;
};

// Handle to a graph node. Copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  int dim(int axis) const { return value().dim(axis); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
// A free input that gradients can be requested for (tests, probes).
Var leaf(Tensor value);
// Binds a parameter; gradient flows into Parameter::grad when trainable.
Var param(Parameter& p);
// Same value, cut from the graph.
Var detach(const Var& v);

// Builds an op node. `backward` may be empty when no input requires grad.
Var make_node(Tensor value, std::vector<Var> inputs,
              std::function<void(const Tensor&, std::span<Tensor* const>)> backward);

// Reverse sweep from a scalar loss. Gradients of trainable parameters are
// accumulated into Parameter::grad; the gradient w.r.t. each Var in `wrt`
// is returned (zeros when unreachable). Repeated calls on the same graph are
// independent of each other.
std::vector<Tensor> backward(const Var& loss, std::span<const Var> wrt = {});

// Seeded Gaussian source for additive-noise layers. Uses its own
// Box-Muller transform so draws are identical across standard libraries.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}
  double uniform();
  double normal();
  void fill_normal(Tensor& t);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace hwgen
