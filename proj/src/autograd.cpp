#include "hwgen/autograd.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>
#include <unordered_set>

#include "hwgen/error.hpp"

namespace hwgen {

const Tensor& Var::value() const {
  if (!node_) throw Error("use of an undefined Var (no forward pass has produced it)");
  return node_->value;
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var param(Parameter& p) {
  auto n = std::make_shared<Node>();
  n->value = p.value;
  n->requires_grad = p.trainable;
  n->param = &p;
  return Var(std::move(n));
}

Var detach(const Var& v) { return constant(v.value()); }

Var make_node(Tensor value, std::vector<Var> inputs,
              std::function<void(const Tensor&, std::span<Tensor* const>)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool needs = false;
  n->parents.reserve(inputs.size());
  for (auto& in : inputs) {
    if (!in.defined()) throw Error("op input is undefined");
    needs = needs || in.requires_grad();
    n->parents.push_back(in.node());
  }
  n->requires_grad = needs;
  if (needs) {
    n->backward = std::move(backward);
  } else {
    n->parents.clear();
  }
  return Var(std::move(n));
}

std::vector<Tensor> backward(const Var& loss, std::span<const Var> wrt) {
  if (!loss.defined()) throw Error("backward called before any forward pass");
  if (loss.value().size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }

  // Post-order DFS, restricted to nodes that need gradients.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  if (loss.requires_grad()) {
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node* p = node->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<Node*, Tensor> grads;
  grads.reserve(order.size());
  if (!order.empty()) grads[loss.node().get()] = Tensor(loss.shape(), Real(1));

  std::vector<Tensor*> parent_grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    auto g = grads.find(node);
    if (g == grads.end()) continue;
    if (node->param != nullptr) {
      auto& pg = node->param->grad;
      if (!pg) {
        pg = g->second;
      } else {
        *pg += g->second;
      }
    }
    if (!node->backward) continue;
    parent_grads.assign(node->parents.size(), nullptr);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      Node* p = node->parents[i].get();
      if (!p->requires_grad) continue;
      auto [slot, inserted] = grads.try_emplace(p);
      if (inserted) slot->second = Tensor(p->value.shape());
      parent_grads[i] = &slot->second;
    }
    node->backward(g->second, parent_grads);
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const auto& v : wrt) {
    auto g = grads.find(v.node().get());
    out.push_back(g != grads.end() ? g->second : Tensor(v.shape()));
  }
  return out;
}

double NoiseSource::uniform() {
  // 53 random bits mapped onto [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NoiseSource::normal() {
  if (spare_) {
    double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = 0;
  while (u1 <= 0) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  return r * std::cos(a);
}

void NoiseSource::fill_normal(Tensor& t) {
  for (auto& x : t.values()) x = static_cast<Real>(normal());
}

}  // namespace hwgen
