#pragma once

#include <initializer_list>
#include <memory>
#include <utility>
#include <vector>

#include "stitchfusion/tensor.h"

namespace stitchfusion::detail {

// Builds the output node of a primitive. The backward closure is only kept
// when grad mode is on and at least one input requires a gradient.
inline Tensor make_result(Shape shape, std::vector<double> data,
                          std::initializer_list<const Tensor*> inputs,
                          std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->id = next_tape_id();
  bool needs = false;
  if (grad_mode_enabled()) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->parents.push_back(t->node());
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

inline Tensor make_result(Shape shape, std::vector<double> data,
                          const std::vector<Tensor>& inputs,
                          std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->id = next_tape_id();
  bool needs = false;
  if (grad_mode_enabled()) {
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

// Gradient sink for a parent, or nullptr when that parent does not need one.
inline std::vector<double>* grad_sink(Node& self, std::size_t parent) {
  Node& p = *self.parents[parent];
  if (!p.requires_grad) return nullptr;
  return &p.grad_buffer();
}

}  // namespace stitchfusion::detail
