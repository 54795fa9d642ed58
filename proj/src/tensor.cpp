#include "lyt/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace lyt {

namespace {
thread_local bool t_grad_enabled = true;

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

NoGrad::NoGrad() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGrad::~NoGrad() { t_grad_enabled = prev_; }

bool grad_enabled() { return t_grad_enabled; }

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  auto n = std::make_shared<detail::Node>();
  n->data.assign(shape_numel(shape), 0.0);
  n->shape = std::move(shape);
  n->needs_grad = requires_grad;
  if (requires_grad) n->grad.assign(n->data.size(), 0.0);
  return Tensor(std::move(n));
}

Tensor Tensor::full(std::vector<std::size_t> shape, real value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

Tensor Tensor::from(std::vector<real> data, std::vector<std::size_t> shape, bool requires_grad) {
  if (data.size() != shape_numel(shape))
    throw DimensionError("Tensor::from: data length does not match shape");
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->needs_grad = requires_grad;
  if (requires_grad) n->grad.assign(n->data.size(), 0.0);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(real v) { return from({v}, {1, 1}, false); }

Tensor Tensor::make(std::vector<std::size_t> shape, std::vector<real> data,
                    std::vector<Tensor> parents,
                    std::function<void(const std::vector<real>&)> backfn) {
  if (data.size() != shape_numel(shape))
    throw DimensionError("Tensor::make: data length does not match shape");
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->leaf = false;
  bool track = t_grad_enabled;
  if (track) {
    track = false;
    for (const Tensor& p : parents)
      if (p.needs_grad()) track = true;
  }
  if (track) {
    n->needs_grad = true;
    n->grad.assign(n->data.size(), 0.0);
    n->parents.reserve(parents.size());
    for (const Tensor& p : parents) n->parents.push_back(p.n_);
    n->backfn = std::move(backfn);
  }
  return Tensor(std::move(n));
}

std::size_t Tensor::rows() const {
  if (n_->shape.size() != 2) throw DimensionError("Tensor::rows: tensor is not 2-D");
  return n_->shape[0];
}

std::size_t Tensor::cols() const {
  if (n_->shape.size() != 2) throw DimensionError("Tensor::cols: tensor is not 2-D");
  return n_->shape[1];
}

real Tensor::item() const {
  if (size() != 1) throw DimensionError("Tensor::item: tensor is not scalar");
  return n_->data[0];
}

std::vector<real>& Tensor::grad() const {
  if (!n_->needs_grad) throw ContractError("Tensor::grad: tensor does not track gradients");
  if (n_->grad.empty()) n_->grad.assign(n_->data.size(), 0.0);
  return n_->grad;
}

void Tensor::zero_grad() const {
  if (n_->needs_grad) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

void Tensor::backward() {
  if (size() != 1) throw ContractError("Tensor::backward: output must be scalar");
  if (!n_->needs_grad) throw ContractError("Tensor::backward: output does not track gradients");

  // Iterative post-order DFS for a topological ordering of the reachable graph.
  std::vector<detail::Node*> topo;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack{{n_.get(), 0}};
  visited.insert(n_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::Node* p = f.node->parents[f.next_parent++].get();
      if (p->needs_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  n_->grad.assign(1, 1.0);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backfn) node->backfn(node->grad);
  }
  // Release graph edges; leaf grads stay for the optimizer to consume.
  for (detail::Node* node : topo) {
    if (!node->leaf) {
      node->parents.clear();
      node->backfn = nullptr;
    }
  }
}

}  // namespace lyt
