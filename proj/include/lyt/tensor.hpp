#pragma once
// ============================================================================
// Tape-based reverse-mode autodiff on dense row-major f64 tensors.
//
// A Tensor is a shared handle to a node in an implicit computation graph.
// Ops (see ops.hpp) create result nodes that remember their parents and a
// backward closure; Tensor::backward() on a scalar result topologically
// sorts the graph, seeds d(out)/d(out)=1, and runs the closures in reverse,
// accumulating into each node's grad buffer. Graph edges are released after
// the backward pass; leaf gradients survive until zero_grad().
// ============================================================================

#include <functional>
#include <memory>
#include <vector>

#include "lyt/common.hpp"

namespace lyt {

namespace detail {
struct Node {
  std::vector<std::size_t> shape;
  std::vector<real> data;
  std::vector<real> grad;  // allocated iff needs_grad
  bool needs_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  // Receives this node's gradient; writes into parents' grad buffers.
  std::function<void(const std::vector<real>&)> backfn;
};
}  // namespace detail

// RAII guard disabling graph construction (evaluation-only forward passes).
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, real value, bool requires_grad = false);
  static Tensor from(std::vector<real> data, std::vector<std::size_t> shape,
                     bool requires_grad = false);
  static Tensor scalar(real v);

  // Internal factory for ops: result node with parents and backward closure.
  // The closure must check parent.needs_grad() before accumulating.
  static Tensor make(std::vector<std::size_t> shape, std::vector<real> data,
                     std::vector<Tensor> parents,
                     std::function<void(const std::vector<real>&)> backfn);

  bool defined() const { return static_cast<bool>(n_); }
  const std::vector<std::size_t>& shape() const { return n_->shape; }
  std::size_t size() const { return n_->data.size(); }
  std::size_t ndim() const { return n_->shape.size(); }
  // 2-D accessors (most of the model works on matrices).
  std::size_t rows() const;
  std::size_t cols() const;

  // Tensor is a shared handle: a const Tensor is a const handle to mutable
  // node storage, so accessors are const-qualified and return mutable refs.
  std::vector<real>& data() const { return n_->data; }
  real item() const;

  bool needs_grad() const { return n_->needs_grad; }
  bool is_leaf() const { return n_->leaf; }
  std::vector<real>& grad() const;
  void zero_grad() const;

  // Scalar-only: run reverse-mode accumulation over the whole tape.
  void backward();

  detail::Node* node() const { return n_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
  std::shared_ptr<detail::Node> n_;
};

}  // namespace lyt
