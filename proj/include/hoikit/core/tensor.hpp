#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hoikit/errors.hpp"

namespace hoikit {

template <class T>
struct Node;

// Dense row-major tensor with reverse-mode autodiff. Copies alias the same
// data/grad buffers, so graph nodes can hold their parents by value. Tensors
// that require grad get their grad buffer allocated at construction; aliasing
// copies therefore always see accumulated gradients.
template <class T>
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<T>> data;
  std::shared_ptr<std::vector<T>> grad;
  std::shared_ptr<Node<T>> node;
  bool requires_grad = false;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.shape = std::move(shape);
    std::size_t n = 1;
    for (int d : t.shape) {
      if (d < 0) throw ShapeError("negative dimension");
      n *= std::size_t(d);
    }
    t.data = std::make_shared<std::vector<T>>(n, T(0));
    t.requires_grad = requires_grad;
    if (requires_grad) t.grad = std::make_shared<std::vector<T>>(n, T(0));
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<T> values, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    if (values.size() != t.data->size()) throw ShapeError("value count does not match shape");
    *t.data = std::move(values);
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from({}, {v}, requires_grad);
  }

  bool defined() const { return data != nullptr; }
  int ndim() const { return int(shape.size()); }

  int numel() const {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  int rows() const {
    if (ndim() != 2) throw ShapeError("rows() needs a 2-d tensor");
    return shape[0];
  }
  int cols() const {
    if (ndim() != 2) throw ShapeError("cols() needs a 2-d tensor");
    return shape[1];
  }

  T& at(int i) { return (*data)[std::size_t(i)]; }
  const T& at(int i) const { return (*data)[std::size_t(i)]; }
  T& at(int i, int j) { return (*data)[std::size_t(i) * shape[1] + j]; }
  const T& at(int i, int j) const { return (*data)[std::size_t(i) * shape[1] + j]; }
  T& at(int i, int j, int k) {
    return (*data)[(std::size_t(i) * shape[1] + j) * shape[2] + k];
  }
  const T& at(int i, int j, int k) const {
    return (*data)[(std::size_t(i) * shape[1] + j) * shape[2] + k];
  }

  T value() const {
    if (numel() != 1) throw ShapeError("value() needs a single-element tensor");
    return (*data)[0];
  }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), T(0));
  }

  // Shallow copy that drops graph history; shares the data buffer.
  Tensor detached() const {
    Tensor t;
    t.shape = shape;
    t.data = data;
    return t;
  }
};

template <class T>
struct Node {
  std::vector<Tensor<T>> parents;
  std::function<void()> run;  // accumulates the output grad into parent grads
  const char* op = "";
};

// Grad mode is thread local so concurrent callers stay independent; there is
// no other shared mutable state in the library.
inline bool& grad_mode_flag() {
  thread_local bool on = true;
  return on;
}
inline bool grad_enabled() { return grad_mode_flag(); }

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = prev; }
};

// Allocates the result of an op. The node is created only when some parent
// participates in the graph and grad mode is on.
template <class T>
inline Tensor<T> op_result(std::vector<int> shape, std::vector<Tensor<T>> parents, const char* op) {
  bool rg = false;
  if (grad_enabled()) {
    for (const auto& p : parents) rg = rg || p.requires_grad;
  }
  Tensor<T> out = Tensor<T>::zeros(std::move(shape), rg);
  if (rg) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = std::move(parents);
    out.node->op = op;
  }
  return out;
}

// Reverse pass from a scalar root. Iterative post-order topo sort so deep
// graphs cannot overflow the stack; each node's closure adds into its
// parents' grad buffers, which makes shared subexpressions accumulate.
template <class T>
inline void backward(Tensor<T>& root) {
  if (root.numel() != 1) throw ShapeError("backward needs a scalar root");
  if (!root.requires_grad) return;
  (*root.grad)[0] += T(1);
  if (!root.node) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  struct Frame {
    Node<T>* n;
    std::size_t next;
  };
  std::vector<Frame> stack;
  seen.insert(root.node.get());
  stack.push_back({root.node.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node<T>* c = f.n->parents[f.next++].node.get();
      if (c && !seen.count(c)) {
        seen.insert(c);
        stack.push_back({c, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) (*it)->run();
}

}  // namespace hoikit
