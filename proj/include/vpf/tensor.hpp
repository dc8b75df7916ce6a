#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vpf/common.hpp"

namespace vpf::ad {

// Minimal dense tensor with reverse-mode autodiff. Double precision
// throughout; broadcasting is limited to a trailing-suffix match (a leading
// batch dimension on the left operand), anything else needs an explicit
// reshape.
//
// Recording: ops record onto the thread-local active Tape (RAII scope).
// Tensors without requires_grad and without upstream graph flow through as
// constants at zero tape cost. With no active tape, ops are pure evaluation.

using Shape = std::vector<int>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  // leaf with gradient accumulation (model parameters, grad-check inputs)
  static Tensor param(Shape shape, std::vector<double> data);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int ndim() const { return int(shape_.size()); }
  int dim(int i) const { return shape_[i]; }
  int64_t size() const { return data_ ? int64_t(data_->size()) : 0; }

  const std::vector<double>& values() const { return *data_; }
  std::vector<double>& raw() { return *data_; }  // init / optimizer access
  double scalar() const;

  bool requires_grad() const { return grad_ != nullptr; }
  const std::vector<double>& grad() const;
  std::vector<double>& grad_mut() { return *grad_; }
  void zero_grad();

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  std::shared_ptr<std::vector<double>> grad_;  // only for requires_grad leaves
  // per-tape leaf registration cache
  mutable int node_ = -1;
  mutable uint64_t epoch_ = 0;
};

class Tape {
 public:
  // dropout draws from the tape's RNG stream, so a (seed, graph) pair fully
  // determines the masks
  explicit Tape(uint64_t rng_seed = 0);
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  // Reverse sweep from a scalar loss. Gradients of every requires_grad leaf
  // used in the graph are accumulated (+=) into the leaf's grad storage;
  // unused leaves keep whatever is there (zeros after zero_grad).
  void backward(const Tensor& loss);

  Rng& rng() { return rng_; }
  size_t node_count() const { return nodes_.size(); }

  // --- recording interface used by the ops ---
  using BackwardFn = std::function<void(Tape&, const std::vector<double>&)>;
  // node id of t on this tape: registers a leaf for requires_grad tensors,
  // returns -1 for untracked constants
  int input_node(const Tensor& t);
  void emit(Tensor& out, std::vector<int> parents, BackwardFn fn);
  // parent gradient accumulation buffer (allocated zeroed on first touch)
  double* grad_buf(int node);

 private:
  struct NodeRec {
    int64_t count = 0;
    std::vector<double> grad;  // lazily allocated
    BackwardFn fn;             // empty for leaves
  };
  std::vector<NodeRec> nodes_;
  std::vector<std::pair<int, std::shared_ptr<std::vector<double>>>> leaves_;
  Rng rng_;
  Tape* prev_ = nullptr;
  uint64_t epoch_ = 0;
};

// Suspends recording (finite-difference evaluations, inference helpers).
struct NoTapeScope {
  NoTapeScope();
  ~NoTapeScope();
  Tape* saved;
};

// ---- primitive operations ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);   // suffix broadcast on b
Tensor sub(const Tensor& a, const Tensor& b);   // suffix broadcast on b
Tensor mul(const Tensor& a, const Tensor& b);   // elementwise, suffix broadcast
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int start, int length);
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x, const std::vector<int>& perm);
Tensor transpose2d(const Tensor& x);
Tensor softmax(const Tensor& x);              // last axis
Tensor layer_norm(const Tensor& x, double eps = 1e-5);  // last axis, no affine
Tensor gelu(const Tensor& x);                 // exact erf form
Tensor dropout(const Tensor& x, double rate, bool train);
Tensor scalar_mul(const Tensor& x, double c);
Tensor reduce_mean(const Tensor& x);          // -> shape {1}
Tensor reduce_sum(const Tensor& x);           // -> shape {1}
Tensor sqrt_op(const Tensor& x);              // d/dx at 0 defined as 0
Tensor gather_rows(const Tensor& table, const std::vector<int>& rows);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- gradient checking ----

struct GradCheckResult {
  bool pass = true;
  double max_rel_err = 0.0;
  int64_t checked = 0;
  std::string worst;  // "leafIdx[elem]" of the worst element
};

// Central finite differences against the tape gradient for every element of
// every leaf. `f` is evaluated under a fresh Tape seeded with dropout_seed on
// each call, so stochastic ops see identical masks. Relative error uses
// |a - b| / (|a| + |b| + 1e-3), which keeps the FD truncation noise of tiny
// gradients from registering as failures.
GradCheckResult grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor*>& leaves, double step,
                           double tol, uint64_t dropout_seed = 0);

}  // namespace vpf::ad
