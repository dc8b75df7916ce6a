#include "vpf/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "vpf/kernels.hpp"

namespace vpf::ad {

namespace {

thread_local Tape* t_current = nullptr;
std::atomic<uint64_t> g_epoch{1};

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw ValidationError(std::string(op) + ": " + detail);
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) shape_error(op, detail);
}

}  // namespace

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << '(';
  for (size_t i = 0; i < s.size(); ++i) out << (i ? "," : "") << s[i];
  out << ')';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (int d : shape_)
    if (d <= 0) throw ValidationError("Tensor: dimensions must be positive");
  data_ = std::make_shared<std::vector<double>>(numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  for (int d : shape_)
    if (d <= 0) throw ValidationError("Tensor: dimensions must be positive");
  if (int64_t(data.size()) != numel(shape_))
    throw ValidationError("Tensor: data length does not match shape " + shape_str(shape_));
  data_ = std::make_shared<std::vector<double>>(std::move(data));
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  t.grad_ = std::make_shared<std::vector<double>>(t.size(), 0.0);
  return t;
}

double Tensor::scalar() const {
  if (size() != 1) throw ValidationError("Tensor::scalar: tensor is not a scalar");
  return (*data_)[0];
}

const std::vector<double>& Tensor::grad() const {
  if (!grad_) throw ValidationError("Tensor::grad: tensor does not require grad");
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

Tape::Tape(uint64_t rng_seed) : rng_(rng_seed), epoch_(g_epoch.fetch_add(1)) {
  prev_ = t_current;
  t_current = this;
}

Tape::~Tape() { t_current = prev_; }

Tape* Tape::current() { return t_current; }

int Tape::input_node(const Tensor& t) {
  if (t.epoch_ == epoch_ && t.node_ >= 0) return t.node_;
  if (!t.requires_grad()) return -1;
  const int id = int(nodes_.size());
  nodes_.push_back(NodeRec{t.size(), {}, {}});
  leaves_.push_back({id, t.grad_});
  t.node_ = id;
  t.epoch_ = epoch_;
  return id;
}

void Tape::emit(Tensor& out, std::vector<int> parents, BackwardFn fn) {
  bool tracked = false;
  for (int p : parents)
    if (p >= 0) tracked = true;
  if (!tracked) return;
  const int id = int(nodes_.size());
  nodes_.push_back(NodeRec{out.size(), {}, std::move(fn)});
  out.node_ = id;
  out.epoch_ = epoch_;
}

double* Tape::grad_buf(int node) {
  NodeRec& n = nodes_[node];
  if (n.grad.empty()) n.grad.assign(size_t(n.count), 0.0);
  return n.grad.data();
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) throw ValidationError("backward: loss must be a scalar");
  if (loss.epoch_ != epoch_ || loss.node_ < 0)
    throw ValidationError("backward: loss was not recorded on this tape");
  grad_buf(loss.node_)[0] += 1.0;
  for (int id = loss.node_; id >= 0; --id) {
    NodeRec& n = nodes_[id];
    if (n.grad.empty() || !n.fn) continue;
    n.fn(*this, n.grad);
  }
  for (auto& [id, store] : leaves_) {
    NodeRec& n = nodes_[id];
    if (n.grad.empty()) continue;
    kernels::ops().axpy(int(n.count), 1.0, n.grad.data(), store->data());
  }
}

NoTapeScope::NoTapeScope() : saved(t_current) { t_current = nullptr; }
NoTapeScope::~NoTapeScope() { t_current = saved; }

// ---- op helpers ----

namespace {

struct Rec {
  Tape* tape = nullptr;
  int a = -1, b = -1;
};

Rec begin_rec(const Tensor& a) {
  Rec r;
  r.tape = Tape::current();
  if (r.tape) r.a = r.tape->input_node(a);
  return r;
}

Rec begin_rec(const Tensor& a, const Tensor& b) {
  Rec r;
  r.tape = Tape::current();
  if (r.tape) {
    r.a = r.tape->input_node(a);
    r.b = r.tape->input_node(b);
  }
  return r;
}

bool suffix_match(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.begin(), b.end(), a.end() - b.size());
}

// data pointers are captured as shared_ptr copies inside closures via the
// tensors themselves (cheap: shared data)

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& ops = kernels::ops();
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require(a.defined() && b.defined(), "matmul", "undefined operand");

  auto do_backward_2d = [](Tape& tp, const std::vector<double>& g, int na, int nb,
                           const Tensor& a_, const Tensor& b_, int m, int n, int k) {
    const auto& o = kernels::ops();
    if (na >= 0) o.gemm_nt(m, k, n, g.data(), b_.values().data(), tp.grad_buf(na), true);
    if (nb >= 0) o.gemm_tn(k, n, m, a_.values().data(), g.data(), tp.grad_buf(nb), true);
  };

  if (sa.size() == 2 && sb.size() == 2) {
    require(sa[1] == sb[0], "matmul",
            "inner dimensions differ: " + shape_str(sa) + " x " + shape_str(sb));
    const int m = sa[0], k = sa[1], n = sb[1];
    Tensor out(Shape{m, n});
    ops.gemm_nn(m, n, k, a.values().data(), b.values().data(), out.raw().data(), false);
    Rec r = begin_rec(a, b);
    if (r.tape) {
      Tensor ac = a, bc = b;
      r.tape->emit(out, {r.a, r.b},
                   [=](Tape& tp, const std::vector<double>& g) {
                     do_backward_2d(tp, g, r.a, r.b, ac, bc, m, n, k);
                   });
    }
    return out;
  }

  if (sa.size() == 3 && sb.size() == 2) {
    require(sa[2] == sb[0], "matmul",
            "inner dimensions differ: " + shape_str(sa) + " x " + shape_str(sb));
    const int bsz = sa[0], m = sa[1], k = sa[2], n = sb[1];
    Tensor out(Shape{bsz, m, n});
    ops.gemm_nn(bsz * m, n, k, a.values().data(), b.values().data(), out.raw().data(), false);
    Rec r = begin_rec(a, b);
    if (r.tape) {
      Tensor ac = a, bc = b;
      r.tape->emit(out, {r.a, r.b},
                   [=](Tape& tp, const std::vector<double>& g) {
                     do_backward_2d(tp, g, r.a, r.b, ac, bc, bsz * m, n, k);
                   });
    }
    return out;
  }

  if (sa.size() == 2 && sb.size() == 3) {
    require(sa[1] == sb[1], "matmul",
            "inner dimensions differ: " + shape_str(sa) + " x " + shape_str(sb));
    const int bsz = sb[0], m = sa[0], k = sa[1], n = sb[2];
    Tensor out(Shape{bsz, m, n});
    for (int i = 0; i < bsz; ++i)
      ops.gemm_nn(m, n, k, a.values().data(), b.values().data() + int64_t(i) * k * n,
                  out.raw().data() + int64_t(i) * m * n, false);
    Rec r = begin_rec(a, b);
    if (r.tape) {
      Tensor ac = a, bc = b;
      r.tape->emit(out, {r.a, r.b}, [=](Tape& tp, const std::vector<double>& g) {
        const auto& o = kernels::ops();
        for (int i = 0; i < bsz; ++i) {
          const double* gi = g.data() + int64_t(i) * m * n;
          if (r.a >= 0)
            o.gemm_nt(m, k, n, gi, bc.values().data() + int64_t(i) * k * n,
                      tp.grad_buf(r.a), true);
          if (r.b >= 0)
            o.gemm_tn(k, n, m, ac.values().data(), gi,
                      tp.grad_buf(r.b) + int64_t(i) * k * n, true);
        }
      });
    }
    return out;
  }

  if (sa.size() == 3 && sb.size() == 3) {
    require(sa[0] == sb[0] && sa[2] == sb[1], "matmul",
            "batched shapes incompatible: " + shape_str(sa) + " x " + shape_str(sb));
    const int bsz = sa[0], m = sa[1], k = sa[2], n = sb[2];
    Tensor out(Shape{bsz, m, n});
    for (int i = 0; i < bsz; ++i)
      ops.gemm_nn(m, n, k, a.values().data() + int64_t(i) * m * k,
                  b.values().data() + int64_t(i) * k * n,
                  out.raw().data() + int64_t(i) * m * n, false);
    Rec r = begin_rec(a, b);
    if (r.tape) {
      Tensor ac = a, bc = b;
      r.tape->emit(out, {r.a, r.b}, [=](Tape& tp, const std::vector<double>& g) {
        const auto& o = kernels::ops();
        for (int i = 0; i < bsz; ++i) {
          const double* gi = g.data() + int64_t(i) * m * n;
          if (r.a >= 0)
            o.gemm_nt(m, k, n, gi, bc.values().data() + int64_t(i) * k * n,
                      tp.grad_buf(r.a) + int64_t(i) * m * k, true);
          if (r.b >= 0)
            o.gemm_tn(k, n, m, ac.values().data() + int64_t(i) * m * k, gi,
                      tp.grad_buf(r.b) + int64_t(i) * k * n, true);
        }
      });
    }
    return out;
  }

  shape_error("matmul", "unsupported ranks " + shape_str(sa) + " x " + shape_str(sb));
}

namespace {

enum class EwKind { add, sub, mul };

Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind, const char* name) {
  require(a.defined() && b.defined(), name, "undefined operand");
  require(suffix_match(a.shape(), b.shape()), name,
          "shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const auto& ops = kernels::ops();
  const int64_t bn = b.size();
  const int64_t reps = a.size() / bn;
  Tensor out(a.shape());
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.raw().data();
  for (int64_t r = 0; r < reps; ++r) {
    const double* block = pa + r * bn;
    double* ob = po + r * bn;
    switch (kind) {
      case EwKind::add: ops.add(int(bn), block, pb, ob); break;
      case EwKind::sub: ops.sub(int(bn), block, pb, ob); break;
      case EwKind::mul: ops.mul(int(bn), block, pb, ob); break;
    }
  }
  Rec r = begin_rec(a, b);
  if (r.tape) {
    Tensor ac = a, bc = b;
    r.tape->emit(out, {r.a, r.b}, [=](Tape& tp, const std::vector<double>& g) {
      const auto& o = kernels::ops();
      if (r.a >= 0) {
        double* ga = tp.grad_buf(r.a);
        if (kind == EwKind::mul) {
          for (int64_t rep = 0; rep < reps; ++rep)
            for (int64_t i = 0; i < bn; ++i)
              ga[rep * bn + i] += g[rep * bn + i] * bc.values()[i];
        } else {
          o.axpy(int(g.size()), 1.0, g.data(), ga);
        }
      }
      if (r.b >= 0) {
        double* gb = tp.grad_buf(r.b);
        for (int64_t rep = 0; rep < reps; ++rep) {
          const double* gblk = g.data() + rep * bn;
          switch (kind) {
            case EwKind::add: o.axpy(int(bn), 1.0, gblk, gb); break;
            case EwKind::sub: o.axpy(int(bn), -1.0, gblk, gb); break;
            case EwKind::mul: {
              const double* ablk = ac.values().data() + rep * bn;
              for (int64_t i = 0; i < bn; ++i) gb[i] += gblk[i] * ablk[i];
              break;
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::mul, "mul"); }

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "concat", "no inputs");
  const Shape& s0 = parts[0].shape();
  require(axis >= 0 && axis < int(s0.size()), "concat", "axis out of range");
  int axis_total = 0;
  for (const auto& p : parts) {
    require(p.ndim() == int(s0.size()), "concat", "rank mismatch");
    for (int d = 0; d < p.ndim(); ++d)
      if (d != axis)
        require(p.dim(d) == s0[d], "concat", "non-axis dimension mismatch");
    axis_total += p.dim(axis);
  }
  Shape out_shape = s0;
  out_shape[axis] = axis_total;

  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= s0[d];
  for (int d = axis + 1; d < int(s0.size()); ++d) inner *= s0[d];

  Tensor out(out_shape);
  double* po = out.raw().data();
  const int64_t out_row = int64_t(axis_total) * inner;
  int64_t offset = 0;
  for (const auto& p : parts) {
    const int64_t prow = int64_t(p.dim(axis)) * inner;
    const double* pp = p.values().data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(pp + o * prow, pp + (o + 1) * prow, po + o * out_row + offset);
    offset += prow;
  }

  Tape* tape = Tape::current();
  if (tape) {
    std::vector<int> nodes(parts.size());
    bool tracked = false;
    for (size_t i = 0; i < parts.size(); ++i) {
      nodes[i] = tape->input_node(parts[i]);
      tracked |= nodes[i] >= 0;
    }
    if (tracked) {
      std::vector<int64_t> prows(parts.size());
      for (size_t i = 0; i < parts.size(); ++i)
        prows[i] = int64_t(parts[i].dim(axis)) * inner;
      tape->emit(out, nodes, [=](Tape& tp, const std::vector<double>& g) {
        int64_t off = 0;
        for (size_t i = 0; i < nodes.size(); ++i) {
          if (nodes[i] >= 0) {
            double* gp = tp.grad_buf(nodes[i]);
            for (int64_t o = 0; o < outer; ++o)
              kernels::ops().axpy(int(prows[i]), 1.0, g.data() + o * out_row + off,
                                  gp + o * prows[i]);
          }
          off += prows[i];
        }
      });
    }
  }
  return out;
}

Tensor slice(const Tensor& x, int axis, int start, int length) {
  const Shape& s = x.shape();
  require(axis >= 0 && axis < int(s.size()), "slice", "axis out of range");
  require(start >= 0 && length >= 1 && start + length <= s[axis], "slice",
          "range out of bounds");
  Shape out_shape = s;
  out_shape[axis] = length;

  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= s[d];
  for (int d = axis + 1; d < int(s.size()); ++d) inner *= s[d];
  const int64_t in_row = int64_t(s[axis]) * inner;
  const int64_t out_row = int64_t(length) * inner;

  Tensor out(out_shape);
  const double* px = x.values().data();
  double* po = out.raw().data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(px + o * in_row + int64_t(start) * inner,
              px + o * in_row + int64_t(start + length) * inner, po + o * out_row);

  Rec r = begin_rec(x);
  if (r.tape && r.a >= 0) {
    r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
      double* gx = tp.grad_buf(r.a);
      for (int64_t o = 0; o < outer; ++o)
        kernels::ops().axpy(int(out_row), 1.0, g.data() + o * out_row,
                            gx + o * in_row + int64_t(start) * inner);
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(numel(shape) == x.size(), "reshape",
          "element count mismatch: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Tensor out(std::move(shape), x.values());
  Rec r = begin_rec(x);
  if (r.tape && r.a >= 0) {
    r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
      kernels::ops().axpy(int(g.size()), 1.0, g.data(), tp.grad_buf(r.a));
    });
  }
  return out;
}

namespace {

void permute_into(const Shape& in_shape, const std::vector<int>& perm,
                  const double* src, double* dst, bool accumulate) {
  const int nd = int(in_shape.size());
  std::vector<int64_t> in_stride(nd, 1);
  for (int d = nd - 2; d >= 0; --d) in_stride[d] = in_stride[d + 1] * in_shape[d + 1];
  Shape out_shape(nd);
  for (int d = 0; d < nd; ++d) out_shape[d] = in_shape[perm[d]];
  std::vector<int64_t> out_stride(nd, 1);
  for (int d = nd - 2; d >= 0; --d) out_stride[d] = out_stride[d + 1] * out_shape[d + 1];
  // out index o corresponds to in index with digit d at perm[d]
  const int64_t n = numel(in_shape);
  std::vector<int64_t> map(nd);  // out-digit -> in stride
  for (int d = 0; d < nd; ++d) map[d] = in_stride[perm[d]];
  for (int64_t o = 0; o < n; ++o) {
    int64_t rem = o, src_off = 0;
    for (int d = 0; d < nd; ++d) {
      const int64_t digit = rem / out_stride[d];
      rem -= digit * out_stride[d];
      src_off += digit * map[d];
    }
    if (accumulate)
      dst[src_off] += src[o];
    else
      dst[o] = src[src_off];
  }
}

}  // namespace

Tensor transpose(const Tensor& x, const std::vector<int>& perm) {
  const Shape& s = x.shape();
  require(perm.size() == s.size(), "transpose", "perm rank mismatch");
  std::vector<bool> seen(s.size(), false);
  for (int p : perm) {
    require(p >= 0 && p < int(s.size()) && !seen[p], "transpose", "invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(s.size());
  for (size_t d = 0; d < s.size(); ++d) out_shape[d] = s[perm[d]];
  Tensor out(out_shape);
  permute_into(s, perm, x.values().data(), out.raw().data(), false);

  Rec r = begin_rec(x);
  if (r.tape && r.a >= 0) {
    Shape in_shape = s;
    std::vector<int> perm_copy = perm;
    r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
      // scatter the output gradient back through the same index map
      permute_into(in_shape, perm_copy, g.data(), tp.grad_buf(r.a), true);
    });
  }
  return out;
}

Tensor transpose2d(const Tensor& x) {
  require(x.ndim() == 2, "transpose2d", "expects a rank-2 tensor");
  return transpose(x, {1, 0});
}

Tensor softmax(const Tensor& x) {
  require(x.ndim() >= 1, "softmax", "needs at least one axis");
  const int cols = x.dim(x.ndim() - 1);
  const int64_t rows = x.size() / cols;
  Tensor out(x.shape());
  const double* px = x.values().data();
  double* po = out.raw().data();
  for (int64_t r0 = 0; r0 < rows; ++r0) {
    const double* row = px + r0 * cols;
    double* orow = po + r0 * cols;
    const double m = kernels::ops().max(cols, row);
    double s = 0.0;
    for (int i = 0; i < cols; ++i) {
      orow[i] = std::exp(row[i] - m);
      s += orow[i];
    }
    const double inv = 1.0 / s;
    for (int i = 0; i < cols; ++i) orow[i] *= inv;
  }
  Rec r = begin_rec(x);
  if (r.tape && r.a >= 0) {
    Tensor yc = out;
    r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
      double* gx = tp.grad_buf(r.a);
      const double* y = yc.values().data();
      for (int64_t r0 = 0; r0 < rows; ++r0) {
        const double* yrow = y + r0 * cols;
        const double* grow = g.data() + r0 * cols;
        const double dot = kernels::ops().dot(cols, grow, yrow);
        double* gxr = gx + r0 * cols;
        for (int i = 0; i < cols; ++i) gxr[i] += yrow[i] * (grow[i] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, double eps) {
  require(x.ndim() >= 1, "layer_norm", "needs at least one axis");
  const int cols = x.dim(x.ndim() - 1);
  const int64_t rows = x.size() / cols;
  Tensor out(x.shape());
  std::vector<double> inv_sigma(rows);
  const double* px = x.values().data();
  double* po = out.raw().data();
  for (int64_t r0 = 0; r0 < rows; ++r0) {
    const double* row = px + r0 * cols;
    double* orow = po + r0 * cols;
    const double mu = kernels::ops().sum(cols, row) / cols;
    double var = 0.0;
    for (int i = 0; i < cols; ++i) {
      const double d = row[i] - mu;
      var += d * d;
    }
    var /= cols;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_sigma[r0] = inv;
    for (int i = 0; i < cols; ++i) orow[i] = (row[i] - mu) * inv;
  }
  Rec r = begin_rec(x);
  if (r.tape && r.a >= 0) {
    Tensor yc = out;
    r.tape->emit(out, {r.a}, [=, inv = std::move(inv_sigma)](
                                 Tape& tp, const std::vector<double>& g) {
      double* gx = tp.grad_buf(r.a);
      const double* y = yc.values().data();
      for (int64_t r0 = 0; r0 < rows; ++r0) {
        const double* yrow = y + r0 * cols;
        const double* grow = g.data() + r0 * cols;
        double gmean = 0.0, gymean = 0.0;
        for (int i = 0; i < cols; ++i) {
          gmean += grow[i];
          gymean += grow[i] * yrow[i];
        }
        gmean /= cols;
        gymean /= cols;
        double* gxr = gx + r0 * cols;
        for (int i = 0; i < cols; ++i)
          gxr[i] += inv[r0] * (grow[i] - gmean - yrow[i] * gymean);
      }
    });
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  const double* px = x.values().data();
  double* po = out.raw().data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i)
    po[i] = 0.5 * px[i] * (1.0 + std::erf(px[i] * M_SQRT1_2));
  Rec r = begin_rec(x);
  if (r.tape && r.a >= 0) {
    Tensor xc = x;
    r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
      double* gx = tp.grad_buf(r.a);
      const double* xv = xc.values().data();
      constexpr double inv_sqrt_2pi = 0.3989422804014327;
      for (int64_t i = 0; i < n; ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(xv[i] * M_SQRT1_2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xv[i] * xv[i]);
        gx[i] += g[i] * (cdf + xv[i] * pdf);
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, bool train) {
  require(rate >= 0.0 && rate < 1.0, "dropout", "rate must be in [0, 1)");
  if (!train || rate == 0.0) {
    // identity; still recorded so gradients flow through
    Tensor out(x.shape(), x.values());
    Rec r = begin_rec(x);
    if (r.tape && r.a >= 0) {
      r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
        kernels::ops().axpy(int(g.size()), 1.0, g.data(), tp.grad_buf(r.a));
      });
    }
    return out;
  }
  Tape* tape = Tape::current();
  require(tape != nullptr, "dropout", "training-mode dropout needs an active tape for its RNG");
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;  // inverted scaling: inference needs none
  const int64_t n = x.size();
  auto mask = std::make_shared<std::vector<double>>(n);
  for (int64_t i = 0; i < n; ++i)
    (*mask)[i] = tape->rng().uniform() >= rate ? scale : 0.0;
  Tensor out(x.shape());
  kernels::ops().mul(int(n), x.values().data(), mask->data(), out.raw().data());
  Rec r = begin_rec(x);
  if (r.a >= 0) {
    r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
      double* gx = tp.grad_buf(r.a);
      for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * (*mask)[i];
    });
  }
  return out;
}

Tensor scalar_mul(const Tensor& x, double c) {
  Tensor out(x.shape());
  kernels::ops().scale(int(x.size()), c, x.values().data(), out.raw().data());
  Rec r = begin_rec(x);
  if (r.tape && r.a >= 0) {
    r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
      kernels::ops().axpy(int(g.size()), c, g.data(), tp.grad_buf(r.a));
    });
  }
  return out;
}

namespace {

Tensor reduce_impl(const Tensor& x, bool mean) {
  const int64_t n = x.size();
  const double scale = mean ? 1.0 / double(n) : 1.0;
  Tensor out(Shape{1});
  out.raw()[0] = kernels::ops().sum(int(n), x.values().data()) * scale;
  Rec r = begin_rec(x);
  if (r.tape && r.a >= 0) {
    r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
      double* gx = tp.grad_buf(r.a);
      const double gv = g[0] * scale;
      for (int64_t i = 0; i < n; ++i) gx[i] += gv;
    });
  }
  return out;
}

}  // namespace

Tensor reduce_mean(const Tensor& x) { return reduce_impl(x, true); }
Tensor reduce_sum(const Tensor& x) { return reduce_impl(x, false); }

Tensor sqrt_op(const Tensor& x) {
  Tensor out(x.shape());
  const double* px = x.values().data();
  double* po = out.raw().data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) {
    require(px[i] >= 0.0, "sqrt", "negative input");
    po[i] = std::sqrt(px[i]);
  }
  Rec r = begin_rec(x);
  if (r.tape && r.a >= 0) {
    Tensor yc = out;
    r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
      double* gx = tp.grad_buf(r.a);
      const double* y = yc.values().data();
      for (int64_t i = 0; i < n; ++i)
        if (y[i] > 0.0) gx[i] += g[i] * 0.5 / y[i];  // subgradient 0 at x = 0
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& rows) {
  require(table.ndim() == 2, "gather_rows", "table must be rank 2");
  const int n_rows = table.dim(0), width = table.dim(1);
  for (int idx : rows)
    require(idx >= 0 && idx < n_rows, "gather_rows", "row index out of range");
  Tensor out(Shape{int(rows.size()), width});
  const double* pt = table.values().data();
  double* po = out.raw().data();
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy(pt + int64_t(rows[i]) * width, pt + int64_t(rows[i] + 1) * width,
              po + int64_t(i) * width);
  Rec r = begin_rec(table);
  if (r.tape && r.a >= 0) {
    std::vector<int> rows_copy = rows;
    r.tape->emit(out, {r.a}, [=](Tape& tp, const std::vector<double>& g) {
      double* gt = tp.grad_buf(r.a);
      for (size_t i = 0; i < rows_copy.size(); ++i)
        kernels::ops().axpy(width, 1.0, g.data() + int64_t(i) * width,
                            gt + int64_t(rows_copy[i]) * width);
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

GradCheckResult grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor*>& leaves, double step,
                           double tol, uint64_t dropout_seed) {
  GradCheckResult result;
  for (Tensor* leaf : leaves) {
    if (!leaf->requires_grad())
      throw ValidationError("grad_check: all leaves must require grad");
    leaf->zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape(dropout_seed);
    Tensor y = f();
    if (y.size() != 1) throw ValidationError("grad_check: f must return a scalar");
    tape.backward(y);
  }
  for (Tensor* leaf : leaves) analytic.push_back(leaf->grad());

  auto eval = [&]() {
    Tape tape(dropout_seed);  // same mask stream for every evaluation
    return f().scalar();
  };

  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor* leaf = leaves[li];
    for (int64_t i = 0; i < leaf->size(); ++i) {
      const double saved = leaf->raw()[i];
      leaf->raw()[i] = saved + step;
      const double f1 = eval();
      leaf->raw()[i] = saved - step;
      const double f2 = eval();
      leaf->raw()[i] = saved;
      const double fd = (f1 - f2) / (2.0 * step);
      const double a = analytic[li][i];
      const double rel = std::abs(a - fd) / (std::abs(a) + std::abs(fd) + 1e-3);
      ++result.checked;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = "leaf" + std::to_string(li) + "[" + std::to_string(i) + "]";
      }
    }
  }
  result.pass = result.max_rel_err <= tol;
  return result;
}

}  // namespace vpf::ad
