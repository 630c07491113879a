#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every primitive as it executes. Values are computed eagerly;
// `Tape::backward` walks the record in reverse once and accumulates
// d(loss)/d(parameter) into the ParameterStore the parameters came from.
//
// Broadcasting: elementwise binary ops accept operands whose dimensions are
// either equal or 1 (row vectors against matrices, column vectors against
// matrices, scalars against anything).

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "edgemix/error.hpp"
#include "edgemix/matrix.hpp"
#include "edgemix/parameters.hpp"

namespace edgemix {

class Tape;

/// Handle to a recorded value.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }
  bool requires_grad() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Row-compressed constant sparse matrix, used for graph propagation.
struct SparseRows {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_start{0};
  std::vector<std::size_t> col;
  std::vector<double> weight;

  void push(std::size_t c, double w) {
    col.push_back(c);
    weight.push_back(w);
  }
  void end_row() {
    row_start.push_back(col.size());
    ++rows;
  }
};

class Tape {
 public:
  using BackFn = std::function<void(Tape&, const Matrix& out_grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), "constant", false, nullptr); }

  /// Leaf bound to a stored parameter. Repeated calls return the same leaf.
  Var parameter(ParameterStore& store, const std::string& name) {
    const std::size_t index = store.index_of(name);
    auto key = std::make_pair(&store, index);
    if (auto it = leaves_.find(key); it != leaves_.end()) return Var(this, it->second);
    Var v = push(store.at(index).value, "parameter", grad_enabled_, nullptr);
    nodes_[v.id_].store = &store;
    nodes_[v.id_].param_index = index;
    leaves_.emplace(key, v.id_);
    return v;
  }

  /// Records a computed value. Throws NumericError on any non-finite entry.
  Var push(Matrix value, const char* op, bool requires_grad, BackFn back) {
    if (consumed_) throw Error("Tape: record already consumed by backward");
    if (!value.all_finite()) throw NumericError(std::string("non-finite output in ") + op);
    Node n;
    n.value = std::move(value);
    n.op = op;
    n.requires_grad = requires_grad && grad_enabled_;
    if (n.requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  bool grad_enabled() const noexcept { return grad_enabled_; }
  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const char* op_name(std::size_t id) const { return nodes_[id].op; }

  /// Gradient accumulator of a node, allocated on first use.
  Matrix& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Backpropagates from a scalar loss, adding into each reached parameter's
  /// `grad`. Returns the number of recorded ops visited (each at most once).
  std::size_t backward(Var loss) {
    if (loss.tape_ != this) throw Error("Tape::backward: variable from another tape");
    if (consumed_) throw Error("Tape::backward: record already consumed");
    if (nodes_[loss.id_].value.size() != 1)
      throw ShapeError("Tape::backward: loss must be scalar, got " +
                       nodes_[loss.id_].value.shape());
    consumed_ = true;
    if (!nodes_[loss.id_].requires_grad) return 0;
    grad(loss.id_)[0] = 1.0;
    std::size_t visited = 0;
    for (std::size_t id = loss.id_ + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.back) {
        ++visited;
        Matrix g = std::move(n.grad);
        n.back(*this, g);
        n.grad = std::move(g);
      } else if (n.store != nullptr) {
        Matrix& target = n.store->at(n.param_index).grad;
        for (std::size_t i = 0; i < target.size(); ++i) target[i] += n.grad[i];
      }
    }
    return visited;
  }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    BackFn back;
    const char* op = "";
    bool requires_grad = false;
    ParameterStore* store = nullptr;
    std::size_t param_index = 0;
  };

  std::vector<Node> nodes_;
  std::map<std::pair<const ParameterStore*, std::size_t>, std::size_t> leaves_;
  bool grad_enabled_;
  bool consumed_ = false;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

inline ConstMap view(const Matrix& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}
inline MutMap view(Matrix& m) {
  return MutMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

inline Tape& same_tape(const Var& a, const Var& b) {
  if (!a.valid() || a.tape() != b.tape()) throw Error("operands recorded on different tapes");
  return *a.tape();
}

inline std::size_t broadcast_dim(std::size_t a, std::size_t b, const char* op) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw ShapeError(std::string(op) + ": incompatible dimensions " + std::to_string(a) + " and " +
                   std::to_string(b));
}

/// Sums a broadcast gradient back down to the operand's shape.
inline void reduce_into(Matrix& target, const Matrix& g, double scale = 1.0) {
  const std::size_t tr = target.rows(), tc = target.cols();
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c)
      target((tr == 1 ? 0 : r), (tc == 1 ? 0 : c)) += scale * g(r, c);
}

template <typename Fn, typename Dfn>
Var unary(const Var& a, const char* op, Fn f, Dfn dfdx) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return t.push(std::move(y), op, a.requires_grad(), [ia, dfdx](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * dfdx(x[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives

/// (m x k) * (k x n).
inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& w = b.value();
  if (x.cols() != w.rows())
    throw ShapeError("matmul: " + x.shape() + " * " + w.shape());
  Matrix y(x.rows(), w.cols());
  detail::view(y).noalias() = detail::view(x) * detail::view(w);
  const std::size_t ia = a.id(), ib = b.id();
  const bool ra = a.requires_grad(), rb = b.requires_grad();
  return t.push(std::move(y), "matmul", ra || rb, [ia, ib, ra, rb](Tape& t, const Matrix& g) {
    if (ra) detail::view(t.grad(ia)).noalias() += detail::view(g) * detail::view(t.value(ib)).transpose();
    if (rb) detail::view(t.grad(ib)).noalias() += detail::view(t.value(ia)).transpose() * detail::view(g);
  });
}

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& z = b.value();
  const std::size_t rows = detail::broadcast_dim(x.rows(), z.rows(), "add");
  const std::size_t cols = detail::broadcast_dim(x.cols(), z.cols(), "add");
  Matrix y(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      y(r, c) = x(x.rows() == 1 ? 0 : r, x.cols() == 1 ? 0 : c) +
                z(z.rows() == 1 ? 0 : r, z.cols() == 1 ? 0 : c);
  const std::size_t ia = a.id(), ib = b.id();
  const bool ra = a.requires_grad(), rb = b.requires_grad();
  return t.push(std::move(y), "add", ra || rb, [ia, ib, ra, rb](Tape& t, const Matrix& g) {
    if (ra) detail::reduce_into(t.grad(ia), g);
    if (rb) detail::reduce_into(t.grad(ib), g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& z = b.value();
  const std::size_t rows = detail::broadcast_dim(x.rows(), z.rows(), "sub");
  const std::size_t cols = detail::broadcast_dim(x.cols(), z.cols(), "sub");
  Matrix y(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      y(r, c) = x(x.rows() == 1 ? 0 : r, x.cols() == 1 ? 0 : c) -
                z(z.rows() == 1 ? 0 : r, z.cols() == 1 ? 0 : c);
  const std::size_t ia = a.id(), ib = b.id();
  const bool ra = a.requires_grad(), rb = b.requires_grad();
  return t.push(std::move(y), "sub", ra || rb, [ia, ib, ra, rb](Tape& t, const Matrix& g) {
    if (ra) detail::reduce_into(t.grad(ia), g);
    if (rb) detail::reduce_into(t.grad(ib), g, -1.0);
  });
}

/// Elementwise (Hadamard) product with broadcasting.
inline Var mul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& z = b.value();
  const std::size_t rows = detail::broadcast_dim(x.rows(), z.rows(), "mul");
  const std::size_t cols = detail::broadcast_dim(x.cols(), z.cols(), "mul");
  Matrix y(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      y(r, c) = x(x.rows() == 1 ? 0 : r, x.cols() == 1 ? 0 : c) *
                z(z.rows() == 1 ? 0 : r, z.cols() == 1 ? 0 : c);
  const std::size_t ia = a.id(), ib = b.id();
  const bool ra = a.requires_grad(), rb = b.requires_grad();
  return t.push(std::move(y), "mul", ra || rb, [ia, ib, ra, rb](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    const Matrix& z = t.value(ib);
    Matrix* gx = ra ? &t.grad(ia) : nullptr;
    Matrix* gz = rb ? &t.grad(ib) : nullptr;
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) {
        const std::size_t xr = x.rows() == 1 ? 0 : r, xc = x.cols() == 1 ? 0 : c;
        const std::size_t zr = z.rows() == 1 ? 0 : r, zc = z.cols() == 1 ? 0 : c;
        if (gx) (*gx)(xr, xc) += g(r, c) * z(zr, zc);
        if (gz) (*gz)(zr, zc) += g(r, c) * x(xr, xc);
      }
  });
}

inline Var scalar_mul(const Var& a, double s) {
  Tape& t = *a.tape();
  Matrix y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= s;
  const std::size_t ia = a.id();
  return t.push(std::move(y), "scalar_mul", a.requires_grad(), [ia, s](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

inline Var add_scalar(const Var& a, double s) {
  Tape& t = *a.tape();
  Matrix y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += s;
  const std::size_t ia = a.id();
  return t.push(std::move(y), "add_scalar", a.requires_grad(), [ia](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

/// Horizontal concatenation; all parts share the row count.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = *parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool any = false;
  for (const Var& p : parts) {
    detail::same_tape(parts.front(), p);
    if (p.rows() != rows) throw ShapeError("concat: row mismatch " + p.value().shape());
    cols += p.cols();
    any = any || p.requires_grad();
  }
  Matrix y(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) y(r, off + c) = v(r, c);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += v.cols();
  }
  return t.push(std::move(y), "concat", any, [ids, offsets](Tape& t, const Matrix& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Matrix& gp = t.grad(ids[k]);
      for (std::size_t r = 0; r < gp.rows(); ++r)
        for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, offsets[k] + c);
    }
  });
}

/// Rows [begin, end).
inline Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  const Matrix& x = a.value();
  if (begin > end || end > x.rows())
    throw ShapeError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") of " + x.shape());
  Matrix y(end - begin, x.cols());
  std::copy(x.data() + begin * x.cols(), x.data() + end * x.cols(), y.data());
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(y), "slice_rows", a.requires_grad(),
                        [ia, begin](Tape& t, const Matrix& g) {
                          Matrix& ga = t.grad(ia);
                          const std::size_t base = begin * ga.cols();
                          for (std::size_t i = 0; i < g.size(); ++i) ga[base + i] += g[i];
                        });
}

/// Column k as an (m x 1) matrix.
inline Var slice_col(const Var& a, std::size_t k) {
  const Matrix& x = a.value();
  if (k >= x.cols()) throw ShapeError("slice_col: column " + std::to_string(k) + " of " + x.shape());
  Matrix y(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) y(r, 0) = x(r, k);
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(y), "slice_col", a.requires_grad(),
                        [ia, k](Tape& t, const Matrix& g) {
                          Matrix& ga = t.grad(ia);
                          for (std::size_t r = 0; r < g.rows(); ++r) ga(r, k) += g(r, 0);
                        });
}

/// Constant sparse matrix times a recorded dense matrix.
inline Var spmm(std::shared_ptr<const SparseRows> s, const Var& a) {
  const Matrix& x = a.value();
  if (s->cols > x.rows())
    throw ShapeError("spmm: sparse columns " + std::to_string(s->cols) + " exceed rows of " +
                     x.shape());
  Matrix y(s->rows, x.cols());
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < s->rows; ++r) {
    double* out = y.data() + r * n;
    for (std::size_t e = s->row_start[r]; e < s->row_start[r + 1]; ++e) {
      const double w = s->weight[e];
      const double* in = x.data() + s->col[e] * n;
      for (std::size_t c = 0; c < n; ++c) out[c] += w * in[c];
    }
  }
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(y), "spmm", a.requires_grad(),
                        [s, ia, n](Tape& t, const Matrix& g) {
                          Matrix& ga = t.grad(ia);
                          for (std::size_t r = 0; r < s->rows; ++r) {
                            const double* gr = g.data() + r * n;
                            for (std::size_t e = s->row_start[r]; e < s->row_start[r + 1]; ++e) {
                              const double w = s->weight[e];
                              double* out = ga.data() + s->col[e] * n;
                              for (std::size_t c = 0; c < n; ++c) out[c] += w * gr[c];
                            }
                          }
                        });
}

/// max(x, 0); the subgradient at 0 is 0.
inline Var relu(const Var& a) {
  return detail::unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(const Var& a) {
  return detail::unary(a, "sigmoid", sigmoid_value, [](double x) {
    const double s = sigmoid_value(x);
    return s * (1.0 - s);
  });
}

/// log(sigmoid(x)) evaluated without cancellation.
inline Var log_sigmoid(const Var& a) {
  return detail::unary(
      a, "log_sigmoid",
      [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
      [](double x) { return sigmoid_value(-x); });
}

inline Var log(const Var& a) {
  return detail::unary(a, "log", [](double x) { return std::log(x); },
                       [](double x) { return 1.0 / x; });
}

inline Var exp(const Var& a) {
  return detail::unary(a, "exp", [](double x) { return std::exp(x); },
                       [](double x) { return std::exp(x); });
}

/// Clamps into [lo, hi]; gradient is zero outside the interval.
inline Var clamp(const Var& a, double lo, double hi) {
  return detail::unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

/// Row-wise softmax.
inline Var softmax(const Var& a) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row_span(r);
    auto out = y.row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) z += (out[c] = std::exp(in[c] - mx));
    for (double& v : out) v /= z;
  }
  const std::size_t ia = a.id();
  Tape& t = *a.tape();
  const std::size_t self = t.size();
  return t.push(std::move(y), "softmax", a.requires_grad(), [ia, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

/// Row-wise log-softmax.
inline Var log_softmax(const Var& a) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (double v : in) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < in.size(); ++c) y(r, c) = in[c] - lse;
  }
  const std::size_t ia = a.id();
  Tape& t = *a.tape();
  const std::size_t self = t.size();
  return t.push(std::move(y), "log_softmax", a.requires_grad(),
                [ia, self](Tape& t, const Matrix& g) {
                  const Matrix& y = t.value(self);
                  Matrix& ga = t.grad(ia);
                  for (std::size_t r = 0; r < y.rows(); ++r) {
                    double gs = 0.0;
                    for (std::size_t c = 0; c < y.cols(); ++c) gs += g(r, c);
                    for (std::size_t c = 0; c < y.cols(); ++c)
                      ga(r, c) += g(r, c) - std::exp(y(r, c)) * gs;
                  }
                });
}

/// Sum of all entries, as a scalar.
inline Var sum(const Var& a) {
  const Matrix& x = a.value();
  double s = 0.0;
  for (double v : x.values()) s += v;
  const std::size_t ia = a.id();
  return a.tape()->push(Matrix::scalar(s), "sum", a.requires_grad(),
                        [ia](Tape& t, const Matrix& g) {
                          Matrix& ga = t.grad(ia);
                          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
                        });
}

inline Var mean(const Var& a) {
  return scalar_mul(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

/// Sum of squared entries.
inline Var l2_norm_sq(const Var& a) {
  const Matrix& x = a.value();
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  const std::size_t ia = a.id();
  return a.tape()->push(Matrix::scalar(s), "l2_norm_sq", a.requires_grad(),
                        [ia](Tape& t, const Matrix& g) {
                          const Matrix& x = t.value(ia);
                          Matrix& ga = t.grad(ia);
                          for (std::size_t i = 0; i < x.size(); ++i) ga[i] += 2.0 * x[i] * g[0];
                        });
}

/// x W + b, with b a row vector.
inline Var affine(const Var& x, const Var& w, const Var& b) { return add(matmul(x, w), b); }

}  // namespace edgemix
