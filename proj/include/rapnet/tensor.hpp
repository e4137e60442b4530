#pragma once

// Dense row-major tensors recorded on a define-by-run tape for reverse-mode
// differentiation. Every differentiable operation the models use lives here.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rapnet {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Derived>
std::string shape_str(const Eigen::DenseBase<Derived>& m) {
  std::ostringstream os;
  os << '[' << m.rows() << 'x' << m.cols() << ']';
  return os.str();
}

/// A named learned matrix. `grad` is an accumulation buffer written by
/// BasicTape::backward, so scoring through a const model stays possible.
template <typename Scalar>
struct BasicParameter {
  std::string name;
  Matrix<Scalar> value;
  mutable Matrix<Scalar> grad;

  BasicParameter() = default;
  BasicParameter(std::string n, Index rows, Index cols)
      : name(std::move(n)),
        value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
  Index size() const { return value.size(); }
};

template <typename Scalar>
class BasicTape;

/// Handle to one node of a tape; cheap to copy.
template <typename Scalar>
class BasicVar {
 public:
  BasicVar() = default;
  BasicVar(BasicTape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  BasicTape<Scalar>& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  const Matrix<Scalar>& grad() const { return tape_->grad(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  Scalar item() const {
    if (rows() != 1 || cols() != 1) throw ShapeError("item: expected [1x1], got " + shape_str(value()));
    return value()(0, 0);
  }

 private:
  BasicTape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

template <typename Scalar>
class BasicTape {
 public:
  using Mat = Matrix<Scalar>;
  using Var = BasicVar<Scalar>;
  using Backward = std::function<void(BasicTape&, int self)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  Var constant(Mat value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, false, false, {}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  Var zeros(Index rows, Index cols) { return constant(Mat::Zero(rows, cols)); }

  /// Registers a parameter once per tape; repeated calls return the same node.
  Var parameter(const BasicParameter<Scalar>& p) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return Var(this, it->second);
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
    nodes_.push_back(Node{{}, {}, &p, true, false, {}});
    int id = static_cast<int>(nodes_.size()) - 1;
    param_ids_.emplace(&p, id);
    return Var(this, id);
  }

  /// Appends an op node. The backward closure runs only when some input needs
  /// gradients and an adjoint reached this node.
  Var record(Mat value, std::initializer_list<int> inputs, Backward backward) {
    bool needs = false;
    for (int in : inputs) needs = needs || nodes_[in].requires_grad;
    return push(std::move(value), needs, std::move(backward));
  }

  Var record(Mat value, std::span<const Var> inputs, Backward backward) {
    bool needs = false;
    for (const Var& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
    return push(std::move(value), needs, std::move(backward));
  }

  const Mat& value(int id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }

  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  /// Adjoint buffer of a node, zero-initialised on first access.
  Mat& grad(int id) {
    Node& n = nodes_[id];
    if (n.param) {
      n.touched = true;
      return n.param->grad;
    }
    if (!n.touched) {
      const Mat& v = n.value;
      n.grad.setZero(v.rows(), v.cols());
      n.touched = true;
    }
    return n.grad;
  }

  const Mat& grad(int id) const { return const_cast<BasicTape*>(this)->grad(id); }

  void backward(const Var& loss) {
    if (&loss.tape() != this) throw std::invalid_argument("backward: loss is not on this tape");
    const Mat& v = value(loss.id());
    if (v.rows() != 1 || v.cols() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(v));
    grad(loss.id())(0, 0) += Scalar(1);
    for (int i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.touched && n.backward) n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    param_ids_.clear();
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    const BasicParameter<Scalar>* param;
    bool requires_grad;
    bool touched;
    Backward backward;
  };

  Var push(Mat value, bool needs, Backward backward) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, needs, false, needs ? std::move(backward) : Backward{}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
  std::unordered_map<const BasicParameter<Scalar>*, int> param_ids_;
};

using Tape = BasicTape<double>;
using Var = BasicVar<double>;
using Parameter = BasicParameter<double>;
using MatrixXd = Matrix<double>;

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " + shape_str(b.value()));
}

template <typename Scalar>
void require_same_tape(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands recorded on different tapes");
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

/// a[m,k] * b[k,n]
template <typename Scalar>
BasicVar<Scalar> matmul(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::require_same_tape(a, b);
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner extents differ " + shape_str(a.value()) + " x " + shape_str(b.value()));
  Matrix<Scalar> out;
  out.noalias() = a.value() * b.value();
  int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
    if (t.requires_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

/// a[m,k] * b[n,k]^T; the row-vector convention for applying a weight matrix.
template <typename Scalar>
BasicVar<Scalar> matmul_nt(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::require_same_tape(a, b);
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: inner extents differ " + shape_str(a.value()) + " x " + shape_str(b.value()) + "^T");
  Matrix<Scalar> out;
  out.noalias() = a.value() * b.value().transpose();
  int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.value(ib);
    if (t.requires_grad(ib)) t.grad(ib).noalias() += g.transpose() * t.value(ia);
  });
}

template <typename Scalar>
BasicVar<Scalar> transpose(const BasicVar<Scalar>& a) {
  Matrix<Scalar> out = a.value().transpose();
  int ia = a.id();
  return a.tape().record(std::move(out), {ia},
                         [ia](BasicTape<Scalar>& t, int self) { t.grad(ia) += t.grad(self).transpose(); });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
BasicVar<Scalar> add(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("add", a, b);
  int ia = a.id(), ib = b.id();
  return a.tape().record(a.value() + b.value(), {ia, ib}, [ia, ib](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) += g;
  });
}

template <typename Scalar>
BasicVar<Scalar> sub(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("sub", a, b);
  int ia = a.id(), ib = b.id();
  return a.tape().record(a.value() - b.value(), {ia, ib}, [ia, ib](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) -= g;
  });
}

/// Hadamard product.
template <typename Scalar>
BasicVar<Scalar> mul(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("mul", a, b);
  int ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
    if (t.requires_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
  });
}

template <typename Scalar>
BasicVar<Scalar> scale(const BasicVar<Scalar>& a, Scalar s) {
  int ia = a.id();
  return a.tape().record(a.value() * s, {ia}, [ia, s](BasicTape<Scalar>& t, int self) { t.grad(ia) += t.grad(self) * s; });
}

/// a[n,m] + row[1,m] broadcast over rows.
template <typename Scalar>
BasicVar<Scalar> add_row(const BasicVar<Scalar>& a, const BasicVar<Scalar>& row) {
  detail::require_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_row: cannot broadcast " + shape_str(row.value()) + " over " + shape_str(a.value()));
  int ia = a.id(), ir = row.id();
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(out), {ia, ir}, [ia, ir](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ir)) t.grad(ir) += g.colwise().sum();
  });
}

template <typename Scalar>
BasicVar<Scalar> sigmoid(const BasicVar<Scalar>& a) {
  int ia = a.id();
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) { return detail::sigmoid(x); });
  return a.tape().record(std::move(out), {ia}, [ia](BasicTape<Scalar>& t, int self) {
    const auto& y = t.value(self);
    t.grad(ia).array() += t.grad(self).array() * y.array() * (Scalar(1) - y.array());
  });
}

template <typename Scalar>
BasicVar<Scalar> tanh(const BasicVar<Scalar>& a) {
  int ia = a.id();
  Matrix<Scalar> out = a.value().array().tanh().matrix();
  return a.tape().record(std::move(out), {ia}, [ia](BasicTape<Scalar>& t, int self) {
    const auto& y = t.value(self);
    t.grad(ia).array() += t.grad(self).array() * (Scalar(1) - y.array().square());
  });
}

/// Subgradient at exactly 0 is 0.
template <typename Scalar>
BasicVar<Scalar> relu(const BasicVar<Scalar>& a) {
  int ia = a.id();
  Matrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return a.tape().record(std::move(out), {ia}, [ia](BasicTape<Scalar>& t, int self) {
    const auto& x = t.value(ia);
    t.grad(ia).array() += (x.array() > Scalar(0)).select(t.grad(self).array(), Scalar(0));
  });
}

template <typename Scalar>
BasicVar<Scalar> operator+(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) { return add(a, b); }
template <typename Scalar>
BasicVar<Scalar> operator-(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) { return sub(a, b); }

// ---------------------------------------------------------------------------
// Normalisation and reductions

/// Row-wise softmax with max subtraction; a [1,n] input is a single vector.
template <typename Scalar>
BasicVar<Scalar> softmax_rows(const BasicVar<Scalar>& a) {
  if (a.cols() == 0 || a.rows() == 0) throw ShapeError("softmax: empty input " + shape_str(a.value()));
  const auto& x = a.value();
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    Scalar m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  int ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia](BasicTape<Scalar>& t, int self) {
    const auto& y = t.value(self);
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (Index r = 0; r < y.rows(); ++r) {
      Scalar dot = g.row(r).dot(y.row(r));
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

template <typename Scalar>
BasicVar<Scalar> softmax(const BasicVar<Scalar>& v) {
  if (v.rows() != 1) throw ShapeError("softmax: expected a row vector, got " + shape_str(v.value()));
  return softmax_rows(v);
}

/// Per-column maximum over rows [t,d] -> [1,d]; adjoint goes to the first argmax.
template <typename Scalar>
BasicVar<Scalar> max_over_positions(const BasicVar<Scalar>& rows) {
  const auto& x = rows.value();
  if (x.rows() == 0) throw ShapeError("max_over_positions: no positions in " + shape_str(x));
  Matrix<Scalar> out(1, x.cols());
  std::vector<Index> arg(static_cast<std::size_t>(x.cols()));
  for (Index c = 0; c < x.cols(); ++c) {
    Index best = 0;
    for (Index r = 1; r < x.rows(); ++r)
      if (x(r, c) > x(best, c)) best = r;
    arg[static_cast<std::size_t>(c)] = best;
    out(0, c) = x(best, c);
  }
  int ia = rows.id();
  return rows.tape().record(std::move(out), {ia}, [ia, arg = std::move(arg)](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (Index c = 0; c < g.cols(); ++c) ga(arg[static_cast<std::size_t>(c)], c) += g(0, c);
  });
}

/// Elementwise maximum over equally shaped tensors; ties go to the earliest.
template <typename Scalar>
BasicVar<Scalar> max_over(std::span<const BasicVar<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("max_over: no positions");
  for (const auto& p : parts) detail::require_same_shape("max_over", parts[0], p);
  Matrix<Scalar> out = parts[0].value();
  std::vector<int> src(static_cast<std::size_t>(out.size()), 0);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const auto& x = parts[k].value();
    for (Index i = 0; i < out.size(); ++i) {
      if (x.data()[i] > out.data()[i]) {
        out.data()[i] = x.data()[i];
        src[static_cast<std::size_t>(i)] = static_cast<int>(k);
      }
    }
  }
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (const auto& p : parts) ids.push_back(p.id());
  return parts[0].tape().record(
      std::move(out), parts, [ids = std::move(ids), src = std::move(src)](BasicTape<Scalar>& t, int self) {
        const auto& g = t.grad(self);
        for (Index i = 0; i < g.size(); ++i) {
          int from = ids[static_cast<std::size_t>(src[static_cast<std::size_t>(i)])];
          if (t.requires_grad(from)) t.grad(from).data()[i] += g.data()[i];
        }
      });
}

template <typename Scalar>
BasicVar<Scalar> max_over(const std::vector<BasicVar<Scalar>>& parts) {
  return max_over(std::span<const BasicVar<Scalar>>(parts));
}

/// Per-column mean over rows [t,d] -> [1,d].
template <typename Scalar>
BasicVar<Scalar> mean_over_positions(const BasicVar<Scalar>& rows) {
  const auto& x = rows.value();
  if (x.rows() == 0) throw ShapeError("mean_over_positions: no positions in " + shape_str(x));
  Matrix<Scalar> out = x.colwise().mean();
  int ia = rows.id();
  Scalar inv = Scalar(1) / static_cast<Scalar>(x.rows());
  return rows.tape().record(std::move(out), {ia}, [ia, inv](BasicTape<Scalar>& t, int self) {
    t.grad(ia).rowwise() += t.grad(self).row(0) * inv;
  });
}

template <typename Scalar>
BasicVar<Scalar> sum(const BasicVar<Scalar>& a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  int ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia](BasicTape<Scalar>& t, int self) {
    t.grad(ia).array() += t.grad(self)(0, 0);
  });
}

/// [n,m] -> [n,1]
template <typename Scalar>
BasicVar<Scalar> row_sum(const BasicVar<Scalar>& a) {
  Matrix<Scalar> out = a.value().rowwise().sum();
  int ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia](BasicTape<Scalar>& t, int self) {
    t.grad(ia).colwise() += t.grad(self).col(0);
  });
}

// ---------------------------------------------------------------------------
// Structural

template <typename Scalar>
BasicVar<Scalar> concat_cols(std::span<const BasicVar<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Index rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw ShapeError("concat_cols: row extents differ " + shape_str(parts[0].value()) + " vs " + shape_str(p.value()));
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<int, Index>> layout;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    layout.emplace_back(p.id(), at);
    at += p.cols();
  }
  return parts[0].tape().record(std::move(out), parts, [layout = std::move(layout)](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    for (const auto& [id, start] : layout)
      if (t.requires_grad(id)) t.grad(id) += g.middleCols(start, t.value(id).cols());
  });
}

template <typename Scalar>
BasicVar<Scalar> concat_cols(std::initializer_list<BasicVar<Scalar>> parts) {
  return concat_cols(std::span<const BasicVar<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
BasicVar<Scalar> concat_rows(std::span<const BasicVar<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Index cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw ShapeError("concat_rows: column extents differ " + shape_str(parts[0].value()) + " vs " + shape_str(p.value()));
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<int, Index>> layout;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    layout.emplace_back(p.id(), at);
    at += p.rows();
  }
  return parts[0].tape().record(std::move(out), parts, [layout = std::move(layout)](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    for (const auto& [id, start] : layout)
      if (t.requires_grad(id)) t.grad(id) += g.middleRows(start, t.value(id).rows());
  });
}

template <typename Scalar>
BasicVar<Scalar> concat_rows(std::initializer_list<BasicVar<Scalar>> parts) {
  return concat_rows(std::span<const BasicVar<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
BasicVar<Scalar> slice_cols(const BasicVar<Scalar>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + shape_str(a.value()));
  int ia = a.id();
  Matrix<Scalar> out = a.value().middleCols(start, count);
  return a.tape().record(std::move(out), {ia}, [ia, start, count](BasicTape<Scalar>& t, int self) {
    t.grad(ia).middleCols(start, count) += t.grad(self);
  });
}

template <typename Scalar>
BasicVar<Scalar> slice_rows(const BasicVar<Scalar>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + shape_str(a.value()));
  int ia = a.id();
  Matrix<Scalar> out = a.value().middleRows(start, count);
  return a.tape().record(std::move(out), {ia}, [ia, start, count](BasicTape<Scalar>& t, int self) {
    t.grad(ia).middleRows(start, count) += t.grad(self);
  });
}

/// Row lookup with scatter-add adjoint; also used as the embedding lookup.
template <typename Scalar>
BasicVar<Scalar> gather_rows(const BasicVar<Scalar>& table, std::span<const int> ids) {
  const auto& x = table.value();
  Matrix<Scalar> out(static_cast<Index>(ids.size()), x.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= x.rows())
      throw ShapeError("gather_rows: row " + std::to_string(ids[r]) + " out of range for " + shape_str(x));
    out.row(static_cast<Index>(r)) = x.row(ids[r]);
  }
  int ia = table.id();
  std::vector<int> idx(ids.begin(), ids.end());
  return table.tape().record(std::move(out), {ia}, [ia, idx = std::move(idx)](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t r = 0; r < idx.size(); ++r) ga.row(idx[r]) += g.row(static_cast<Index>(r));
  });
}

/// [1,m] -> [n,m]
template <typename Scalar>
BasicVar<Scalar> repeat_rows(const BasicVar<Scalar>& row, Index n) {
  if (row.rows() != 1) throw ShapeError("repeat_rows: expected a row vector, got " + shape_str(row.value()));
  Matrix<Scalar> out = row.value().replicate(n, 1);
  int ia = row.id();
  return row.tape().record(std::move(out), {ia}, [ia](BasicTape<Scalar>& t, int self) {
    t.grad(ia) += t.grad(self).colwise().sum();
  });
}

/// Interleaves B sequences of shape [T,d] into [T*B,d] with row t*B+b taken
/// from sequence b at step t, so one time step is a contiguous row block.
template <typename Scalar>
BasicVar<Scalar> stack_time_major(std::span<const BasicVar<Scalar>> seqs) {
  if (seqs.empty()) throw ShapeError("stack_time_major: no sequences");
  for (const auto& s : seqs) detail::require_same_shape("stack_time_major", seqs[0], s);
  const Index steps = seqs[0].rows(), batch = static_cast<Index>(seqs.size());
  Matrix<Scalar> out(steps * batch, seqs[0].cols());
  for (Index b = 0; b < batch; ++b) {
    const auto& x = seqs[static_cast<std::size_t>(b)].value();
    for (Index t = 0; t < steps; ++t) out.row(t * batch + b) = x.row(t);
  }
  std::vector<int> ids;
  for (const auto& s : seqs) ids.push_back(s.id());
  return seqs[0].tape().record(std::move(out), seqs, [ids = std::move(ids), steps](BasicTape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    const Index batch = static_cast<Index>(ids.size());
    for (Index b = 0; b < batch; ++b) {
      int id = ids[static_cast<std::size_t>(b)];
      if (!t.requires_grad(id)) continue;
      auto& gb = t.grad(id);
      for (Index s = 0; s < steps; ++s) gb.row(s) += g.row(s * batch + b);
    }
  });
}

// ---------------------------------------------------------------------------
// Losses

/// -sum_j [y_j log p_j + (1-y_j) log(1-p_j)] over a [k,1] column of
/// probabilities, with p clamped to [1e-7, 1-1e-7].
template <typename Scalar>
BasicVar<Scalar> binary_cross_entropy(const BasicVar<Scalar>& probs, std::span<const int> labels) {
  const auto& p = probs.value();
  if (p.cols() != 1 || p.rows() != static_cast<Index>(labels.size()) || labels.empty())
    throw ShapeError("binary_cross_entropy: " + shape_str(p) + " probabilities for " + std::to_string(labels.size()) +
                     " labels");
  constexpr Scalar lo = Scalar(1e-7), hi = Scalar(1) - Scalar(1e-7);
  Scalar loss = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] != 0 && labels[j] != 1) throw std::invalid_argument("binary_cross_entropy: labels must be 0 or 1");
    Scalar pj = std::clamp(p(static_cast<Index>(j), 0), lo, hi);
    loss -= labels[j] ? std::log(pj) : std::log(Scalar(1) - pj);
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = loss;
  int ip = probs.id();
  std::vector<int> y(labels.begin(), labels.end());
  return probs.tape().record(std::move(out), {ip}, [ip, y = std::move(y)](BasicTape<Scalar>& t, int self) {
    const Scalar g = t.grad(self)(0, 0);
    const auto& pv = t.value(ip);
    auto& gp = t.grad(ip);
    for (std::size_t j = 0; j < y.size(); ++j) {
      Scalar pj = pv(static_cast<Index>(j), 0);
      if (pj <= lo || pj >= hi) continue;
      gp(static_cast<Index>(j), 0) += g * (y[j] ? -Scalar(1) / pj : Scalar(1) / (Scalar(1) - pj));
    }
  });
}

// ---------------------------------------------------------------------------
// Initialisation

template <typename Scalar, typename Rng>
void uniform_init(BasicParameter<Scalar>& p, Rng& rng, Scalar lo, Scalar hi) {
  std::uniform_real_distribution<Scalar> dist(lo, hi);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
}

}  // namespace rapnet
