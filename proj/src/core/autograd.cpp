#include "core/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "core/errors.hpp"

namespace lapis {

template <typename T>
Var<T> Tape<T>::push(Node node) {
  if (consumed_) throw StateError("tape already swept by backward(); call reset() first");
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::parameter(Parameter<T>& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var<T>(this, it->second);
  Node n;
  n.value = p.value;
  n.requires_grad = grad_enabled_ && !p.frozen;
  n.sink = &p;
  Var<T> v = push(std::move(n));
  bound_.emplace(&p, v.id());
  return v;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var<T>>(inputs.begin(), inputs.size()),
                std::move(fn));
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::span<const Var<T>> inputs, BackwardFn fn) {
  bool needs = false;
  if (grad_enabled_) {
    for (const auto& v : inputs) {
      if (v.tape() != this) throw StateError("operands recorded on different tapes");
      needs = needs || nodes_[v.id()].requires_grad;
    }
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.fn = std::move(fn);
  return push(std::move(n));
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor<T>(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var<T> v) const {
  const Node& n = nodes_.at(v.id());
  if (!n.has_grad) throw StateError("node " + std::to_string(v.id()) + " has no gradient");
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape() != this) throw StateError("loss belongs to another tape");
  if (consumed_) throw StateError("backward() already run on this tape; call reset() first");
  if (loss.value().size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + shape_string(loss.shape()));
  }
  consumed_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id()).fill(T(1));
  for (std::int64_t id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.has_grad) continue;
    if (n.fn) n.fn(*this, static_cast<std::uint32_t>(id));
  }
  for (Node& n : nodes_) {
    if (n.sink && n.has_grad) {
      auto g = n.grad.values();
      auto dst = n.sink->grad.values();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  }
}

template <typename T>
void Tape<T>::reset() {
  nodes_.clear();
  bound_.clear();
  consumed_ = false;
}

template class Tape<float>;
template class Tape<double>;

namespace ad {
namespace {

template <typename T>
void require_rank2(const Var<T>& a, const char* op) {
  if (a.value().rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

enum class Bcast { same, a_scalar, b_scalar };

template <typename T>
Bcast broadcast_kind(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() == b.shape()) return Bcast::same;
  if (a.value().size() == 1) return Bcast::a_scalar;
  if (b.value().size() == 1) return Bcast::b_scalar;
  throw ShapeError(std::string(op) + ": incompatible broadcast between " +
                   shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

template <typename T, typename F>
Tensor<T> map_binary(const Tensor<T>& a, const Tensor<T>& b, Bcast kind, F f) {
  const Tensor<T>& big = kind == Bcast::a_scalar ? b : a;
  Tensor<T> out(big.shape());
  const std::size_t n = out.size();
  T* o = out.data();
  const T* pa = a.data();
  const T* pb = b.data();
  switch (kind) {
    case Bcast::same:
      for (std::size_t i = 0; i < n; ++i) o[i] = f(pa[i], pb[i]);
      break;
    case Bcast::a_scalar:
      for (std::size_t i = 0; i < n; ++i) o[i] = f(pa[0], pb[i]);
      break;
    case Bcast::b_scalar:
      for (std::size_t i = 0; i < n; ++i) o[i] = f(pa[i], pb[0]);
      break;
  }
  return out;
}

// Adds `g * scale_i` into the gradient of operand `id`, reducing when the
// operand was broadcast from a scalar.
template <typename T>
void accumulate(Tape<T>& tape, std::uint32_t id, bool reduced, std::span<const T> contrib) {
  if (!tape.requires_grad(id)) return;
  Tensor<T>& g = tape.grad_buffer(id);
  if (reduced) {
    T s = T(0);
    for (T v : contrib) s += v;
    g[0] += s;
  } else {
    T* gp = g.data();
    for (std::size_t i = 0; i < contrib.size(); ++i) gp[i] += contrib[i];
  }
}

template <typename T, typename F, typename D>
Var<T> unary(Var<T> a, F f, D dfdx_from_x_y) {
  const Tensor<T>& x = a.value();
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  const std::uint32_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, dfdx_from_x_y](Tape<T>& t, std::uint32_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor<T>& x = t.value(ia);
    const Tensor<T>& y = t.value(self);
    const Tensor<T>& g = t.grad_buffer(self);
    Tensor<T>& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * dfdx_from_x_y(x[i], y[i]);
  });
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw ShapeError("matmul: cannot multiply " + shape_string(av.shape()) + " by " +
                     shape_string(bv.shape()));
  }
  Tensor<T> out = lapis::matmul(av, bv);
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& A = t.value(ia);
    const Tensor<T>& B = t.value(ib);
    const Tensor<T>& G = t.grad_buffer(self);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    if (t.requires_grad(ia)) {
      std::vector<T> bt(k * n);
      kernel::transpose(k, n, B.data(), bt.data());
      kernel::gemm(m, n, k, G.data(), bt.data(), t.grad_buffer(ia).data(), true);
    }
    if (t.requires_grad(ib)) kernel::gemm_at_b(m, k, n, A.data(), G.data(), t.grad_buffer(ib).data());
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  const Bcast kind = broadcast_kind(a, b, "add");
  Tensor<T> out = map_binary(a.value(), b.value(), kind, [](T x, T y) { return x + y; });
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, kind](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    accumulate(t, ia, kind == Bcast::a_scalar, g.values());
    accumulate(t, ib, kind == Bcast::b_scalar, g.values());
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  const Bcast kind = broadcast_kind(a, b, "sub");
  Tensor<T> out = map_binary(a.value(), b.value(), kind, [](T x, T y) { return x - y; });
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, kind](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    accumulate(t, ia, kind == Bcast::a_scalar, g.values());
    if (t.requires_grad(ib)) {
      std::vector<T> neg(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
      accumulate(t, ib, kind == Bcast::b_scalar, std::span<const T>(neg));
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  const Bcast kind = broadcast_kind(a, b, "mul");
  Tensor<T> out = map_binary(a.value(), b.value(), kind, [](T x, T y) { return x * y; });
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, kind](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    const Tensor<T>& A = t.value(ia);
    const Tensor<T>& B = t.value(ib);
    const std::size_t n = g.size();
    auto at = [&](const Tensor<T>& v, bool scalar, std::size_t i) { return scalar ? v[0] : v[i]; };
    if (t.requires_grad(ia)) {
      std::vector<T> c(n);
      for (std::size_t i = 0; i < n; ++i) c[i] = g[i] * at(B, kind == Bcast::b_scalar, i);
      accumulate(t, ia, kind == Bcast::a_scalar, std::span<const T>(c));
    }
    if (t.requires_grad(ib)) {
      std::vector<T> c(n);
      for (std::size_t i = 0; i < n; ++i) c[i] = g[i] * at(A, kind == Bcast::a_scalar, i);
      accumulate(t, ib, kind == Bcast::b_scalar, std::span<const T>(c));
    }
  });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return unary(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> gelu(Var<T> a) {
  constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  return unary(
      a, [](T x) { return T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2)); },
      [](T x, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
        const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x * x);
        return cdf + x * pdf;
      });
}

template <typename T>
Var<T> exp(Var<T> a) {
  return unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> square(Var<T> a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  return unary(a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> row) {
  require_rank2(a, "add_row");
  if (row.value().size() != a.cols()) {
    throw ShapeError("add_row: row " + shape_string(row.shape()) + " does not fit " +
                     shape_string(a.shape()));
  }
  const Tensor<T>& A = a.value();
  const Tensor<T>& R = row.value();
  Tensor<T> out(A.shape());
  const std::size_t m = A.rows(), n = A.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = A[i * n + j] + R[j];
  const std::uint32_t ia = a.id(), ir = row.id();
  return a.tape()->record(std::move(out), {a, row}, [ia, ir, m, n](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) {
      Tensor<T>& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ir)) {
      Tensor<T>& gr = t.grad_buffer(ir);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
    }
  });
}

template <typename T>
Var<T> mul_row(Var<T> a, Var<T> row) {
  require_rank2(a, "mul_row");
  if (row.value().size() != a.cols()) {
    throw ShapeError("mul_row: row " + shape_string(row.shape()) + " does not fit " +
                     shape_string(a.shape()));
  }
  const Tensor<T>& A = a.value();
  const Tensor<T>& R = row.value();
  Tensor<T> out(A.shape());
  const std::size_t m = A.rows(), n = A.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = A[i * n + j] * R[j];
  const std::uint32_t ia = a.id(), ir = row.id();
  return a.tape()->record(std::move(out), {a, row}, [ia, ir, m, n](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    const Tensor<T>& A = t.value(ia);
    const Tensor<T>& R = t.value(ir);
    if (t.requires_grad(ia)) {
      Tensor<T>& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * R[j];
    }
    if (t.requires_grad(ir)) {
      Tensor<T>& gr = t.grad_buffer(ir);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j] * A[i * n + j];
    }
  });
}

template <typename T>
Var<T> affine(Var<T> x, Var<T> w, Var<T> b) {
  const Tensor<T>& X = x.value();
  const Tensor<T>& W = w.value();
  const Tensor<T>& B = b.value();
  if (X.rank() != 2 || W.rank() != 2 || X.cols() != W.rows() || B.size() != W.cols()) {
    throw ShapeError("affine: input " + shape_string(X.shape()) + ", weight " +
                     shape_string(W.shape()) + ", bias " + shape_string(B.shape()));
  }
  const std::size_t m = X.rows(), k = X.cols(), n = W.cols();
  Tensor<T> out = Tensor<T>::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) std::copy(B.data(), B.data() + n, out.data() + i * n);
  kernel::gemm(m, k, n, X.data(), W.data(), out.data(), true);
  const std::uint32_t ix = x.id(), iw = w.id(), ib = b.id();
  return x.tape()->record(std::move(out), {x, w, b}, [ix, iw, ib, m, k, n](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& G = t.grad_buffer(self);
    if (t.requires_grad(ix)) {
      const Tensor<T>& W = t.value(iw);
      std::vector<T> wt(k * n);
      kernel::transpose(k, n, W.data(), wt.data());
      kernel::gemm(m, n, k, G.data(), wt.data(), t.grad_buffer(ix).data(), true);
    }
    if (t.requires_grad(iw)) {
      kernel::gemm_at_b(m, k, n, t.value(ix).data(), G.data(), t.grad_buffer(iw).data());
    }
    if (t.requires_grad(ib)) {
      Tensor<T>& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += G[i * n + j];
    }
  });
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  const Tensor<T>& A = a.value();
  if (begin >= end || end > A.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_string(A.shape()));
  }
  const std::size_t m = A.rows(), n = A.cols(), w = end - begin;
  Tensor<T> out = Tensor<T>::matrix(m, w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy(A.data() + i * n + begin, A.data() + i * n + end, out.data() + i * w);
  const std::uint32_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, m, n, w, begin](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    Tensor<T>& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * n + begin + j] += g[i * w + j];
  });
}

template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_rows");
  Tensor<T> out = a.value().slice_rows(begin, end);
  const std::size_t n = a.cols();
  const std::uint32_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, n, begin](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    Tensor<T>& ga = t.grad_buffer(ia);
    T* dst = ga.data() + begin * n;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    ids.push_back(p.id());
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor<T> out = Tensor<T>::matrix(m, total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor<T>& v = p.value();
    const std::size_t w = v.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy(v.data() + i * w, v.data() + (i + 1) * w, out.data() + i * total + off);
    off += w;
  }
  return parts[0].tape()->record(
      std::move(out), parts, [ids, widths, m, total](Tape<T>& t, std::uint32_t self) {
        const Tensor<T>& g = t.grad_buffer(self);
        std::size_t off = 0;
        for (std::size_t q = 0; q < ids.size(); ++q) {
          const std::size_t w = widths[q];
          if (t.requires_grad(ids[q])) {
            Tensor<T>& gp = t.grad_buffer(ids[q]);
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * total + off + j];
          }
          off += w;
        }
      });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  std::vector<Tensor<T>> values;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> sizes;
  values.reserve(parts.size());
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    values.push_back(p.value());
    ids.push_back(p.id());
    sizes.push_back(p.value().size());
  }
  Tensor<T> out = vstack(std::span<const Tensor<T>>(values));
  return parts[0].tape()->record(std::move(out), parts, [ids, sizes](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    std::size_t off = 0;
    for (std::size_t q = 0; q < ids.size(); ++q) {
      if (t.requires_grad(ids[q])) {
        Tensor<T>& gp = t.grad_buffer(ids[q]);
        for (std::size_t i = 0; i < sizes[q]; ++i) gp[i] += g[off + i];
      }
      off += sizes[q];
    }
  });
}

template <typename T>
Var<T> tile_rows(Var<T> row, std::size_t count) {
  const Tensor<T>& R = row.value();
  if (R.rows() != 1 || count == 0) {
    throw ShapeError("tile_rows: expected a single row and a positive count, got " +
                     shape_string(R.shape()));
  }
  const std::size_t n = R.cols();
  Tensor<T> out = Tensor<T>::matrix(count, n);
  for (std::size_t i = 0; i < count; ++i) std::copy(R.data(), R.data() + n, out.data() + i * n);
  const std::uint32_t ir = row.id();
  return row.tape()->record(std::move(out), {row}, [ir, count, n](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    Tensor<T>& gr = t.grad_buffer(ir);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  T s = T(0);
  for (T v : a.value().values()) s += v;
  const std::uint32_t ia = a.id();
  return a.tape()->record(Tensor<T>::scalar(s), {a}, [ia](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad_buffer(self)[0];
    Tensor<T>& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

template <typename T>
Var<T> mean_rows(Var<T> a) {
  require_rank2(a, "mean_rows");
  const Tensor<T>& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor<T> out = Tensor<T>::matrix(1, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += A[i * n + j];
  const T inv = T(1) / static_cast<T>(m);
  for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
  const std::uint32_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, m, n, inv](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    Tensor<T>& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j] * inv;
  });
}

template <typename T>
Var<T> layer_norm(Var<T> a, T eps) {
  require_rank2(a, "layer_norm");
  const Tensor<T>& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor<T> out(A.shape());
  std::vector<T> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const T* x = A.data() + i * n;
    T mu = T(0);
    for (std::size_t j = 0; j < n; ++j) mu += x[j];
    mu /= static_cast<T>(n);
    T var = T(0);
    for (std::size_t j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<T>(n);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (x[j] - mu) * is;
  }
  const std::uint32_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, m, n, inv_std](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad_buffer(self);
    const Tensor<T>& y = t.value(self);
    Tensor<T>& ga = t.grad_buffer(ia);
    const T inv_n = T(1) / static_cast<T>(n);
    for (std::size_t i = 0; i < m; ++i) {
      const T* gi = g.data() + i * n;
      const T* yi = y.data() + i * n;
      T sg = T(0), sgy = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        sg += gi[j];
        sgy += gi[j] * yi[j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        ga[i * n + j] += inv_std[i] * (gi[j] - inv_n * sg - yi[j] * inv_n * sgy);
      }
    }
  });
}

#define LAPIS_INSTANTIATE_AD(T)                                                  \
  template Var<T> matmul(Var<T>, Var<T>);                                        \
  template Var<T> add(Var<T>, Var<T>);                                           \
  template Var<T> sub(Var<T>, Var<T>);                                           \
  template Var<T> mul(Var<T>, Var<T>);                                           \
  template Var<T> tanh(Var<T>);                                                  \
  template Var<T> sigmoid(Var<T>);                                               \
  template Var<T> gelu(Var<T>);                                                  \
  template Var<T> exp(Var<T>);                                                   \
  template Var<T> square(Var<T>);                                                \
  template Var<T> scale(Var<T>, T);                                              \
  template Var<T> add_row(Var<T>, Var<T>);                                       \
  template Var<T> mul_row(Var<T>, Var<T>);                                       \
  template Var<T> affine(Var<T>, Var<T>, Var<T>);                                \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                  \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                  \
  template Var<T> concat_cols(std::span<const Var<T>>);                          \
  template Var<T> concat_rows(std::span<const Var<T>>);                          \
  template Var<T> tile_rows(Var<T>, std::size_t);                                \
  template Var<T> sum(Var<T>);                                                   \
  template Var<T> mean(Var<T>);                                                  \
  template Var<T> mean_rows(Var<T>);                                             \
  template Var<T> layer_norm(Var<T>, T);

LAPIS_INSTANTIATE_AD(float)
LAPIS_INSTANTIATE_AD(double)

#undef LAPIS_INSTANTIATE_AD

}  // namespace ad
}  // namespace lapis
