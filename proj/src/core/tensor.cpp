#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "core/errors.hpp"

namespace lapis {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  data_.assign(shape_size(shape_), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

template <typename T>
Tensor<T> Tensor<T>::from_rows(std::initializer_list<std::initializer_list<T>> rows) {
  if (rows.size() == 0) throw ShapeError("from_rows: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<T> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor(Shape{rows.size(), cols}, std::move(data));
}

template <typename T>
Tensor<T> Tensor<T>::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > rows()) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_string(shape_));
  }
  const std::size_t c = cols();
  std::vector<T> out(data_.begin() + begin * c, data_.begin() + end * c);
  return Tensor(Shape{end - begin, c}, std::move(out));
}

template <typename T>
void Tensor<T>::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
Tensor<T> vstack(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("vstack: nothing to stack");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("vstack: width mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    rows += p.rows();
  }
  std::vector<T> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
  return Tensor<T>(Shape{rows, cols}, std::move(data));
}

namespace kernel {

namespace {
constexpr std::size_t kColBlock = 512;
}

template <typename T>
void gemm(std::size_t m, std::size_t k, std::size_t n, const T* __restrict a,
          const T* __restrict b, T* __restrict c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T(0));
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    T* c0 = c + (i + 0) * n;
    T* c1 = c + (i + 1) * n;
    T* c2 = c + (i + 2) * n;
    T* c3 = c + (i + 3) * n;
    const T* a0 = a + (i + 0) * k;
    const T* a1 = a + (i + 1) * k;
    const T* a2 = a + (i + 2) * k;
    const T* a3 = a + (i + 3) * k;
    for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
      const std::size_t j1 = std::min(n, j0 + kColBlock);
      for (std::size_t p = 0; p < k; ++p) {
        const T x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
        const T* __restrict bp = b + p * n;
        for (std::size_t j = j0; j < j1; ++j) {
          const T bv = bp[j];
          c0[j] = std::fma(x0, bv, c0[j]);
          c1[j] = std::fma(x1, bv, c1[j]);
          c2[j] = std::fma(x2, bv, c2[j]);
          c3[j] = std::fma(x3, bv, c3[j]);
        }
      }
    }
  }
  for (; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
      const std::size_t j1 = std::min(n, j0 + kColBlock);
      for (std::size_t p = 0; p < k; ++p) {
        const T x = ai[p];
        const T* __restrict bp = b + p * n;
        for (std::size_t j = j0; j < j1; ++j) ci[j] = std::fma(x, bp[j], ci[j]);
      }
    }
  }
}

template <typename T>
void gemm_at_b(std::size_t m, std::size_t k, std::size_t n, const T* __restrict a,
               const T* __restrict b, T* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    const T* __restrict bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T x = ai[p];
      if (x == T(0)) continue;
      T* __restrict cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] = std::fma(x, bi[j], cp[j]);
    }
  }
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t kb = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kb) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kb) {
      const std::size_t r1 = std::min(rows, r0 + kb);
      const std::size_t c1 = std::min(cols, c0 + kb);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t cc = c0; cc < c1; ++cc) dst[cc * rows + r] = src[r * cols + cc];
    }
  }
}

template void gemm<float>(std::size_t, std::size_t, std::size_t, const float*, const float*,
                          float*, bool);
template void gemm<double>(std::size_t, std::size_t, std::size_t, const double*, const double*,
                           double*, bool);
template void gemm_at_b<float>(std::size_t, std::size_t, std::size_t, const float*,
                               const float*, float*);
template void gemm_at_b<double>(std::size_t, std::size_t, std::size_t, const double*,
                                const double*, double*);
template void transpose<float>(std::size_t, std::size_t, const float*, float*);
template void transpose<double>(std::size_t, std::size_t, const double*, double*);

}  // namespace kernel

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                     shape_string(b.shape()));
  }
  Tensor<T> out = Tensor<T>::matrix(a.rows(), b.cols());
  kernel::gemm(a.rows(), a.cols(), b.cols(), a.data(), b.data(), out.data(), false);
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> vstack(std::span<const Tensor<float>>);
template Tensor<double> vstack(std::span<const Tensor<double>>);
template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&);

}  // namespace lapis
