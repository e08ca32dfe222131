#include "natsel/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "natsel/error.hpp"

namespace natsel {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

void ensure_finite(const Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite value");
  }
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  if (!std::isfinite(fill)) throw DomainError("Tensor: non-finite fill value");
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("Tensor: shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " elements");
  }
  ensure_finite(*this, "Tensor");
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(n_rows * n_cols);
  for (const auto& row : rows) {
    if (row.size() != n_cols) throw ShapeError("Tensor::matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({n_rows, n_cols}, std::move(data));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("Tensor::item: tensor has " + std::to_string(data_.size()) + " elements");
  return data_[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("Tensor::at: expected rank 2");
  return data_.at(row * shape_[1] + col);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) { return a.reshaped(std::move(shape)); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  Tensor result({m, n}, std::move(out));
  return result;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return Tensor({n, m}, std::move(out));
}

namespace {

template <class Op>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Op op) {
  const auto A = a.data();
  const auto B = b.data();
  if (a.shape() == b.shape()) {
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = op(A[i], B[i]);
    return Tensor(a.shape(), std::move(out));
  }
  if (b.is_scalar()) {
    const double s = B[0];
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = op(A[i], s);
    return Tensor(a.shape(), std::move(out));
  }
  if (a.is_scalar()) {
    const double s = A[0];
    std::vector<double> out(B.size());
    for (std::size_t i = 0; i < B.size(); ++i) out[i] = op(s, B[i]);
    return Tensor(b.shape(), std::move(out));
  }
  throw ShapeError(std::string(name) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

template <class Op>
Tensor unary(const Tensor& a, Op op) {
  const auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = op(A[i]);
  return Tensor(a.shape(), std::move(out));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; });
}
Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return factor * x; });
}
Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, [offset](double x) { return x + offset; });
}
Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; });
}
Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); });
}
Tensor log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(v));
  }
  return unary(a, [](double x) { return std::log(x); });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Tensor::scalar(total);
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  return Tensor::scalar(sum(a).item() / static_cast<double>(a.size()));
}

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case Elementwise::add: return add(a, b);
    case Elementwise::sub: return sub(a, b);
    case Elementwise::mul: return mul(a, b);
    case Elementwise::relu: return relu(a);
    case Elementwise::exp: return exp(a);
    case Elementwise::log: return log(a);
    case Elementwise::scale: return scale(a, b.item());
  }
  throw std::logic_error("elementwise: unknown op");
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (bias.rank() != 1 || w.rank() != 2 || bias.dim(0) != w.dim(1)) {
    throw ShapeError("linear: weight " + shape_string(w.shape()) + " bias " + shape_string(bias.shape()));
  }
  Tensor out = matmul(x, w);
  auto O = out.mutable_data();
  const auto Bv = bias.data();
  const std::size_t n = w.dim(1);
  for (std::size_t i = 0; i < O.size(); ++i) O[i] += Bv[i % n];
  ensure_finite(out, "linear");
  return out;
}

Tensor im2col(const Tensor& x, std::size_t kernel) {
  if (x.rank() != 4) throw ShapeError("im2col: expected [B x H x W x C], got " + shape_string(x.shape()));
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  if (kernel == 0 || kernel > H || kernel > W) throw ShapeError("im2col: kernel does not fit the image");
  const std::size_t Ho = H - kernel + 1, Wo = W - kernel + 1;
  const std::size_t cols = kernel * kernel * C;
  std::vector<double> out(B * Ho * Wo * cols);
  const auto X = x.data();
  std::size_t o = 0;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j)
        for (std::size_t di = 0; di < kernel; ++di)
          for (std::size_t dj = 0; dj < kernel; ++dj)
            for (std::size_t c = 0; c < C; ++c)
              out[o++] = X[((b * H + i + di) * W + j + dj) * C + c];
  return Tensor({B * Ho * Wo, cols}, std::move(out));
}

Tensor select(const Tensor& t, std::size_t index) {
  if (t.rank() == 0 || index >= t.dim(0)) throw ShapeError("select: index out of range");
  const Shape inner(t.shape().begin() + 1, t.shape().end());
  const std::size_t n = shape_size(inner);
  const auto src = t.data().subspan(index * n, n);
  return Tensor(inner, std::vector<double>(src.begin(), src.end()));
}

Tensor gather(const Tensor& t, std::span<const std::size_t> indices) {
  if (t.rank() == 0) throw ShapeError("gather: scalar input");
  Shape shape = t.shape();
  const std::size_t n = t.size() / std::max<std::size_t>(t.dim(0), 1);
  shape[0] = indices.size();
  std::vector<double> out;
  out.reserve(indices.size() * n);
  const auto src = t.data();
  for (std::size_t idx : indices) {
    if (idx >= t.dim(0)) throw ShapeError("gather: index out of range");
    out.insert(out.end(), src.begin() + static_cast<std::ptrdiff_t>(idx * n),
               src.begin() + static_cast<std::ptrdiff_t>((idx + 1) * n));
  }
  return Tensor(std::move(shape), std::move(out));
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("stack: no items");
  Shape shape{items.size()};
  shape.insert(shape.end(), items.front().shape().begin(), items.front().shape().end());
  std::vector<double> out;
  out.reserve(shape_size(shape));
  for (const Tensor& item : items) {
    if (item.shape() != items.front().shape()) throw ShapeError("stack: heterogeneous shapes");
    out.insert(out.end(), item.data().begin(), item.data().end());
  }
  return Tensor(std::move(shape), std::move(out));
}

Tensor softmax(const Tensor& z) {
  if (z.rank() != 1 && z.rank() != 2) throw ShapeError("softmax: expected rank 1 or 2");
  if (z.size() == 0) throw ShapeError("softmax: empty input");
  const std::size_t k = z.shape().back();
  const std::size_t rows = z.size() / k;
  const auto Z = z.data();
  std::vector<double> out(z.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = Z.data() + r * k;
    double* pr = out.data() + r * k;
    const double mx = *std::max_element(zr, zr + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      pr[j] = std::exp(zr[j] - mx);
      total += pr[j];
    }
    for (std::size_t j = 0; j < k; ++j) pr[j] /= total;
  }
  return Tensor(z.shape(), std::move(out));
}

}  // namespace natsel
