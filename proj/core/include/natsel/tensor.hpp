#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace natsel {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles.
//
// Invariants: shape_size(shape()) == size(), and every element is finite.
// Constructors and the free functions below throw DomainError instead of
// producing NaN/Inf. A rank-0 tensor (empty shape) is a scalar.
class Tensor {
 public:
  Tensor() : shape_{0} {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool is_scalar() const { return shape_.empty(); }

  std::span<const double> data() const { return data_; }
  // Mutable access for in-place parameter updates. Callers must keep values finite.
  std::span<double> mutable_data() { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

void ensure_finite(const Tensor& t, const char* what);

// Plain (untaped) operations. Binary elementwise ops accept identical shapes
// or a rank-0 operand on either side.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

enum class Elementwise { add, sub, mul, relu, exp, log, scale };

// Dispatching form of the ops above. Unary ops ignore `b`; `scale` reads its
// factor from the scalar `b`.
Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b = Tensor::scalar(0.0));

// x: [B x D], w: [D x H], bias: [H]  ->  [B x H]; bias added to every row.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// x: [B x H x W x C] -> [(B * Ho * Wo) x (k * k * C)] with Ho = H-k+1, Wo = W-k+1.
// Row (b, i, j) holds the k x k x C patch whose top-left corner is (i, j).
Tensor im2col(const Tensor& x, std::size_t kernel);

// Sub-tensor at `index` along the first axis (drops that axis).
Tensor select(const Tensor& t, std::size_t index);
// Stacks t[indices[0]], t[indices[1]], ... along a new first axis.
Tensor gather(const Tensor& t, std::span<const std::size_t> indices);
// Stacks equally shaped tensors along a new first axis.
Tensor stack(std::span<const Tensor> items);

// Row-wise softmax of a rank-1 or rank-2 tensor, computed with max-subtraction.
Tensor softmax(const Tensor& z);

}  // namespace natsel
