#pragma once

// Tape-based reverse-mode differentiation over Tensor values.
//
// Every taped op evaluates eagerly, stores its value on the tape together with
// a pullback closure, and returns a Var handle. Tape::backward walks the
// records in exact reverse order of recording and sums adjoints of values
// that are used more than once.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "natsel/tensor.hpp"

namespace natsel {

struct LossConfig;
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Given the adjoint of an op's output and a mask of which inputs need one,
// returns one adjoint per input (entries for unwanted inputs may be empty).
using Pullback = std::function<std::vector<Tensor>(const Tensor& upstream, std::span<const char> wanted)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A value that receives no gradient.
  Var constant(Tensor value);
  // A value whose gradient backward() reports, in registration order.
  Var parameter(Tensor value);

  // Records a custom op. `pullback` may be empty for ops without inputs.
  Var record(Tensor value, std::vector<Var> inputs, Pullback pullback);

  const Tensor& value(const Var& v) const;
  std::size_t size() const { return nodes_.size(); }
  std::size_t parameter_count() const { return parameters_.size(); }

  // d root / d parameter for every registered parameter. Parameters that do
  // not influence root get zero tensors of their own shape.
  // Throws ShapeError if root is not rank-0, std::invalid_argument if root
  // was recorded on another tape.
  std::vector<Tensor> backward(const Var& root) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    Pullback pullback;
    bool needs_grad = false;
  };

  Var push(Node node);
  void check_owned(const Var& v, const char* what) const;

  std::deque<Node> nodes_;
  std::vector<std::size_t> parameters_;
};

// Taped counterparts of the plain Tensor ops.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var reshape(const Var& a, Shape shape);
Var linear(const Var& x, const Var& w, const Var& bias);
Var im2col(const Var& x, std::size_t kernel);

// Per-row loss of row-wise softmax(logits) against integer labels: [B x K] -> [B].
// Values equal per_sample_loss(softmax(row), label, cfg).
Var softmax_loss_rows(const Var& logits, std::span<const int> labels, const LossConfig& cfg);

// (1/B) * sum_i weights[i] * losses[i]; weights are constants.
Var weighted_mean(const Var& losses, std::span<const double> weights);

}  // namespace natsel
