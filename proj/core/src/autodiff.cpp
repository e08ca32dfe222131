#include "natsel/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "natsel/error.hpp"
#include "natsel/loss.hpp"

namespace natsel {

const Tensor& Var::value() const {
  if (!tape_) throw std::invalid_argument("Var: not bound to a tape");
  return tape_->value(*this);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v, const char* what) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw std::invalid_argument(std::string(what) + ": value is not recorded on this tape");
  }
}

Var Tape::constant(Tensor value) { return push(Node{std::move(value), {}, {}, false}); }

Var Tape::parameter(Tensor value) {
  Var v = push(Node{std::move(value), {}, {}, true});
  parameters_.push_back(v.id_);
  return v;
}

Var Tape::record(Tensor value, std::vector<Var> inputs, Pullback pullback) {
  Node node{std::move(value), {}, std::move(pullback), false};
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owned(in, "Tape::record");
    node.inputs.push_back(in.id_);
    node.needs_grad = node.needs_grad || nodes_[in.id_].needs_grad;
  }
  return push(std::move(node));
}

const Tensor& Tape::value(const Var& v) const {
  check_owned(v, "Tape::value");
  return nodes_[v.id_].value;
}

std::vector<Tensor> Tape::backward(const Var& root) const {
  check_owned(root, "Tape::backward");
  if (!nodes_[root.id_].value.is_scalar()) {
    throw ShapeError("backward: root must be a scalar, got " + shape_string(nodes_[root.id_].value.shape()));
  }

  std::vector<Tensor> adjoint(root.id_ + 1);
  std::vector<char> has(root.id_ + 1, 0);
  adjoint[root.id_] = Tensor::scalar(1.0);
  has[root.id_] = 1;

  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!has[i] || !node.needs_grad || !node.pullback) continue;
    std::vector<char> wanted(node.inputs.size());
    for (std::size_t k = 0; k < node.inputs.size(); ++k) wanted[k] = nodes_[node.inputs[k]].needs_grad ? 1 : 0;
    std::vector<Tensor> contributions = node.pullback(adjoint[i], wanted);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      if (!wanted[k]) continue;
      const std::size_t in = node.inputs[k];
      if (has[in]) {
        adjoint[in] = add(adjoint[in], contributions[k]);
      } else {
        adjoint[in] = std::move(contributions[k]);
        has[in] = 1;
      }
    }
  }

  std::vector<Tensor> grads;
  grads.reserve(parameters_.size());
  for (std::size_t id : parameters_) {
    if (id <= root.id_ && has[id]) {
      grads.push_back(adjoint[id]);
    } else {
      grads.emplace_back(nodes_[id].value.shape(), 0.0);
    }
  }
  return grads;
}

namespace {

Tape& owner(const Var& a) {
  if (!a.tape()) throw std::invalid_argument("taped op: unbound Var");
  return *a.tape();
}

Tape& owner(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw std::invalid_argument("taped op: operands live on different tapes");
  return owner(a);
}

// Reduces an adjoint to the shape of an operand that was scalar-broadcast.
Tensor unbroadcast(const Tensor& grad, const Shape& operand) {
  if (operand.empty() && !grad.is_scalar()) return sum(grad);
  return grad;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& tape = owner(a, b);
  Tensor out = matmul(a.value(), b.value());
  Tensor av = a.value(), bv = b.value();
  return tape.record(std::move(out), {a, b},
                     [av = std::move(av), bv = std::move(bv)](const Tensor& g, std::span<const char> wanted) {
                       std::vector<Tensor> r(2);
                       if (wanted[0]) r[0] = matmul(g, transpose(bv));
                       if (wanted[1]) r[1] = matmul(transpose(av), g);
                       return r;
                     });
}

Var add(const Var& a, const Var& b) {
  Tape& tape = owner(a, b);
  return tape.record(add(a.value(), b.value()), {a, b},
                     [sa = a.shape(), sb = b.shape()](const Tensor& g, std::span<const char>) {
                       return std::vector<Tensor>{unbroadcast(g, sa), unbroadcast(g, sb)};
                     });
}

Var sub(const Var& a, const Var& b) {
  Tape& tape = owner(a, b);
  return tape.record(sub(a.value(), b.value()), {a, b},
                     [sa = a.shape(), sb = b.shape()](const Tensor& g, std::span<const char>) {
                       return std::vector<Tensor>{unbroadcast(g, sa), unbroadcast(scale(g, -1.0), sb)};
                     });
}

Var mul(const Var& a, const Var& b) {
  Tape& tape = owner(a, b);
  Tensor av = a.value(), bv = b.value();
  Tensor out = mul(av, bv);
  return tape.record(std::move(out), {a, b},
                     [av = std::move(av), bv = std::move(bv)](const Tensor& g, std::span<const char> wanted) {
                       std::vector<Tensor> r(2);
                       if (wanted[0]) r[0] = unbroadcast(mul(g, bv), av.shape());
                       if (wanted[1]) r[1] = unbroadcast(mul(g, av), bv.shape());
                       return r;
                     });
}

Var scale(const Var& a, double factor) {
  return owner(a).record(scale(a.value(), factor), {a}, [factor](const Tensor& g, std::span<const char>) {
    return std::vector<Tensor>{scale(g, factor)};
  });
}

Var add_scalar(const Var& a, double offset) {
  return owner(a).record(add_scalar(a.value(), offset), {a},
                         [](const Tensor& g, std::span<const char>) { return std::vector<Tensor>{g}; });
}

Var relu(const Var& a) {
  Tensor out = relu(a.value());
  Tensor mask = a.value();
  for (double& v : mask.mutable_data()) v = v > 0.0 ? 1.0 : 0.0;
  return owner(a).record(std::move(out), {a}, [mask = std::move(mask)](const Tensor& g, std::span<const char>) {
    return std::vector<Tensor>{mul(g, mask)};
  });
}

Var exp(const Var& a) {
  Tensor out = exp(a.value());
  Tensor saved = out;
  return owner(a).record(std::move(out), {a}, [saved = std::move(saved)](const Tensor& g, std::span<const char>) {
    return std::vector<Tensor>{mul(g, saved)};
  });
}

Var log(const Var& a) {
  Tensor out = log(a.value());
  Tensor av = a.value();
  return owner(a).record(std::move(out), {a}, [av = std::move(av)](const Tensor& g, std::span<const char>) {
    Tensor r = g;
    auto R = r.mutable_data();
    const auto A = av.data();
    for (std::size_t i = 0; i < R.size(); ++i) R[i] /= A[i];
    return std::vector<Tensor>{r};
  });
}

Var sum(const Var& a) {
  return owner(a).record(sum(a.value()), {a}, [shape = a.shape()](const Tensor& g, std::span<const char>) {
    return std::vector<Tensor>{Tensor(shape, g.item())};
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return owner(a).record(mean(a.value()), {a}, [shape = a.shape(), n](const Tensor& g, std::span<const char>) {
    return std::vector<Tensor>{Tensor(shape, g.item() / n)};
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return owner(a).record(std::move(out), {a}, [orig = a.shape()](const Tensor& g, std::span<const char>) {
    return std::vector<Tensor>{g.reshaped(orig)};
  });
}

Var linear(const Var& x, const Var& w, const Var& bias) {
  Tape& tape = owner(x, w);
  owner(w, bias);
  Tensor xv = x.value(), wv = w.value();
  Tensor out = linear(xv, wv, bias.value());
  return tape.record(std::move(out), {x, w, bias},
                     [xv = std::move(xv), wv = std::move(wv)](const Tensor& g, std::span<const char> wanted) {
                       std::vector<Tensor> r(3);
                       if (wanted[0]) r[0] = matmul(g, transpose(wv));
                       if (wanted[1]) r[1] = matmul(transpose(xv), g);
                       if (wanted[2]) {
                         const std::size_t n = g.dim(1);
                         std::vector<double> db(n, 0.0);
                         const auto G = g.data();
                         for (std::size_t i = 0; i < G.size(); ++i) db[i % n] += G[i];
                         r[2] = Tensor::vector(std::move(db));
                       }
                       return r;
                     });
}

Var im2col(const Var& x, std::size_t kernel) {
  Tensor out = im2col(x.value(), kernel);
  return owner(x).record(std::move(out), {x}, [shape = x.shape(), kernel](const Tensor& g, std::span<const char>) {
    const std::size_t B = shape[0], H = shape[1], W = shape[2], C = shape[3];
    const std::size_t Ho = H - kernel + 1, Wo = W - kernel + 1;
    std::vector<double> dx(B * H * W * C, 0.0);
    const auto G = g.data();
    std::size_t o = 0;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j)
          for (std::size_t di = 0; di < kernel; ++di)
            for (std::size_t dj = 0; dj < kernel; ++dj)
              for (std::size_t c = 0; c < C; ++c) dx[((b * H + i + di) * W + j + dj) * C + c] += G[o++];
    return std::vector<Tensor>{Tensor(shape, std::move(dx))};
  });
}

Var softmax_loss_rows(const Var& logits, std::span<const int> labels, const LossConfig& cfg) {
  const Tensor& z = logits.value();
  if (z.rank() != 2 || z.dim(0) != labels.size()) {
    throw ShapeError("softmax_loss_rows: logits " + shape_string(z.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t rows = z.dim(0), k = z.dim(1);
  Tensor probs = softmax(z);
  std::vector<double> losses(rows);
  std::vector<double> dlogits(rows * k);
  const auto P = probs.data();
  for (std::size_t r = 0; r < rows; ++r) {
    auto pr = P.subspan(r * k, k);
    losses[r] = per_sample_loss(pr, labels[r], cfg);
    loss_logit_gradient(pr, labels[r], cfg, std::span<double>(dlogits).subspan(r * k, k));
  }
  Tensor local({rows, k}, std::move(dlogits));
  return owner(logits).record(Tensor::vector(std::move(losses)), {logits},
                              [local = std::move(local), k](const Tensor& g, std::span<const char>) {
                                Tensor r = local;
                                auto R = r.mutable_data();
                                const auto G = g.data();
                                for (std::size_t i = 0; i < R.size(); ++i) R[i] *= G[i / k];
                                return std::vector<Tensor>{r};
                              });
}

Var weighted_mean(const Var& losses, std::span<const double> weights) {
  const Tensor& l = losses.value();
  if (l.rank() != 1 || l.size() != weights.size()) {
    throw ShapeError("weighted_mean: " + std::to_string(l.size()) + " losses vs " + std::to_string(weights.size()) +
                     " weights");
  }
  if (l.size() == 0) throw ShapeError("weighted_mean: empty batch");
  const double n = static_cast<double>(l.size());
  double total = 0.0;
  const auto L = l.data();
  for (std::size_t i = 0; i < L.size(); ++i) total += weights[i] * L[i];
  Tensor local = Tensor::vector(std::vector<double>(weights.begin(), weights.end()));
  return owner(losses).record(Tensor::scalar(total / n), {losses},
                              [local = std::move(local), n](const Tensor& g, std::span<const char>) {
                                return std::vector<Tensor>{scale(local, g.item() / n)};
                              });
}

}  // namespace natsel
