#include "exitnet/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace exitnet {

const Tensor& Var::value() const { return graph_->value(id_); }
const Tensor& Var::grad() const { return graph_->grad(id_); }

Var Graph::constant(Tensor value) { return record(std::move(value), {}, nullptr); }

Var Graph::param(Parameter& p) {
  Var v = record(p.value, {}, nullptr);
  nodes_[v.id()].param = &p;
  return v;
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, Backprop backprop) {
  if (!value.all_finite()) throw std::runtime_error("autodiff: non-finite value produced");
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(Var root) {
  if (&root.graph() != this) throw std::invalid_argument("backward: root belongs to another graph");
  const std::size_t r = root.id();
  if (nodes_[r].value.size() != 1) {
    throw std::invalid_argument("backward: root must be a scalar, got " +
                                std::to_string(nodes_[r].value.size()) + " elements");
  }
  std::vector<char> reachable(r + 1, 0);
  reachable[r] = 1;
  for (std::size_t i = r + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    for (std::size_t in : nodes_[i].inputs) reachable[in] = 1;
  }
  for (auto& n : nodes_) n.grad = Tensor(n.value.shape());
  nodes_[r].grad[0] = 1.0;
  for (std::size_t i = r + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    Node& n = nodes_[i];
    if (n.backprop) n.backprop(*this, i);
    if (n.param != nullptr) {
      auto dst = n.param->grad.data();
      auto src = n.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

namespace {

// Accumulates upstream gradient g (shape of the op output) into the input that
// may have been broadcast.
void accumulate_broadcast(Tensor& dst, const Tensor& g, double sign = 1.0) {
  if (dst.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += sign * g[i];
  } else if (dst.size() == 1) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) acc += g[i];
    dst[0] += sign * acc;
  } else {
    const std::size_t inner = dst.size();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i % inner] += sign * g[i];
  }
}

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw std::invalid_argument("autodiff: operands belong to different graphs");
  return a.graph();
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  Tensor out = kernels::matmul(a.value(), b.value());
  g.add_flops(static_cast<std::uint64_t>(a.value().rows()) * a.value().cols() * b.value().cols());
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    const Tensor& A = gr.value(ia);
    const Tensor& B = gr.value(ib);
    const Tensor& G = gr.grad(self);
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    Tensor& dA = gr.mutable_grad(ia);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += G[i * m + j] * B[p * m + j];
        dA[i * k + p] += acc;
      }
    Tensor& dB = gr.mutable_grad(ib);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = A[i * k + p];
        for (std::size_t j = 0; j < m; ++j) dB[p * m + j] += av * G[i * m + j];
      }
  });
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(kernels::add(a.value(), b.value()), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    accumulate_broadcast(gr.mutable_grad(ia), gr.grad(self));
    accumulate_broadcast(gr.mutable_grad(ib), gr.grad(self));
  });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(kernels::sub(a.value(), b.value()), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    accumulate_broadcast(gr.mutable_grad(ia), gr.grad(self));
    accumulate_broadcast(gr.mutable_grad(ib), gr.grad(self), -1.0);
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(kernels::mul(a.value(), b.value()), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    const Tensor& G = gr.grad(self);
    // d/da = G * b (broadcast b up), d/db = G * a (reduce down)
    accumulate_broadcast(gr.mutable_grad(ia), kernels::mul(G, gr.value(ib)));
    accumulate_broadcast(gr.mutable_grad(ib), kernels::mul(G, gr.value(ia)));
  });
}

Var relu(Var a) {
  const std::size_t ia = a.id();
  return a.graph().record(kernels::relu(a.value()), {ia}, [ia](Graph& gr, std::size_t self) {
    const Tensor& x = gr.value(ia);
    const Tensor& G = gr.grad(self);
    Tensor& d = gr.mutable_grad(ia);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 0.0) d[i] += G[i];
  });
}

Var tanh(Var a) {
  const std::size_t ia = a.id();
  return a.graph().record(kernels::tanh(a.value()), {ia}, [ia](Graph& gr, std::size_t self) {
    const Tensor& y = gr.value(self);
    const Tensor& G = gr.grad(self);
    Tensor& d = gr.mutable_grad(ia);
    for (std::size_t i = 0; i < y.size(); ++i) d[i] += G[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  const std::size_t ia = a.id();
  return a.graph().record(kernels::sigmoid(a.value()), {ia}, [ia](Graph& gr, std::size_t self) {
    const Tensor& y = gr.value(self);
    const Tensor& G = gr.grad(self);
    Tensor& d = gr.mutable_grad(ia);
    for (std::size_t i = 0; i < y.size(); ++i) d[i] += G[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax_rows(Var a) {
  const std::size_t ia = a.id();
  return a.graph().record(kernels::softmax_rows(a.value()), {ia}, [ia](Graph& gr, std::size_t self) {
    const Tensor& P = gr.value(self);
    const Tensor& G = gr.grad(self);
    Tensor& d = gr.mutable_grad(ia);
    const std::size_t c = P.cols();
    for (std::size_t r = 0; r < P.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += G[r * c + j] * P[r * c + j];
      for (std::size_t j = 0; j < c; ++j) d[r * c + j] += P[r * c + j] * (G[r * c + j] - dot);
    }
  });
}

Var logsumexp_rows(Var a) {
  const std::size_t ia = a.id();
  return a.graph().record(kernels::logsumexp_rows(a.value()), {ia}, [ia](Graph& gr, std::size_t self) {
    const Tensor P = kernels::softmax_rows(gr.value(ia));
    const Tensor& G = gr.grad(self);
    Tensor& d = gr.mutable_grad(ia);
    const std::size_t c = P.cols();
    for (std::size_t r = 0; r < P.rows(); ++r)
      for (std::size_t j = 0; j < c; ++j) d[r * c + j] += G[r] * P[r * c + j];
  });
}

Var sum_rows(Var a) {
  const Tensor& x = a.value();
  if (x.rank() != 2) throw std::invalid_argument("sum_rows: expected a matrix");
  Tensor out(Shape{x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double acc = 0.0;
    for (double v : x.row(r)) acc += v;
    out[r] = acc;
  }
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
    const Tensor& G = gr.grad(self);
    Tensor& d = gr.mutable_grad(ia);
    const std::size_t c = d.cols();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += G[i / c];
  });
}

Var gather_cols(Var a, std::span<const std::size_t> index) {
  const Tensor& x = a.value();
  if (x.rank() != 2 || index.size() != x.rows()) throw std::invalid_argument("gather_cols: index length must equal row count");
  Tensor out(Shape{x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (index[r] >= x.cols()) throw std::out_of_range("gather_cols: column index out of range");
    out[r] = x.at(r, index[r]);
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.graph().record(std::move(out), {ia}, [ia, idx = std::move(idx)](Graph& gr, std::size_t self) {
    const Tensor& G = gr.grad(self);
    Tensor& d = gr.mutable_grad(ia);
    for (std::size_t r = 0; r < idx.size(); ++r) d.at(r, idx[r]) += G[r];
  });
}

Var cross_entropy_rows(Var logits, std::span<const int> labels) {
  const Tensor& x = logits.value();
  if (x.rank() != 2 || labels.size() != x.rows()) {
    throw std::invalid_argument("cross_entropy_rows: label count must equal row count");
  }
  const int classes = static_cast<int>(x.cols());
  Tensor out(Shape{x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (labels[r] < 0 || labels[r] >= classes) {
      throw std::out_of_range("cross_entropy_rows: label " + std::to_string(labels[r]) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    out[r] = logsumexp(x.row(r)) - x.at(r, static_cast<std::size_t>(labels[r]));
  }
  const std::size_t ia = logits.id();
  std::vector<int> y(labels.begin(), labels.end());
  return logits.graph().record(std::move(out), {ia}, [ia, y = std::move(y)](Graph& gr, std::size_t self) {
    const Tensor P = kernels::softmax_rows(gr.value(ia));
    const Tensor& G = gr.grad(self);
    Tensor& d = gr.mutable_grad(ia);
    const std::size_t c = P.cols();
    for (std::size_t r = 0; r < P.rows(); ++r) {
      for (std::size_t j = 0; j < c; ++j) d[r * c + j] += G[r] * P[r * c + j];
      d[r * c + static_cast<std::size_t>(y[r])] -= G[r];
    }
  });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  const std::size_t ia = a.id();
  return a.graph().record(Tensor::scalar(acc), {ia}, [ia](Graph& gr, std::size_t self) {
    const double G = gr.grad(self)[0];
    Tensor& d = gr.mutable_grad(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += G;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  const std::size_t ia = a.id();
  return a.graph().record(Tensor::scalar(acc / n), {ia}, [ia, n](Graph& gr, std::size_t self) {
    const double G = gr.grad(self)[0] / n;
    Tensor& d = gr.mutable_grad(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += G;
  });
}

Var scale(Var a, double s) {
  const std::size_t ia = a.id();
  return a.graph().record(kernels::scale(a.value(), s), {ia}, [ia, s](Graph& gr, std::size_t self) {
    const Tensor& G = gr.grad(self);
    Tensor& d = gr.mutable_grad(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * G[i];
  });
}

}  // namespace exitnet
