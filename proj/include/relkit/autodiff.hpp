#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "relkit/rng.hpp"
#include "relkit/tensor.hpp"

namespace relkit {

namespace detail {

inline Tensor gaussian(Rng& rng, std::vector<int> shape, double stddev) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, stddev);
  return t;
}

}  // namespace detail

// Reverse-mode autodiff over a per-sample dynamic graph. Nodes live on a
// Tape and are appended in topological order, so backward is a single
// reverse sweep. Build a fresh tape per loss evaluation.

struct Node {
  Tensor value;
  Tensor grad;  // undefined until backward touches this node
  std::vector<Node*> parents;
  std::function<void(Node&)> backward;
  std::string name;
  bool trainable = false;
};

using GradientMap = std::map<std::string, Tensor>;

class Var;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, std::string name = {}, bool trainable = false);

  Node* push(const char* op, Tensor value, std::vector<Node*> parents,
             std::function<void(Node&)> backward) {
    if (!value.all_finite()) {
      throw NumericError(std::string(op) + ": non-finite value in result");
    }
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backward = std::move(backward);
    return &n;
  }

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse creation order.
  // Returns gradients for every trainable leaf on the tape; leaves that are
  // not reachable from the loss get zero gradients.
  GradientMap backward(const Var& loss);

  static void accumulate(Node* n, const Tensor& g) {
    if (!n->grad.defined()) n->grad = Tensor(n->value.shape());
    n->grad += g;
  }

 private:
  std::deque<Node> nodes_;
};

class Var {
 public:
  Var() = default;
  Var(Node* node, Tape* tape) : node_(node), tape_(tape) {}

  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Node* node() const { return node_; }
  Tape& tape() const { return *tape_; }
  bool defined() const { return node_ != nullptr; }

 private:
  Node* node_ = nullptr;
  Tape* tape_ = nullptr;
};

inline Var Tape::leaf(Tensor value, std::string name, bool trainable) {
  Node* n = push("leaf", std::move(value), {}, nullptr);
  n->name = std::move(name);
  n->trainable = trainable;
  return Var(n, this);
}

inline GradientMap Tape::backward(const Var& loss) {
  if (loss.value().size() != 1 || loss.value().rank() != 0) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     loss.value().shape_str());
  }
  loss.node()->grad = Tensor::scalar(1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->grad.defined() && it->backward) it->backward(*it);
  }
  GradientMap grads;
  for (const Node& n : nodes_) {
    if (!n.trainable) continue;
    Tensor g = n.grad.defined() ? n.grad : Tensor(n.value.shape());
    auto it = grads.find(n.name);
    if (it == grads.end()) {
      grads.emplace(n.name, std::move(g));
    } else {
      it->second += g;
    }
  }
  return grads;
}

namespace detail {

inline Tape& same_tape(const char* op, const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) {
    throw Error(std::string(op) + ": operands belong to different tapes");
  }
  return a.tape();
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

}  // namespace detail

// ---- arithmetic -----------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::same_tape("add", a, b);
  detail::require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  out += b.value();
  Node* n = t.push("add", std::move(out), {a.node(), b.node()}, [](Node& self) {
    Tape::accumulate(self.parents[0], self.grad);
    Tape::accumulate(self.parents[1], self.grad);
  });
  return Var(n, &t);
}

// mat (l x h) plus a length-h vector added to every row; the only broadcast
// the model needs.
inline Var add_row_broadcast(const Var& mat, const Var& vec) {
  Tape& t = detail::same_tape("add_row_broadcast", mat, vec);
  const Tensor& m = mat.value();
  const Tensor& v = vec.value();
  if (m.rank() != 2 || v.rank() != 1 || m.cols() != v.shape()[0]) {
    throw ShapeError("add_row_broadcast: shape " + m.shape_str() + " vs " +
                     v.shape_str());
  }
  Tensor out = m;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out.at(i, j) += v.at(j);
  Node* n = t.push("add_row_broadcast", std::move(out), {mat.node(), vec.node()},
                   [](Node& self) {
                     Tape::accumulate(self.parents[0], self.grad);
                     const Tensor& g = self.grad;
                     Tensor gv({g.cols()});
                     for (int i = 0; i < g.rows(); ++i)
                       for (int j = 0; j < g.cols(); ++j) gv.at(j) += g.at(i, j);
                     Tape::accumulate(self.parents[1], gv);
                   });
  return Var(n, &t);
}

inline Var mul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape("mul", a, b);
  detail::require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
  Node* n = t.push("mul", std::move(out), {a.node(), b.node()}, [](Node& self) {
    const Tensor& g = self.grad;
    Tensor ga = g, gb = g;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      ga.data()[i] *= self.parents[1]->value.data()[i];
      gb.data()[i] *= self.parents[0]->value.data()[i];
    }
    Tape::accumulate(self.parents[0], ga);
    Tape::accumulate(self.parents[1], gb);
  });
  return Var(n, &t);
}

inline Var scale(const Var& a, double c) {
  Tensor out = a.value();
  out *= c;
  Node* n = a.tape().push("scale", std::move(out), {a.node()}, [c](Node& self) {
    Tensor g = self.grad;
    g *= c;
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

// Elementwise addition of a non-trainable constant (attention bias mask).
inline Var add_const(const Var& a, const Tensor& c) {
  detail::require_same_shape("add_const", a.value(), c);
  Tensor out = a.value();
  out += c;
  Node* n = a.tape().push("add_const", std::move(out), {a.node()}, [](Node& self) {
    Tape::accumulate(self.parents[0], self.grad);
  });
  return Var(n, &a.tape());
}

// Elementwise product with a non-trainable constant (mask / label matrices).
inline Var mul_const(const Var& a, const Tensor& c) {
  detail::require_same_shape("mul_const", a.value(), c);
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.size(); ++i) out.data()[i] *= c.data()[i];
  Node* n = a.tape().push("mul_const", std::move(out), {a.node()}, [c](Node& self) {
    Tensor g = self.grad;
    for (std::int64_t i = 0; i < g.size(); ++i) g.data()[i] *= c.data()[i];
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

// ---- linear algebra --------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape("matmul", a, b);
  Tensor out = kernel::matmul(a.value(), b.value());
  Node* n = t.push("matmul", std::move(out), {a.node(), b.node()}, [](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    Tape::accumulate(self.parents[0], kernel::matmul(g, kernel::transpose(bv)));
    Tape::accumulate(self.parents[1], kernel::matmul(kernel::transpose(av), g));
  });
  return Var(n, &t);
}

inline Var transpose(const Var& a) {
  Tensor out = kernel::transpose(a.value());
  Node* n = a.tape().push("transpose", std::move(out), {a.node()}, [](Node& self) {
    Tape::accumulate(self.parents[0], kernel::transpose(self.grad));
  });
  return Var(n, &a.tape());
}

// ---- slicing / assembly ----------------------------------------------------

// Row r of a matrix as a vector (CLS extraction).
inline Var row(const Var& a, int r) {
  kernel::require_matrix("row", a.value());
  if (r < 0 || r >= a.value().rows()) {
    throw ShapeError("row: index out of range for shape " + a.value().shape_str());
  }
  Tensor out({a.value().cols()});
  for (int j = 0; j < a.value().cols(); ++j) out.at(j) = a.value().at(r, j);
  Node* n = a.tape().push("row", std::move(out), {a.node()}, [r](Node& self) {
    Tensor g(self.parents[0]->value.shape());
    for (int j = 0; j < g.cols(); ++j) g.at(r, j) = self.grad.at(j);
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

// Rows [r0, r1) of a matrix (position-embedding slice).
inline Var rows(const Var& a, int r0, int r1) {
  kernel::require_matrix("rows", a.value());
  if (r0 < 0 || r1 <= r0 || r1 > a.value().rows()) {
    throw ShapeError("rows: bad range for shape " + a.value().shape_str());
  }
  Tensor out({r1 - r0, a.value().cols()});
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < a.value().cols(); ++j) out.at(i - r0, j) = a.value().at(i, j);
  Node* n = a.tape().push("rows", std::move(out), {a.node()}, [r0](Node& self) {
    Tensor g(self.parents[0]->value.shape());
    for (int i = 0; i < self.grad.rows(); ++i)
      for (int j = 0; j < self.grad.cols(); ++j) g.at(r0 + i, j) = self.grad.at(i, j);
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

// Columns [c0, c1) of a matrix (per-head split).
inline Var col_slice(const Var& a, int c0, int c1) {
  kernel::require_matrix("col_slice", a.value());
  if (c0 < 0 || c1 <= c0 || c1 > a.value().cols()) {
    throw ShapeError("col_slice: bad range for shape " + a.value().shape_str());
  }
  Tensor out({a.value().rows(), c1 - c0});
  for (int i = 0; i < a.value().rows(); ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a.value().at(i, j);
  Node* n = a.tape().push("col_slice", std::move(out), {a.node()}, [c0](Node& self) {
    Tensor g(self.parents[0]->value.shape());
    for (int i = 0; i < self.grad.rows(); ++i)
      for (int j = 0; j < self.grad.cols(); ++j) g.at(i, c0 + j) = self.grad.at(i, j);
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

// Horizontal concat of matrices with equal row counts (head merge).
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = parts[0].tape();
  const int r = parts[0].value().rows();
  int total = 0;
  std::vector<Node*> parents;
  for (const Var& p : parts) {
    kernel::require_matrix("concat_cols", p.value());
    if (p.value().rows() != r) {
      throw ShapeError("concat_cols: shape " + parts[0].value().shape_str() + " vs " +
                       p.value().shape_str());
    }
    total += p.value().cols();
    parents.push_back(p.node());
  }
  Tensor out({r, total});
  int off = 0;
  for (const Var& p : parts) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < p.value().cols(); ++j) out.at(i, off + j) = p.value().at(i, j);
    off += p.value().cols();
  }
  Node* n = t.push("concat_cols", std::move(out), std::move(parents), [](Node& self) {
    int off2 = 0;
    for (Node* parent : self.parents) {
      const int pc = parent->value.cols();
      Tensor g(parent->value.shape());
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < pc; ++j) g.at(i, j) = self.grad.at(i, off2 + j);
      Tape::accumulate(parent, g);
      off2 += pc;
    }
  });
  return Var(n, &t);
}

// Gathers table rows by token id; gradients scatter-add back into the table.
inline Var embedding_lookup(const Var& table, const std::vector<int>& ids) {
  kernel::require_matrix("embedding_lookup", table.value());
  const int v = table.value().rows(), h = table.value().cols();
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw ShapeError("embedding_lookup: id " + std::to_string(id) +
                       " outside table of " + std::to_string(v) + " rows");
    }
  }
  Tensor out({static_cast<int>(ids.size()), h});
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (int j = 0; j < h; ++j) out.at(static_cast<int>(i), j) = table.value().at(ids[i], j);
  Node* n = table.tape().push("embedding_lookup", std::move(out), {table.node()},
                              [ids](Node& self) {
                                Tensor g(self.parents[0]->value.shape());
                                for (std::size_t i = 0; i < ids.size(); ++i)
                                  for (int j = 0; j < g.cols(); ++j)
                                    g.at(ids[i], j) += self.grad.at(static_cast<int>(i), j);
                                Tape::accumulate(self.parents[0], g);
                              });
  return Var(n, &table.tape());
}

// ---- elementwise nonlinearities ---------------------------------------------

inline Var sigmoid(const Var& a) {
  Tensor out = kernel::map(a.value(), [](double x) { return kernel::sigmoid(x); });
  Node* n = a.tape().push("sigmoid", std::move(out), {a.node()}, [](Node& self) {
    Tensor g = self.grad;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const double y = self.value.data()[i];
      g.data()[i] *= y * (1.0 - y);
    }
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

inline Var softplus(const Var& a) {
  Tensor out = kernel::map(a.value(), [](double x) { return kernel::softplus(x); });
  Node* n = a.tape().push("softplus", std::move(out), {a.node()}, [](Node& self) {
    Tensor g = self.grad;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      g.data()[i] *= kernel::sigmoid(self.parents[0]->value.data()[i]);
    }
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

inline Var log(const Var& a) {
  for (std::int64_t i = 0; i < a.value().size(); ++i) {
    if (a.value().data()[i] <= 0.0) {
      throw NumericError("log: nonpositive argument");
    }
  }
  Tensor out = kernel::map(a.value(), [](double x) { return std::log(x); });
  Node* n = a.tape().push("log", std::move(out), {a.node()}, [](Node& self) {
    Tensor g = self.grad;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      g.data()[i] /= self.parents[0]->value.data()[i];
    }
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

inline Var gelu(const Var& a) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  Tensor out = kernel::map(a.value(), [=](double x) {
    return x * 0.5 * (1.0 + std::erf(x * inv_sqrt2));
  });
  Node* n = a.tape().push("gelu", std::move(out), {a.node()}, [=](Node& self) {
    Tensor g = self.grad;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const double x = self.parents[0]->value.data()[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
      g.data()[i] *= cdf + x * pdf;
    }
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

// ---- reductions -------------------------------------------------------------

inline Var sum(const Var& a) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a.value().size(); ++i) s += a.value().data()[i];
  Node* n = a.tape().push("sum", Tensor::scalar(s), {a.node()}, [](Node& self) {
    Tensor g = Tensor::full(self.parents[0]->value.shape(), self.grad.value());
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

inline Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.value().size());
  double s = 0.0;
  for (std::int64_t i = 0; i < a.value().size(); ++i) s += a.value().data()[i];
  Node* n = a.tape().push("mean", Tensor::scalar(s * inv), {a.node()}, [inv](Node& self) {
    Tensor g = Tensor::full(self.parents[0]->value.shape(), self.grad.value() * inv);
    Tape::accumulate(self.parents[0], g);
  });
  return Var(n, &a.tape());
}

// ---- row-structured ops -----------------------------------------------------

inline Var softmax_rows(const Var& a) {
  kernel::require_matrix("softmax_rows", a.value());
  Tensor out = a.value();
  for (int i = 0; i < out.rows(); ++i) {
    double mx = out.at(i, 0);
    for (int j = 1; j < out.cols(); ++j) mx = std::max(mx, out.at(i, j));
    double denom = 0.0;
    for (int j = 0; j < out.cols(); ++j) {
      out.at(i, j) = std::exp(out.at(i, j) - mx);
      denom += out.at(i, j);
    }
    for (int j = 0; j < out.cols(); ++j) out.at(i, j) /= denom;
  }
  Node* n = a.tape().push("softmax_rows", std::move(out), {a.node()}, [](Node& self) {
    const Tensor& y = self.value;
    const Tensor& g = self.grad;
    Tensor gx(y.shape());
    for (int i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
      for (int j = 0; j < y.cols(); ++j) gx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
    }
    Tape::accumulate(self.parents[0], gx);
  });
  return Var(n, &a.tape());
}

// Per-row layer normalization with learned gain/offset vectors.
inline Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta,
                           double eps = 1e-5) {
  kernel::require_matrix("layer_norm_rows", x.value());
  const int h = x.value().cols();
  if (gamma.value().rank() != 1 || gamma.value().shape()[0] != h ||
      beta.value().rank() != 1 || beta.value().shape()[0] != h) {
    throw ShapeError("layer_norm_rows: shape " + x.value().shape_str() + " vs " +
                     gamma.value().shape_str());
  }
  Tape& t = detail::same_tape("layer_norm_rows", x, gamma);
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  std::vector<double> inv_std(static_cast<std::size_t>(xv.rows()));
  std::vector<double> mean_row(static_cast<std::size_t>(xv.rows()));
  for (int i = 0; i < xv.rows(); ++i) {
    double mu = 0.0;
    for (int j = 0; j < h; ++j) mu += xv.at(i, j);
    mu /= h;
    double var = 0.0;
    for (int j = 0; j < h; ++j) {
      const double d = xv.at(i, j) - mu;
      var += d * d;
    }
    var /= h;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(i)] = inv;
    mean_row[static_cast<std::size_t>(i)] = mu;
    for (int j = 0; j < h; ++j) {
      out.at(i, j) = (xv.at(i, j) - mu) * inv * gamma.value().at(j) + beta.value().at(j);
    }
  }
  Node* n = t.push(
      "layer_norm_rows", std::move(out), {x.node(), gamma.node(), beta.node()},
      [inv_std, mean_row, h](Node& self) {
        const Tensor& xv2 = self.parents[0]->value;
        const Tensor& gv = self.parents[1]->value;
        const Tensor& g = self.grad;
        Tensor gx(xv2.shape());
        Tensor ggamma({h});
        Tensor gbeta({h});
        for (int i = 0; i < xv2.rows(); ++i) {
          const double inv = inv_std[static_cast<std::size_t>(i)];
          const double mu = mean_row[static_cast<std::size_t>(i)];
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (int j = 0; j < h; ++j) {
            const double xhat = (xv2.at(i, j) - mu) * inv;
            const double dxhat = g.at(i, j) * gv.at(j);
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            ggamma.at(j) += g.at(i, j) * xhat;
            gbeta.at(j) += g.at(i, j);
          }
          for (int j = 0; j < h; ++j) {
            const double xhat = (xv2.at(i, j) - mu) * inv;
            const double dxhat = g.at(i, j) * gv.at(j);
            gx.at(i, j) = inv * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / h);
          }
        }
        Tape::accumulate(self.parents[0], gx);
        Tape::accumulate(self.parents[1], ggamma);
        Tape::accumulate(self.parents[2], gbeta);
      });
  return Var(n, &t);
}

// ---- parameter registry -------------------------------------------------------

// Named trainable tensors in insertion order. Insertion order fixes the
// checkpoint layout and the optimizer's iteration order.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init) {
    auto [it, inserted] = values_.emplace(name, std::move(init));
    if (!inserted) throw Error("ParamStore: duplicate parameter " + name);
    order_.push_back(name);
    return it->second;
  }

  bool has(const std::string& name) const { return values_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw Error("ParamStore: unknown parameter " + name);
    return it->second;
  }

  const Tensor& at(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw Error("ParamStore: unknown parameter " + name);
    return it->second;
  }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  std::int64_t element_count() const {
    std::int64_t n = 0;
    for (const auto& name : order_) n += values_.at(name).size();
    return n;
  }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> values_;
};

// Per-tape cache so each parameter appears as exactly one leaf per graph and
// its gradient accumulates in one place.
class GraphParams {
 public:
  GraphParams(Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

  Var operator[](const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    Var v = tape_.leaf(store_.at(name), name, true);
    cache_.emplace(name, v);
    return v;
  }

 private:
  Tape& tape_;
  const ParamStore& store_;
  std::unordered_map<std::string, Var> cache_;
};

}  // namespace relkit
