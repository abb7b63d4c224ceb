#include "loom/model/autograd.hpp"

#include <cmath>

#include "loom/core/error.hpp"
#include "loom/scheduler/attention_mask.hpp"

namespace loom::model {

// ---------------------------------------------------------------- parameters

Parameter& ParameterStore::add(const std::string& name, Matrix value, bool decay) {
  if (index_.contains(name)) throw Error("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix::Zero(value.rows(), value.cols());
  p->value = std::move(value);
  p->decay = decay;
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return *params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return *params_[it->second];
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

// --------------------------------------------------------------------- graph

const Matrix& Var::value() const { return graph->value(id); }
const Matrix& Var::grad() const { return graph->grad(id); }

Var Graph::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::input(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, grad_enabled_});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, grad_enabled_ && p.trainable});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::push(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
              std::move(backward));
}

Var Graph::push(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  bool rg = false;
  if (grad_enabled_) {
    for (const auto& v : inputs) {
      if (v.graph != this) throw Error("op inputs belong to a different graph");
      rg = rg || requires_grad(v.id);
    }
  }
  Node n{std::move(value), {}, {}, nullptr, rg};
  if (rg) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Graph::accumulate(Var v, const Matrix& g) {
  accumulate_with(v, [&](Matrix& acc) { acc += g; });
}

void Graph::backward(Var root) {
  if (!grad_enabled_) throw Error("backward on a graph without gradients");
  if (root.value().size() != 1) throw ShapeError("backward root must be 1x1");
  auto& r = nodes_[static_cast<std::size_t>(root.id)];
  if (!r.requires_grad) return;
  r.grad = Matrix::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.param) n.param->grad += n.grad;
    if (n.backward) n.backward(*this, n.grad);
  }
}

// ----------------------------------------------------------------------- ops

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimension mismatch");
  Matrix out = a.value() * b.value();
  return a.graph->push(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& d) {
    if (g.requires_grad(a.id)) g.accumulate_with(a, [&](Matrix& acc) { acc.noalias() += d * b.value().transpose(); });
    if (g.requires_grad(b.id)) g.accumulate_with(b, [&](Matrix& acc) { acc.noalias() += a.value().transpose() * d; });
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimension mismatch");
  Matrix out = a.value() * b.value().transpose();
  return a.graph->push(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& d) {
    if (g.requires_grad(a.id)) g.accumulate_with(a, [&](Matrix& acc) { acc.noalias() += d * b.value(); });
    if (g.requires_grad(b.id)) g.accumulate_with(b, [&](Matrix& acc) { acc.noalias() += d.transpose() * a.value(); });
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value() + b.value();
  return a.graph->push(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& d) {
    g.accumulate(a, d);
    g.accumulate(b, d);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value() - b.value();
  return a.graph->push(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& d) {
    g.accumulate(a, d);
    g.accumulate_with(b, [&](Matrix& acc) { acc -= d; });
  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: row shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.graph->push(std::move(out), {a, row}, [a, row](Graph& g, const Matrix& d) {
    g.accumulate(a, d);
    g.accumulate_with(row, [&](Matrix& acc) { acc += d.colwise().sum(); });
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return a.graph->push(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& d) {
    g.accumulate_with(a, [&](Matrix& acc) { acc += d.cwiseProduct(b.value()); });
    g.accumulate_with(b, [&](Matrix& acc) { acc += d.cwiseProduct(a.value()); });
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value() * s;
  return a.graph->push(std::move(out), {a}, [a, s](Graph& g, const Matrix& d) {
    g.accumulate_with(a, [&](Matrix& acc) { acc += d * s; });
  });
}

Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
  return a.graph->push(std::move(out), {a}, [a](Graph& g, const Matrix& d) {
    const Matrix& x = a.value();
    Matrix local = x.unaryExpr([](double v) {
      const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    });
    g.accumulate_with(a, [&](Matrix& acc) { acc += d.cwiseProduct(local); });
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  const int self = static_cast<int>(a.graph->size());
  return a.graph->push(std::move(out), {a}, [a, self](Graph& g, const Matrix& d) {
    const Matrix& y = g.value(self);
    g.accumulate_with(a, [&](Matrix& acc) {
      acc += d.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
    });
  });
}

Var layer_norm(Var a, Var gamma, Var beta, double eps) {
  const Matrix& x = a.value();
  const auto n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw ShapeError("layer_norm: affine shape mismatch");
  }
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return a.graph->push(
      std::move(out), {a, gamma, beta},
      [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g,
                                                                            const Matrix& d) {
        const auto n = static_cast<double>(xhat.cols());
        g.accumulate_with(gamma, [&](Matrix& acc) { acc += d.cwiseProduct(xhat).colwise().sum(); });
        g.accumulate_with(beta, [&](Matrix& acc) { acc += d.colwise().sum(); });
        g.accumulate_with(a, [&](Matrix& acc) {
          Matrix dxhat = d.array().rowwise() * gamma.value().row(0).array();
          for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
            const double s1 = dxhat.row(r).sum();
            const double s2 = dxhat.row(r).dot(xhat.row(r));
            acc.row(r).array() +=
                (inv_std(r) / n) * (n * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2);
          }
        });
      });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows out of range");
  Matrix out = a.value().middleRows(start, count);
  return a.graph->push(std::move(out), {a}, [a, start, count](Graph& g, const Matrix& d) {
    g.accumulate_with(a, [&](Matrix& acc) { acc.middleRows(start, count) += d; });
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols out of range");
  Matrix out = a.value().middleCols(start, count);
  return a.graph->push(std::move(out), {a}, [a, start, count](Graph& g, const Matrix& d) {
    g.accumulate_with(a, [&](Matrix& acc) { acc.middleCols(start, count) += d; });
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  Eigen::Index rows = 0;
  const auto cols = parts[0].cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].graph->push(std::move(out), parts, [inputs](Graph& g, const Matrix& d) {
    Eigen::Index r = 0;
    for (const auto& p : inputs) {
      const auto n = p.rows();
      g.accumulate_with(p, [&](Matrix& acc) { acc += d.middleRows(r, n); });
      r += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  Eigen::Index cols = 0;
  const auto rows = parts[0].rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].graph->push(std::move(out), parts, [inputs](Graph& g, const Matrix& d) {
    Eigen::Index c = 0;
    for (const auto& p : inputs) {
      const auto n = p.cols();
      g.accumulate_with(p, [&](Matrix& acc) { acc += d.middleCols(c, n); });
      c += n;
    }
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw RangeError("gather_rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return table.graph->push(std::move(out), {table}, [table, idx](Graph& g, const Matrix& d) {
    g.accumulate_with(table, [&](Matrix& acc) {
      for (std::size_t i = 0; i < idx.size(); ++i) acc.row(idx[i]) += d.row(static_cast<Eigen::Index>(i));
    });
  });
}

Var gather(Var a, std::span<const int> index, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(index.size()) != rows * cols) throw ShapeError("gather: index size");
  Matrix out(rows, cols);
  const double* src = a.value().data();
  const auto n = a.value().size();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= n) throw RangeError("gather: index out of range");
    out.data()[i] = src[index[i]];
  }
  std::vector<int> idx(index.begin(), index.end());
  return a.graph->push(std::move(out), {a}, [a, idx](Graph& g, const Matrix& d) {
    g.accumulate_with(a, [&](Matrix& acc) {
      for (std::size_t i = 0; i < idx.size(); ++i) acc.data()[idx[i]] += d.data()[i];
    });
  });
}

namespace {

Var softmax_impl(Var scores, const scheduler::AttentionMask* mask) {
  const Matrix& s = scores.value();
  if (mask && (static_cast<Eigen::Index>(mask->size()) != s.rows() || s.rows() != s.cols())) {
    throw ShapeError("masked_softmax: mask does not match score matrix");
  }
  Matrix p = Matrix::Zero(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const std::uint8_t* allowed = mask ? mask->row(static_cast<std::size_t>(r)) : nullptr;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      if (!allowed || allowed[c]) mx = std::max(mx, s(r, c));
    }
    if (mx == -std::numeric_limits<double>::infinity()) continue;  // fully masked row
    double z = 0.0;
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      if (!allowed || allowed[c]) {
        p(r, c) = std::exp(s(r, c) - mx);
        z += p(r, c);
      }
    }
    p.row(r) /= z;
  }
  const int self = static_cast<int>(scores.graph->size());
  return scores.graph->push(std::move(p), {scores}, [scores, self](Graph& g, const Matrix& d) {
    const Matrix& p = g.value(self);
    g.accumulate_with(scores, [&](Matrix& acc) {
      const Eigen::VectorXd dots = d.cwiseProduct(p).rowwise().sum();
      acc.array() += p.array() * (d.array().colwise() - dots.array());
    });
  });
}

}  // namespace

Var masked_softmax(Var scores, const scheduler::AttentionMask& mask) {
  return softmax_impl(scores, &mask);
}

Var row_softmax(Var scores) { return softmax_impl(scores, nullptr); }

Var cross_entropy_sum(Var logits, std::span<const int> targets) {
  const Matrix& z = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != z.rows()) {
    throw ShapeError("cross_entropy: one target per row required");
  }
  Matrix probs(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= z.cols()) throw RangeError("cross_entropy: target out of range");
    const double mx = z.row(r).maxCoeff();
    probs.row(r) = (z.row(r).array() - mx).exp();
    const double sum = probs.row(r).sum();
    probs.row(r) /= sum;
    loss += -(z(r, t) - mx - std::log(sum));
  }
  std::vector<int> tg(targets.begin(), targets.end());
  Matrix out(1, 1);
  out(0, 0) = loss;
  return logits.graph->push(std::move(out), {logits},
                            [logits, tg, probs = std::move(probs)](Graph& g, const Matrix& d) {
                              g.accumulate_with(logits, [&](Matrix& acc) {
                                Matrix local = probs;
                                for (std::size_t r = 0; r < tg.size(); ++r) local(static_cast<Eigen::Index>(r), tg[r]) -= 1.0;
                                acc += d(0, 0) * local;
                              });
                            });
}

Var squared_error_sum(Var pred, const Matrix& target) {
  require_same_shape(pred.value(), target, "squared_error_sum");
  Matrix diff = pred.value() - target;
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm();
  return pred.graph->push(std::move(out), {pred}, [pred, diff = std::move(diff)](Graph& g, const Matrix& d) {
    g.accumulate_with(pred, [&](Matrix& acc) { acc += (2.0 * d(0, 0)) * diff; });
  });
}

Var mean_all(Var a) {
  Matrix out(1, 1);
  const auto n = static_cast<double>(a.value().size());
  out(0, 0) = a.value().sum() / n;
  return a.graph->push(std::move(out), {a}, [a, n](Graph& g, const Matrix& d) {
    g.accumulate_with(a, [&](Matrix& acc) { acc.array() += d(0, 0) / n; });
  });
}

}  // namespace loom::model
