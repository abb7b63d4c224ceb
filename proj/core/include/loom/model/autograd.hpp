#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace loom::scheduler {
class AttentionMask;
}

namespace loom::model {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named trainable array with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool decay = true;  // decoupled weight decay applies
  bool trainable = true;
};

/// Insertion-ordered parameter collection. Iteration order is the
/// serialization order and the optimizer order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Matrix value, bool decay = true);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order and
/// differentiated in reverse order by backward().
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var input(Matrix value);  // leaf that records a gradient
  Var param(Parameter& p);

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and accumulates parameter grads.
  void backward(Var root);

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  using BackwardFn = std::function<void(Graph&, const Matrix& out_grad)>;

  /// Appends an op result. `backward` receives this node's gradient and must
  /// route it to the inputs through accumulate().
  Var push(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var push(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  /// Adds `g` into the gradient of `v` if `v` requires one.
  void accumulate(Var v, const Matrix& g);
  template <typename Fn>
  void accumulate_with(Var v, Fn&& fn) {
    auto& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    fn(n.grad);
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

// Differentiable ops. All inputs must belong to the same Graph.
Var matmul(Var a, Var b);      // a * b
Var matmul_nt(Var a, Var b);   // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_row(Var a, Var row);   // broadcast a 1xC row over every row of a
Var mul(Var a, Var b);         // elementwise
Var scale(Var a, double s);
Var gelu(Var a);               // tanh approximation
Var sigmoid(Var a);
Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var table, std::span<const int> ids);
/// out.reshaped()[i] = a.reshaped()[index[i]] (row-major flat indices).
Var gather(Var a, std::span<const int> index, Eigen::Index rows, Eigen::Index cols);
/// Row softmax restricted to allowed keys; disallowed entries are exactly 0.
Var masked_softmax(Var scores, const scheduler::AttentionMask& mask);
Var row_softmax(Var scores);
/// Sum over rows of -log softmax(logits)[target]; returns 1x1.
Var cross_entropy_sum(Var logits, std::span<const int> targets);
/// Sum of squared differences to a constant target; returns 1x1.
Var squared_error_sum(Var pred, const Matrix& target);
Var mean_all(Var a);

}  // namespace loom::model
