#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace tvg {

class Bank;

// A trainable tensor. Address must stay stable while any Graph built on it
// is alive, so models hold Params by value and never reallocate them
// mid-step.
struct Param {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Param() = default;
  Param(std::string n, Eigen::MatrixXd v)
      : name(std::move(n)), value(std::move(v)) {
    grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(); }
};

// Handle into a Graph's tape. Only meaningful for the graph that made it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense matrices. One Graph per forward pass; ops
// append nodes, backward() walks the tape in reverse and accumulates into
// Param::grad. All ops validate operand shapes and throw on mismatch.
class Graph {
 public:
  Var constant(const Eigen::MatrixXd& m);
  Var scalar(double v);       // 1x1 constant
  Var leaf(Param& p);         // gradient sink

  // Elementwise and linear algebra.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var cmul(Var a, Var b);     // Hadamard
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var scale(Var a, double s);     // constant multiplier
  Var offset(Var a, double s);    // constant addend
  Var mul_scalar(Var a, Var s);   // s is 1x1, tracked
  Var div_scalar(Var a, Var s);   // s is 1x1, tracked

  // Broadcasts over rows: v is 1 x cols(a).
  Var add_rowvec(Var a, Var v);
  Var mul_rowvec(Var a, Var v);

  // Shape ops.
  Var hcat(Var a, Var b);
  Var hcat(const std::vector<Var>& parts);
  Var vcat(Var a, Var b);
  Var vcat(const std::vector<Var>& parts);
  Var rows(Var a, long start, long count);
  Var cols(Var a, long start, long count);
  // Rows shifted by k (positive = toward higher indices), zero filled.
  Var shift_rows(Var a, long k);

  // Nonlinearities.
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var square(Var a);
  Var relu(Var a);
  Var clamp(Var a, double lo, double hi);
  Var maxs(Var a, double s);  // elementwise max with a constant

  // Reductions.
  Var sum(Var a);      // 1x1
  Var mean(Var a);     // 1x1
  Var rowsum(Var a);   // rows x 1

  // Row-wise stable softmax.
  Var softmax_rows(Var a);

  // Summed token cross-entropy: logits is L x V, targets has L entries in
  // [0, V). Returns 1x1. Fused for numerical stability.
  Var cross_entropy_rows(Var logits, const std::vector<int>& targets);

  const Eigen::MatrixXd& value(Var v) const;
  double scalar_value(Var v) const;  // requires 1x1

  // Seeds d(root)/d(root) = 1 and accumulates into every reachable
  // Param::grad. root must be 1x1. Call at most once per graph.
  void backward(Var root);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool needs_grad = false;
    std::function<void(Graph&, Node&)> back;  // empty for leaves/constants
  };

  Var push(Eigen::MatrixXd value, bool needs_grad,
           std::function<void(Graph&, Node&)> back);
  Node& node(Var v);
  const Node& node(Var v) const;
  void add_grad(int id, const Eigen::MatrixXd& g);

  std::vector<Node> nodes_;
  bool backward_done_ = false;

  friend struct GraphTestPeer;
};

// Adam with bias correction. Moments are serialized by parameter name so
// resumed runs continue bit-exactly.
class Adam {
 public:
  Adam(std::vector<Param*> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  uint64_t steps_taken() const { return t_; }

  void save_state(Bank& bank, const std::string& prefix) const;
  void load_state(const Bank& bank, const std::string& prefix);

 private:
  std::vector<Param*> params_;
  std::vector<Eigen::MatrixXd> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  uint64_t t_ = 0;
};

}  // namespace tvg
