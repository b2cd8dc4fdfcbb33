#include "tvg/autodiff.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "tvg/matrix_io.hpp"

namespace tvg {

namespace {

[[noreturn]] void shape_fail(const std::string& op, const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& b) {
  throw std::runtime_error("autodiff: " + op + " shape mismatch " +
                           std::to_string(a.rows()) + "x" +
                           std::to_string(a.cols()) + " vs " +
                           std::to_string(b.rows()) + "x" +
                           std::to_string(b.cols()));
}

}  // namespace

Var Graph::push(Eigen::MatrixXd value, bool needs_grad,
                std::function<void(Graph&, Node&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Graph::Node& Graph::node(Var v) {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw std::runtime_error("autodiff: invalid var handle");
  }
  return nodes_[static_cast<size_t>(v.id)];
}

const Graph::Node& Graph::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw std::runtime_error("autodiff: invalid var handle");
  }
  return nodes_[static_cast<size_t>(v.id)];
}

void Graph::add_grad(int id, const Eigen::MatrixXd& g) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Var Graph::constant(const Eigen::MatrixXd& m) {
  return push(m, false, nullptr);
}

Var Graph::scalar(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return push(std::move(m), false, nullptr);
}

Var Graph::leaf(Param& p) {
  Param* pp = &p;
  return push(p.value, true, [pp](Graph&, Node& n) {
    if (pp->grad.size() == 0) {
      pp->grad = Eigen::MatrixXd::Zero(pp->value.rows(), pp->value.cols());
    }
    pp->grad += n.grad;
  });
}

Var Graph::add(Var a, Var b) {
  const auto &va = node(a).value, &vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) shape_fail("add", va, vb);
  bool ng = node(a).needs_grad || node(b).needs_grad;
  int ia = a.id, ib = b.id;
  return push(va + vb, ng, [ia, ib](Graph& g, Node& n) {
    g.add_grad(ia, n.grad);
    g.add_grad(ib, n.grad);
  });
}

Var Graph::sub(Var a, Var b) {
  const auto &va = node(a).value, &vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) shape_fail("sub", va, vb);
  bool ng = node(a).needs_grad || node(b).needs_grad;
  int ia = a.id, ib = b.id;
  return push(va - vb, ng, [ia, ib](Graph& g, Node& n) {
    g.add_grad(ia, n.grad);
    g.add_grad(ib, -n.grad);
  });
}

Var Graph::neg(Var a) { return scale(a, -1.0); }

Var Graph::cmul(Var a, Var b) {
  const auto &va = node(a).value, &vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) shape_fail("cmul", va, vb);
  bool ng = node(a).needs_grad || node(b).needs_grad;
  int ia = a.id, ib = b.id;
  return push(va.cwiseProduct(vb), ng, [ia, ib](Graph& g, Node& n) {
    g.add_grad(ia, n.grad.cwiseProduct(g.nodes_[size_t(ib)].value));
    g.add_grad(ib, n.grad.cwiseProduct(g.nodes_[size_t(ia)].value));
  });
}

Var Graph::matmul(Var a, Var b) {
  const auto &va = node(a).value, &vb = node(b).value;
  if (va.cols() != vb.rows()) shape_fail("matmul", va, vb);
  bool ng = node(a).needs_grad || node(b).needs_grad;
  int ia = a.id, ib = b.id;
  return push(va * vb, ng, [ia, ib](Graph& g, Node& n) {
    g.add_grad(ia, n.grad * g.nodes_[size_t(ib)].value.transpose());
    g.add_grad(ib, g.nodes_[size_t(ia)].value.transpose() * n.grad);
  });
}

Var Graph::transpose(Var a) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  return push(node(a).value.transpose(), ng, [ia](Graph& g, Node& n) {
    g.add_grad(ia, n.grad.transpose());
  });
}

Var Graph::scale(Var a, double s) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  return push(node(a).value * s, ng, [ia, s](Graph& g, Node& n) {
    g.add_grad(ia, n.grad * s);
  });
}

Var Graph::offset(Var a, double s) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  return push(node(a).value.array() + s, ng, [ia](Graph& g, Node& n) {
    g.add_grad(ia, n.grad);
  });
}

Var Graph::mul_scalar(Var a, Var s) {
  const auto& vs = node(s).value;
  if (vs.rows() != 1 || vs.cols() != 1) {
    throw std::runtime_error("autodiff: mul_scalar needs a 1x1 scalar operand");
  }
  bool ng = node(a).needs_grad || node(s).needs_grad;
  int ia = a.id, is = s.id;
  return push(node(a).value * vs(0, 0), ng, [ia, is](Graph& g, Node& n) {
    double sv = g.nodes_[size_t(is)].value(0, 0);
    g.add_grad(ia, n.grad * sv);
    Eigen::MatrixXd ds(1, 1);
    ds(0, 0) = n.grad.cwiseProduct(g.nodes_[size_t(ia)].value).sum();
    g.add_grad(is, ds);
  });
}

Var Graph::div_scalar(Var a, Var s) {
  const auto& vs = node(s).value;
  if (vs.rows() != 1 || vs.cols() != 1) {
    throw std::runtime_error("autodiff: div_scalar needs a 1x1 scalar operand");
  }
  if (vs(0, 0) == 0.0) {
    throw std::runtime_error("autodiff: div_scalar by zero");
  }
  bool ng = node(a).needs_grad || node(s).needs_grad;
  int ia = a.id, is = s.id;
  return push(node(a).value / vs(0, 0), ng, [ia, is](Graph& g, Node& n) {
    double sv = g.nodes_[size_t(is)].value(0, 0);
    g.add_grad(ia, n.grad / sv);
    Eigen::MatrixXd ds(1, 1);
    ds(0, 0) =
        -n.grad.cwiseProduct(g.nodes_[size_t(ia)].value).sum() / (sv * sv);
    g.add_grad(is, ds);
  });
}

Var Graph::add_rowvec(Var a, Var v) {
  const auto &va = node(a).value, &vv = node(v).value;
  if (vv.rows() != 1 || vv.cols() != va.cols()) shape_fail("add_rowvec", va, vv);
  bool ng = node(a).needs_grad || node(v).needs_grad;
  int ia = a.id, iv = v.id;
  Eigen::MatrixXd out = va;
  out.rowwise() += vv.row(0);
  return push(std::move(out), ng, [ia, iv](Graph& g, Node& n) {
    g.add_grad(ia, n.grad);
    g.add_grad(iv, n.grad.colwise().sum());
  });
}

Var Graph::mul_rowvec(Var a, Var v) {
  const auto &va = node(a).value, &vv = node(v).value;
  if (vv.rows() != 1 || vv.cols() != va.cols()) shape_fail("mul_rowvec", va, vv);
  bool ng = node(a).needs_grad || node(v).needs_grad;
  int ia = a.id, iv = v.id;
  Eigen::MatrixXd out = va.array().rowwise() * vv.row(0).array();
  return push(std::move(out), ng, [ia, iv](Graph& g, Node& n) {
    const auto& av = g.nodes_[size_t(ia)].value;
    const auto& vvv = g.nodes_[size_t(iv)].value;
    g.add_grad(ia, n.grad.array().rowwise() * vvv.row(0).array());
    g.add_grad(iv, n.grad.cwiseProduct(av).colwise().sum());
  });
}

Var Graph::hcat(Var a, Var b) { return hcat(std::vector<Var>{a, b}); }

Var Graph::hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::runtime_error("autodiff: hcat of nothing");
  long rows = node(parts[0]).value.rows();
  long total = 0;
  bool ng = false;
  for (Var p : parts) {
    const auto& v = node(p).value;
    if (v.rows() != rows) shape_fail("hcat", node(parts[0]).value, v);
    total += v.cols();
    ng = ng || node(p).needs_grad;
  }
  Eigen::MatrixXd out(rows, total);
  long off = 0;
  std::vector<std::pair<int, long>> spans;  // (id, cols)
  for (Var p : parts) {
    const auto& v = node(p).value;
    out.middleCols(off, v.cols()) = v;
    spans.emplace_back(p.id, v.cols());
    off += v.cols();
  }
  return push(std::move(out), ng, [spans](Graph& g, Node& n) {
    long off = 0;
    for (auto [id, c] : spans) {
      g.add_grad(id, n.grad.middleCols(off, c));
      off += c;
    }
  });
}

Var Graph::vcat(Var a, Var b) { return vcat(std::vector<Var>{a, b}); }

Var Graph::vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::runtime_error("autodiff: vcat of nothing");
  long cols = node(parts[0]).value.cols();
  long total = 0;
  bool ng = false;
  for (Var p : parts) {
    const auto& v = node(p).value;
    if (v.cols() != cols) shape_fail("vcat", node(parts[0]).value, v);
    total += v.rows();
    ng = ng || node(p).needs_grad;
  }
  Eigen::MatrixXd out(total, cols);
  long off = 0;
  std::vector<std::pair<int, long>> spans;
  for (Var p : parts) {
    const auto& v = node(p).value;
    out.middleRows(off, v.rows()) = v;
    spans.emplace_back(p.id, v.rows());
    off += v.rows();
  }
  return push(std::move(out), ng, [spans](Graph& g, Node& n) {
    long off = 0;
    for (auto [id, r] : spans) {
      g.add_grad(id, n.grad.middleRows(off, r));
      off += r;
    }
  });
}

Var Graph::rows(Var a, long start, long count) {
  const auto& va = node(a).value;
  if (start < 0 || count < 1 || start + count > va.rows()) {
    throw std::runtime_error("autodiff: rows slice [" + std::to_string(start) +
                             ", " + std::to_string(start + count) +
                             ") out of range for " + std::to_string(va.rows()) +
                             " rows");
  }
  bool ng = node(a).needs_grad;
  int ia = a.id;
  return push(va.middleRows(start, count), ng,
              [ia, start, count](Graph& g, Node& n) {
                const auto& av = g.nodes_[size_t(ia)].value;
                Eigen::MatrixXd full =
                    Eigen::MatrixXd::Zero(av.rows(), av.cols());
                full.middleRows(start, count) = n.grad;
                g.add_grad(ia, full);
              });
}

Var Graph::cols(Var a, long start, long count) {
  const auto& va = node(a).value;
  if (start < 0 || count < 1 || start + count > va.cols()) {
    throw std::runtime_error("autodiff: cols slice [" + std::to_string(start) +
                             ", " + std::to_string(start + count) +
                             ") out of range for " + std::to_string(va.cols()) +
                             " cols");
  }
  bool ng = node(a).needs_grad;
  int ia = a.id;
  return push(va.middleCols(start, count), ng,
              [ia, start, count](Graph& g, Node& n) {
                const auto& av = g.nodes_[size_t(ia)].value;
                Eigen::MatrixXd full =
                    Eigen::MatrixXd::Zero(av.rows(), av.cols());
                full.middleCols(start, count) = n.grad;
                g.add_grad(ia, full);
              });
}

Var Graph::shift_rows(Var a, long k) {
  const auto& va = node(a).value;
  const long R = va.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(R, va.cols());
  for (long r = 0; r < R; ++r) {
    long src = r - k;
    if (src >= 0 && src < R) out.row(r) = va.row(src);
  }
  bool ng = node(a).needs_grad;
  int ia = a.id;
  return push(std::move(out), ng, [ia, k, R](Graph& g, Node& n) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(R, n.grad.cols());
    for (long r = 0; r < R; ++r) {
      long src = r - k;
      if (src >= 0 && src < R) d.row(src) += n.grad.row(r);
    }
    g.add_grad(ia, d);
  });
}

Var Graph::tanh(Var a) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  Eigen::MatrixXd y = node(a).value.array().tanh();
  return push(std::move(y), ng, [ia](Graph& g, Node& n) {
    Eigen::ArrayXXd y2 = n.value.array().square();
    g.add_grad(ia, (n.grad.array() * (1.0 - y2)).matrix());
  });
}

Var Graph::sigmoid(Var a) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  // 0.5*(1+tanh(x/2)) is stable for both signs.
  Eigen::MatrixXd y = (0.5 * (1.0 + (node(a).value.array() * 0.5).tanh()));
  return push(std::move(y), ng, [ia](Graph& g, Node& n) {
    Eigen::ArrayXXd y = n.value.array();
    g.add_grad(ia, (n.grad.array() * y * (1.0 - y)).matrix());
  });
}

Var Graph::exp(Var a) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  Eigen::MatrixXd y = node(a).value.array().exp();
  return push(std::move(y), ng, [ia](Graph& g, Node& n) {
    g.add_grad(ia, n.grad.cwiseProduct(n.value));
  });
}

Var Graph::log(Var a) {
  const auto& va = node(a).value;
  if ((va.array() <= 0.0).any()) {
    throw std::runtime_error("autodiff: log of non-positive value");
  }
  bool ng = node(a).needs_grad;
  int ia = a.id;
  Eigen::MatrixXd y = va.array().log();
  return push(std::move(y), ng, [ia](Graph& g, Node& n) {
    g.add_grad(ia, n.grad.cwiseQuotient(g.nodes_[size_t(ia)].value));
  });
}

Var Graph::sqrt(Var a) {
  const auto& va = node(a).value;
  if ((va.array() < 0.0).any()) {
    throw std::runtime_error("autodiff: sqrt of negative value");
  }
  bool ng = node(a).needs_grad;
  int ia = a.id;
  Eigen::MatrixXd y = va.array().sqrt();
  return push(std::move(y), ng, [ia](Graph& g, Node& n) {
    // d/dx sqrt = 1/(2 sqrt); at exactly 0 the slope is unbounded, fail loud.
    if ((n.value.array() == 0.0).any()) {
      throw std::runtime_error("autodiff: sqrt backward at zero");
    }
    g.add_grad(ia, (n.grad.array() / (2.0 * n.value.array())).matrix());
  });
}

Var Graph::square(Var a) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  Eigen::MatrixXd y = node(a).value.array().square();
  return push(std::move(y), ng, [ia](Graph& g, Node& n) {
    g.add_grad(ia, (n.grad.array() * 2.0 *
                    g.nodes_[size_t(ia)].value.array()).matrix());
  });
}

Var Graph::relu(Var a) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  Eigen::MatrixXd y = node(a).value.cwiseMax(0.0);
  return push(std::move(y), ng, [ia](Graph& g, Node& n) {
    const auto& x = g.nodes_[size_t(ia)].value;
    Eigen::MatrixXd d =
        (x.array() > 0.0).select(n.grad, Eigen::MatrixXd::Zero(x.rows(), x.cols()));
    g.add_grad(ia, d);
  });
}

Var Graph::clamp(Var a, double lo, double hi) {
  if (!(lo < hi)) throw std::runtime_error("autodiff: clamp needs lo < hi");
  bool ng = node(a).needs_grad;
  int ia = a.id;
  Eigen::MatrixXd y = node(a).value.cwiseMax(lo).cwiseMin(hi);
  return push(std::move(y), ng, [ia, lo, hi](Graph& g, Node& n) {
    const auto& x = g.nodes_[size_t(ia)].value;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    for (long r = 0; r < x.rows(); ++r)
      for (long c = 0; c < x.cols(); ++c)
        if (x(r, c) > lo && x(r, c) < hi) d(r, c) = n.grad(r, c);
    g.add_grad(ia, d);
  });
}

Var Graph::maxs(Var a, double s) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  Eigen::MatrixXd y = node(a).value.cwiseMax(s);
  return push(std::move(y), ng, [ia, s](Graph& g, Node& n) {
    const auto& x = g.nodes_[size_t(ia)].value;
    // Subgradient 0 on the flat side and at the tie.
    Eigen::MatrixXd d =
        (x.array() > s).select(n.grad, Eigen::MatrixXd::Zero(x.rows(), x.cols()));
    g.add_grad(ia, d);
  });
}

Var Graph::sum(Var a) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = node(a).value.sum();
  return push(std::move(y), ng, [ia](Graph& g, Node& n) {
    const auto& x = g.nodes_[size_t(ia)].value;
    g.add_grad(ia, Eigen::MatrixXd::Constant(x.rows(), x.cols(), n.grad(0, 0)));
  });
}

Var Graph::mean(Var a) {
  const auto& va = node(a).value;
  double inv = 1.0 / static_cast<double>(va.size());
  return scale(sum(a), inv);
}

Var Graph::rowsum(Var a) {
  bool ng = node(a).needs_grad;
  int ia = a.id;
  Eigen::MatrixXd y = node(a).value.rowwise().sum();
  return push(std::move(y), ng, [ia](Graph& g, Node& n) {
    const auto& x = g.nodes_[size_t(ia)].value;
    Eigen::MatrixXd d(x.rows(), x.cols());
    for (long r = 0; r < x.rows(); ++r) d.row(r).setConstant(n.grad(r, 0));
    g.add_grad(ia, d);
  });
}

Var Graph::softmax_rows(Var a) {
  const auto& va = node(a).value;
  Eigen::MatrixXd y(va.rows(), va.cols());
  for (long r = 0; r < va.rows(); ++r) {
    double mx = va.row(r).maxCoeff();
    Eigen::ArrayXd e = (va.row(r).array() - mx).exp();
    y.row(r) = (e / e.sum()).matrix();
  }
  bool ng = node(a).needs_grad;
  int ia = a.id;
  return push(std::move(y), ng, [ia](Graph& g, Node& n) {
    // dx_r = y_r o (dy_r - <dy_r, y_r>)
    Eigen::MatrixXd d(n.value.rows(), n.value.cols());
    for (long r = 0; r < n.value.rows(); ++r) {
      double dot = n.grad.row(r).dot(n.value.row(r));
      d.row(r) =
          n.value.row(r).array() * (n.grad.row(r).array() - dot);
    }
    g.add_grad(ia, d);
  });
}

Var Graph::cross_entropy_rows(Var logits, const std::vector<int>& targets) {
  const auto& z = node(logits).value;
  if (static_cast<long>(targets.size()) != z.rows()) {
    throw std::runtime_error("autodiff: cross_entropy_rows got " +
                             std::to_string(targets.size()) + " targets for " +
                             std::to_string(z.rows()) + " rows");
  }
  for (size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= z.cols()) {
      throw std::runtime_error("autodiff: target " + std::to_string(targets[i]) +
                               " at row " + std::to_string(i) +
                               " outside vocabulary of " +
                               std::to_string(z.cols()));
    }
  }
  double total = 0.0;
  Eigen::MatrixXd probs(z.rows(), z.cols());
  for (long r = 0; r < z.rows(); ++r) {
    double mx = z.row(r).maxCoeff();
    Eigen::ArrayXd e = (z.row(r).array() - mx).exp();
    double se = e.sum();
    probs.row(r) = (e / se).matrix();
    double lse = mx + std::log(se);
    total += lse - z(r, targets[static_cast<size_t>(r)]);
  }
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = total;
  bool ng = node(logits).needs_grad;
  int il = logits.id;
  return push(std::move(y), ng, [il, probs, targets](Graph& g, Node& n) {
    Eigen::MatrixXd d = probs;
    for (long r = 0; r < d.rows(); ++r) d(r, targets[static_cast<size_t>(r)]) -= 1.0;
    g.add_grad(il, d * n.grad(0, 0));
  });
}

const Eigen::MatrixXd& Graph::value(Var v) const { return node(v).value; }

double Graph::scalar_value(Var v) const {
  const auto& m = node(v).value;
  if (m.rows() != 1 || m.cols() != 1) {
    throw std::runtime_error("autodiff: expected 1x1, got " +
                             std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
  }
  return m(0, 0);
}

void Graph::backward(Var root) {
  if (backward_done_) {
    throw std::runtime_error("autodiff: backward called twice on one graph");
  }
  backward_done_ = true;
  Node& r = node(root);
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw std::runtime_error("autodiff: backward root must be 1x1, got " +
                             std::to_string(r.value.rows()) + "x" +
                             std::to_string(r.value.cols()));
  }
  if (!r.needs_grad) return;  // nothing trainable upstream
  r.grad = Eigen::MatrixXd::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0 || !n.back) continue;
    n.back(*this, n);
  }
}

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  std::set<std::string> names;
  for (Param* p : params_) {
    if (!p) throw std::invalid_argument("optimizer: null parameter");
    if (!names.insert(p->name).second) {
      throw std::invalid_argument("optimizer: duplicate parameter name '" +
                                  p->name + "'");
    }
    m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    if (p.grad.size() == 0) p.zero_grad();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] +
            (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    Eigen::ArrayXXd mhat = m_[i].array() / bc1;
    Eigen::ArrayXXd vhat = v_[i].array() / bc2;
    p.value.array() -= lr_ * mhat / (vhat.sqrt() + eps_);
  }
}

void Adam::save_state(Bank& bank, const std::string& prefix) const {
  bank.put_text(prefix + "/steps", std::to_string(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    bank.put(prefix + "/" + params_[i]->name + ".m", m_[i], Dtype::f64);
    bank.put(prefix + "/" + params_[i]->name + ".v", v_[i], Dtype::f64);
  }
}

void Adam::load_state(const Bank& bank, const std::string& prefix) {
  t_ = std::stoull(bank.text(prefix + "/steps"));
  for (size_t i = 0; i < params_.size(); ++i) {
    const std::string base = prefix + "/" + params_[i]->name;
    const Eigen::MatrixXd& m = bank.matrix(base + ".m");
    const Eigen::MatrixXd& v = bank.matrix(base + ".v");
    if (m.rows() != params_[i]->value.rows() ||
        m.cols() != params_[i]->value.cols()) {
      throw std::runtime_error("optimizer: stored moment shape for '" +
                               params_[i]->name + "' does not match parameter");
    }
    m_[i] = m;
    v_[i] = v;
  }
}

}  // namespace tvg
