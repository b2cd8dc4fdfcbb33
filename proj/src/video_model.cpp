#include "tvg/video_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tvg {

namespace {

Eigen::MatrixXd uniform_init(long rows, long cols, double scale, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = rng.uniform(-scale, scale);
  return m;
}

Param weight(const std::string& name, long in, long out, Rng& rng) {
  return Param(name, uniform_init(in, out, 1.0 / std::sqrt(double(in)), rng));
}

Param bias(const std::string& name, long out) {
  return Param(name, Eigen::MatrixXd::Zero(1, out));
}

}  // namespace

VideoModel::VideoModel(int frame_dim, int center_dim, const Config& cfg,
                       Rng& rng)
    : frame_dim_(frame_dim),
      center_dim_(center_dim),
      joint_dim_(cfg.joint_dim),
      heads_(cfg.attention_heads),
      W_p(weight("vid/W_p", frame_dim, cfg.joint_dim, rng)),
      b_p(bias("vid/b_p", cfg.joint_dim)),
      W_q(weight("vid/W_q", cfg.joint_dim, cfg.joint_dim, rng)),
      W_k(weight("vid/W_k", cfg.joint_dim, cfg.joint_dim, rng)),
      W_v(weight("vid/W_v", cfg.joint_dim, cfg.joint_dim, rng)),
      W_o(weight("vid/W_o", cfg.joint_dim, cfg.joint_dim, rng)),
      W_c(weight("vid/W_c", center_dim, cfg.joint_dim, rng)),
      b_c(bias("vid/b_c", cfg.joint_dim)),
      Wm1(weight("vid/conv1_m", frame_dim, cfg.joint_dim, rng)),
      W01(weight("vid/conv1_0", frame_dim, cfg.joint_dim, rng)),
      Wp1(weight("vid/conv1_p", frame_dim, cfg.joint_dim, rng)),
      b1(bias("vid/conv1_b", cfg.joint_dim)),
      Wm2(weight("vid/conv2_m", cfg.joint_dim, cfg.joint_dim, rng)),
      W02(weight("vid/conv2_0", cfg.joint_dim, cfg.joint_dim, rng)),
      Wp2(weight("vid/conv2_p", cfg.joint_dim, cfg.joint_dim, rng)),
      b2(bias("vid/conv2_b", cfg.joint_dim)),
      w_h(weight("vid/head_w", cfg.joint_dim, 1, rng)),
      b_h(bias("vid/head_b", 1)) {
  if (joint_dim_ % heads_ != 0)
    throw std::invalid_argument("joint dimension must divide evenly by heads");
  if (frame_dim < 1 || center_dim < 1)
    throw std::invalid_argument("feature dimensions must be positive");
}

Var VideoModel::encode(Graph& g, const Eigen::MatrixXd& frames) {
  if (frames.cols() != frame_dim_)
    throw std::invalid_argument("encode: frame dim " +
                                std::to_string(frames.cols()) + ", expected " +
                                std::to_string(frame_dim_));
  Var X = g.add_rowvec(g.matmul(g.constant(frames), g.leaf(W_p)), g.leaf(b_p));
  Var Q = g.matmul(X, g.leaf(W_q));
  Var K = g.matmul(X, g.leaf(W_k));
  Var V = g.matmul(X, g.leaf(W_v));
  const long dh = joint_dim_ / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(double(dh));
  std::vector<Var> head_outs;
  head_outs.reserve(heads_);
  for (int h = 0; h < heads_; ++h) {
    Var Qh = g.cols(Q, h * dh, dh);
    Var Kh = g.cols(K, h * dh, dh);
    Var Vh = g.cols(V, h * dh, dh);
    Var scores = g.scale(g.matmul(Qh, g.transpose(Kh)), inv_sqrt);
    head_outs.push_back(g.matmul(g.softmax_rows(scores), Vh));
  }
  Var mixed = g.matmul(g.hcat(head_outs), g.leaf(W_o));
  return g.add(X, mixed);
}

Var VideoModel::project(Graph& g, const Eigen::MatrixXd& centers) {
  if (centers.cols() != center_dim_)
    throw std::invalid_argument("project: center dim " +
                                std::to_string(centers.cols()) +
                                ", expected " + std::to_string(center_dim_));
  return g.add_rowvec(g.matmul(g.constant(centers), g.leaf(W_c)), g.leaf(b_c));
}

VideoModel::Foreground VideoModel::foreground(Graph& g,
                                              const Eigen::MatrixXd& frames) {
  if (frames.cols() != frame_dim_)
    throw std::invalid_argument("foreground: frame dim " +
                                std::to_string(frames.cols()) + ", expected " +
                                std::to_string(frame_dim_));
  Var F = g.constant(frames);
  // Temporal convolution, kernel 3, zero padding: three shifted matmuls.
  auto conv = [&](Var x, Param& wm, Param& w0, Param& wp, Param& b) {
    Var y = g.matmul(x, g.leaf(w0));
    y = g.add(y, g.matmul(g.shift_rows(x, 1), g.leaf(wm)));
    y = g.add(y, g.matmul(g.shift_rows(x, -1), g.leaf(wp)));
    return g.add_rowvec(y, g.leaf(b));
  };
  Var h1 = g.relu(conv(F, Wm1, W01, Wp1, b1));
  Var feat = conv(h1, Wm2, W02, Wp2, b2);
  Var logits = g.add_rowvec(g.matmul(feat, g.leaf(w_h)), g.leaf(b_h));
  return {feat, g.sigmoid(logits)};
}

Eigen::MatrixXd VideoModel::encode_frames(const Eigen::MatrixXd& frames) {
  Graph g;
  return g.value(encode(g, frames));
}

Eigen::MatrixXd VideoModel::project_centers(const Eigen::MatrixXd& centers) {
  Graph g;
  return g.value(project(g, centers));
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> VideoModel::foreground_values(
    const Eigen::MatrixXd& frames) {
  Graph g;
  Foreground f = foreground(g, frames);
  return {g.value(f.features), g.value(f.attention).col(0)};
}

std::vector<Param*> VideoModel::params() {
  return {&W_p, &b_p, &W_q, &W_k, &W_v, &W_o, &W_c, &b_c,
          &Wm1, &W01, &Wp1, &b1, &Wm2, &W02, &Wp2, &b2, &w_h, &b_h};
}

SpecificAttention specific_attention(Graph& g, Var Chat, Var Fhat) {
  Var A = g.softmax_rows(g.matmul(Chat, g.transpose(Fhat)));
  const long T = g.value(Fhat).rows();
  Var B = g.scale(g.offset(g.neg(A), 1.0), 1.0 / double(T));
  return {A, B};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> specific_attention_values(
    const Eigen::MatrixXd& Chat, const Eigen::MatrixXd& Fhat) {
  Graph g;
  SpecificAttention at = specific_attention(g, g.constant(Chat), g.constant(Fhat));
  return {g.value(at.A), g.value(at.B)};
}

Var compose_activity(Graph& g, Var attn, Var Fhat, int j) {
  const auto& a = g.value(attn);
  if (j < 0 || j >= a.rows())
    throw std::out_of_range("compose_activity: row " + std::to_string(j) +
                            " out of range for " + std::to_string(a.rows()) +
                            " rows");
  return g.matmul(g.rows(attn, j, 1), Fhat);
}

Var cosine_distance(Graph& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.rows() != 1 || bv.rows() != 1 || av.cols() != bv.cols())
    throw std::invalid_argument("cosine_distance: expected matching row vectors");
  Var dot = g.matmul(a, g.transpose(b));
  // Floor the squared norms at 1e-16 so norms stay >= 1e-8.
  Var na = g.sqrt(g.maxs(g.sum(g.square(a)), 1e-16));
  Var nb = g.sqrt(g.maxs(g.sum(g.square(b)), 1e-16));
  Var cos = g.div_scalar(dot, g.cmul(na, nb));
  return g.offset(g.neg(cos), 1.0);
}

double cosine_distance_value(const Eigen::RowVectorXd& a,
                             const Eigen::RowVectorXd& b) {
  double na = std::max(a.norm(), 1e-8);
  double nb = std::max(b.norm(), 1e-8);
  return 1.0 - a.dot(b) / (na * nb);
}

Var loss_sab(Graph& g, const std::vector<std::vector<Var>>& pos,
             const std::vector<std::vector<Var>>& neg, double tau1,
             double tau2, double theta) {
  const size_t Z = pos.size();
  if (Z < 2) throw std::invalid_argument("loss_sab: need at least 2 videos");
  if (neg.size() != Z)
    throw std::invalid_argument("loss_sab: positive/negative batch mismatch");
  const size_t J = pos[0].size();
  if (J < 1) throw std::invalid_argument("loss_sab: need at least 1 center");
  Var total = g.scalar(0.0);
  for (size_t j = 0; j < J; ++j) {
    for (size_t v = 0; v < Z; ++v) {
      Var d_vn = cosine_distance(g, pos[v][j], neg[v][j]);
      Var sim = g.scalar(0.0);
      Var dis = g.scalar(0.0);
      for (size_t u = 0; u < Z; ++u) {
        if (u == v) continue;
        Var d_pp = cosine_distance(g, pos[v][j], pos[u][j]);
        sim = g.add(sim, g.maxs(g.offset(d_pp, -tau1), 0.0));
        dis = g.add(dis, g.maxs(g.offset(g.sub(d_pp, d_vn), tau2), 0.0));
      }
      total = g.add(total, g.add(sim, g.scale(dis, theta)));
    }
  }
  return total;
}

Var loss_trip(Graph& g, Var features, const std::vector<uint8_t>& labels,
              double tau3, int* degenerate_counter) {
  // Copy: node storage may reallocate while this routine adds nodes, which
  // would invalidate a reference into the graph.
  const Eigen::MatrixXd F = g.value(features);
  const int T = static_cast<int>(F.rows());
  if (static_cast<int>(labels.size()) != T)
    throw std::invalid_argument("loss_trip: label count " +
                                std::to_string(labels.size()) +
                                " does not match " + std::to_string(T) +
                                " frames");
  std::vector<int> fg, bg;
  for (int t = 0; t < T; ++t) (labels[t] ? fg : bg).push_back(t);
  if (fg.size() < 2 || bg.empty()) {
    if (degenerate_counter) ++*degenerate_counter;
    return g.scalar(0.0);
  }
  Var total = g.scalar(0.0);
  for (int u : fg) {
    // Nearest other foreground frame and farthest background frame, chosen
    // on values; ties keep the smallest frame index.
    int best_v = -1, best_o = -1;
    double best_dv = 0.0, best_do = 0.0;
    for (int v : fg) {
      if (v == u) continue;
      double d = cosine_distance_value(F.row(u), F.row(v));
      if (best_v < 0 || d < best_dv) {
        best_dv = d;
        best_v = v;
      }
    }
    for (int o : bg) {
      double d = cosine_distance_value(F.row(u), F.row(o));
      if (best_o < 0 || d > best_do) {
        best_do = d;
        best_o = o;
      }
    }
    Var d_uv = cosine_distance(g, g.rows(features, u, 1), g.rows(features, best_v, 1));
    Var d_uo = cosine_distance(g, g.rows(features, u, 1), g.rows(features, best_o, 1));
    total = g.add(total, g.maxs(g.offset(g.sub(d_uv, d_uo), tau3), 0.0));
  }
  return total;
}

Var loss_cls(Graph& g, Var A_spe, Var A_fore, const Eigen::MatrixXd& Y) {
  const auto& A = g.value(A_spe);
  const auto& f = g.value(A_fore);
  if (Y.rows() != A.rows() || Y.cols() != A.cols())
    throw std::invalid_argument("loss_cls: label shape mismatch");
  if (f.rows() != A.cols() || f.cols() != 1)
    throw std::invalid_argument("loss_cls: foreground attention must be T x 1");
  for (long r = 0; r < Y.rows(); ++r)
    for (long c = 0; c < Y.cols(); ++c)
      if (Y(r, c) != 0.0 && Y(r, c) != 1.0)
        throw std::invalid_argument("loss_cls: labels must be binary");
  Var H = g.clamp(g.mul_rowvec(A_spe, g.transpose(A_fore)), 1e-7, 1.0 - 1e-7);
  Var pos = g.cmul(g.constant(Y), g.log(H));
  Var negpart = g.cmul(g.constant(Eigen::MatrixXd(Eigen::MatrixXd::Ones(Y.rows(), Y.cols()) - Y)),
                       g.log(g.offset(g.neg(H), 1.0)));
  return g.neg(g.sum(g.add(pos, negpart)));
}

Var loss_video(Graph& g, Var cls, Var sab, Var trip, double alpha_v,
               double beta_v) {
  return g.add(cls, g.add(g.scale(sab, alpha_v), g.scale(trip, beta_v)));
}

}  // namespace tvg
