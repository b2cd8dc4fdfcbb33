#include "tvg/pseudo_labels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tvg {

Eigen::MatrixXd gaussian_affinity(const Eigen::MatrixXd& points, double sigma) {
  if (sigma <= 0.0)
    throw std::invalid_argument("gaussian_affinity: sigma must be positive");
  const int n = static_cast<int>(points.rows());
  Eigen::MatrixXd W(n, n);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int s = 0; s < n; ++s) {
    W(s, s) = 1.0;
    for (int t = s + 1; t < n; ++t) {
      double w = std::exp(-(points.row(s) - points.row(t)).squaredNorm() * inv);
      W(s, t) = w;
      W(t, s) = w;
    }
  }
  return W;
}

double median_pairwise_distance(const Eigen::MatrixXd& points) {
  std::vector<double> dists;
  const int n = static_cast<int>(points.rows());
  for (int s = 0; s < n; ++s)
    for (int t = s + 1; t < n; ++t) {
      double d = (points.row(s) - points.row(t)).norm();
      if (d > 0.0) dists.push_back(d);
    }
  if (dists.empty()) return 0.0;
  std::sort(dists.begin(), dists.end());
  size_t m = dists.size();
  if (m % 2 == 1) return dists[m / 2];
  return 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
}

NcutResult ncut_bipartition(const Eigen::MatrixXd& W) {
  const int n = static_cast<int>(W.rows());
  if (W.cols() != n || n < 2)
    throw std::invalid_argument("ncut_bipartition: need a square matrix of order >= 2");
  double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
  bool any_edge = false;
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t) {
      if (W(s, t) < 0.0)
        throw std::invalid_argument("ncut_bipartition: negative affinity at (" +
                                    std::to_string(s) + "," + std::to_string(t) + ")");
      if (std::abs(W(s, t) - W(t, s)) > 1e-9 * scale)
        throw std::invalid_argument("ncut_bipartition: affinity matrix is not symmetric");
      if (s != t && W(s, t) > 0.0) any_edge = true;
    }
  Eigen::VectorXd d = W.rowwise().sum();
  for (int s = 0; s < n; ++s)
    if (d(s) <= 0.0)
      throw std::invalid_argument("ncut_bipartition: zero row sum at index " +
                                  std::to_string(s));
  if (!any_edge)
    throw std::invalid_argument("ncut_bipartition: fully disconnected affinity graph");

  Eigen::VectorXd dinvsqrt = d.array().rsqrt();
  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(n, n) -
                      dinvsqrt.asDiagonal() * W * dinvsqrt.asDiagonal();
  // Enforce exact symmetry before the eigensolve; products above can drift
  // at the last ulp.
  L = 0.5 * (L + L.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("ncut_bipartition: eigensolver failed to converge");
  NcutResult res;
  res.lambda2 = es.eigenvalues()(1);
  Eigen::VectorXd v = es.eigenvectors().col(1);
  res.residual = (L * v - res.lambda2 * v).norm();
  if (res.residual > 1e-8)
    throw std::runtime_error("ncut_bipartition: eigenpair residual " +
                             std::to_string(res.residual) + " exceeds 1e-8");
  res.labels.assign(n, 0);
  int ones = 0;
  for (int s = 0; s < n; ++s) {
    res.labels[s] = v(s) >= 0.0 ? 1 : 0;
    ones += res.labels[s];
  }
  if (ones == 0 || ones == n) {
    // Numerically one-signed Fiedler vector; split at the median instead.
    std::vector<double> vals(v.data(), v.data() + n);
    std::nth_element(vals.begin(), vals.begin() + n / 2, vals.end());
    double med = vals[n / 2];
    ones = 0;
    for (int s = 0; s < n; ++s) {
      res.labels[s] = v(s) >= med ? 1 : 0;
      ones += res.labels[s];
    }
    if (ones == 0 || ones == n)
      throw std::runtime_error("ncut_bipartition: could not split the Fiedler vector");
  }
  if (res.labels[0] != 0)
    for (auto& l : res.labels) l ^= 1;
  return res;
}

double ncut_value(const Eigen::MatrixXd& W, const std::vector<uint8_t>& labels) {
  const int n = static_cast<int>(W.rows());
  double cut = 0.0, assoc_a = 0.0, assoc_b = 0.0;
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t) {
      if (labels[s] == 0)
        assoc_a += W(s, t);
      else
        assoc_b += W(s, t);
      if (labels[s] != labels[t] && labels[s] == 0) cut += W(s, t);
    }
  if (assoc_a <= 0.0 || assoc_b <= 0.0)
    return std::numeric_limits<double>::infinity();
  return cut / assoc_a + cut / assoc_b;
}

namespace {

// Cosine over the overlapping prefix when dimensions differ (the shorter
// vector is implicitly zero-padded); norms are floored at 1e-8.
double padded_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  int k = static_cast<int>(std::min(a.size(), b.size()));
  double dot = a.head(k).dot(b.head(k));
  double na = std::max(a.norm(), 1e-8);
  double nb = std::max(b.norm(), 1e-8);
  return dot / (na * nb);
}

}  // namespace

std::vector<uint8_t> init_pseudo_labels(const Eigen::MatrixXd& frames,
                                        const Eigen::VectorXd& center,
                                        double sigma, LabelStats* stats) {
  const int T = static_cast<int>(frames.rows());
  if (T < 1) throw std::invalid_argument("init_pseudo_labels: empty video");
  if (T == 1) {
    if (stats) ++stats->single_frame;
    return {1};
  }
  Eigen::MatrixXd pts(T, frames.cols() + center.size());
  for (int t = 0; t < T; ++t) {
    pts.row(t).head(frames.cols()) = frames.row(t);
    pts.row(t).tail(center.size()) = center.transpose();
  }
  if (sigma <= 0.0) {
    sigma = median_pairwise_distance(pts);
    if (sigma <= 0.0) {
      // Every frame identical: no bipartition exists; call the whole video
      // foreground and count the event.
      if (stats) ++stats->degenerate_all_ones;
      return std::vector<uint8_t>(static_cast<size_t>(T), 1);
    }
  }
  NcutResult cut = ncut_bipartition(gaussian_affinity(pts, sigma));

  Eigen::VectorXd mean0 = Eigen::VectorXd::Zero(frames.cols());
  Eigen::VectorXd mean1 = Eigen::VectorXd::Zero(frames.cols());
  int n0 = 0, n1 = 0;
  for (int t = 0; t < T; ++t) {
    if (cut.labels[t] == 0) {
      mean0 += frames.row(t).transpose();
      ++n0;
    } else {
      mean1 += frames.row(t).transpose();
      ++n1;
    }
  }
  mean0 /= std::max(n0, 1);
  mean1 /= std::max(n1, 1);
  double c0 = padded_cosine(mean0, center);
  double c1 = padded_cosine(mean1, center);
  int positive_side;
  if (c0 != c1) {
    positive_side = c1 > c0 ? 1 : 0;
  } else if (n0 != n1) {
    positive_side = n1 < n0 ? 1 : 0;
  } else {
    positive_side = 0;  // tie on both counts: keep frame 0's side
  }
  std::vector<uint8_t> y(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t)
    y[t] = cut.labels[t] == positive_side ? 1 : 0;
  return y;
}

std::vector<uint8_t> update_pseudo_labels(const Eigen::MatrixXd& learned,
                                          const Eigen::VectorXd& center,
                                          double sigma, LabelStats* stats) {
  return init_pseudo_labels(learned, center, sigma, stats);
}

}  // namespace tvg
