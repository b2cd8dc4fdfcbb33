#include "tvg/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tvg/language_model.hpp"

namespace tvg {

namespace {

// Index of the nearest center; equal distances keep the smallest index.
int nearest_center(const Eigen::MatrixXd& centers,
                   const Eigen::RowVectorXd& p, double* d2_out) {
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int c = 0; c < centers.rows(); ++c) {
    double d2 = (centers.row(c) - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  if (d2_out) *d2_out = best_d2;
  return best;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const int m = static_cast<int>(points.rows());
  Eigen::MatrixXd centers(k, points.cols());
  centers.row(0) = points.row(static_cast<int>(rng.index(m)));
  Eigen::VectorXd d2(m);
  for (int i = 0; i < m; ++i)
    d2(i) = (points.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = d2.sum();
    int pick;
    if (total <= 0.0) {
      // Remaining points coincide with existing centers; any pick works.
      pick = static_cast<int>(rng.index(m));
    } else {
      double r = rng.uniform(0.0, total);
      double acc = 0.0;
      pick = m - 1;
      for (int i = 0; i < m; ++i) {
        acc += d2(i);
        if (r < acc) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = points.row(pick);
    for (int i = 0; i < m; ++i)
      d2(i) = std::min(d2(i), (points.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

KmeansResult lloyd_run(const Eigen::MatrixXd& points, int k, Rng& rng,
                       int max_iters) {
  const int m = static_cast<int>(points.rows());
  KmeansResult res;
  res.centers = kmeanspp_init(points, k, rng);
  res.assignments.assign(m, -1);
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (int i = 0; i < m; ++i) {
      double d2 = 0.0;
      int a = nearest_center(res.centers, points.row(i), &d2);
      if (a != res.assignments[i]) {
        res.assignments[i] = a;
        changed = true;
      }
      inertia += d2;
    }
    // Reassignment against fixed centers and the mean update below each
    // minimise the objective, so the value measured here cannot rise.
    if (inertia > prev_inertia + 1e-9 * std::max(1.0, prev_inertia))
      throw std::logic_error("kmeans: inertia increased between iterations");
    prev_inertia = inertia;
    res.inertia = inertia;
    if (!changed && iter > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> counts(k, 0);
    for (int i = 0; i < m; ++i) {
      sums.row(res.assignments[i]) += points.row(i);
      ++counts[res.assignments[i]];
    }
    std::vector<int> claimed;
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        res.centers.row(c) = sums.row(c) / counts[c];
        continue;
      }
      // Empty cluster: restart it on the worst-fit point not already used
      // to restart another cluster this round.
      int worst = -1;
      double worst_d2 = -1.0;
      for (int i = 0; i < m; ++i) {
        if (std::find(claimed.begin(), claimed.end(), i) != claimed.end())
          continue;
        double d2 =
            (points.row(i) - res.centers.row(res.assignments[i])).squaredNorm();
        if (d2 > worst_d2) {
          worst_d2 = d2;
          worst = i;
        }
      }
      res.centers.row(c) = points.row(worst);
      claimed.push_back(worst);
      changed = true;
    }
  }
  return res;
}

}  // namespace

KmeansResult kmeans(const Eigen::MatrixXd& points, int k, uint64_t seed,
                    int restarts, int max_iters) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be at least 1");
  if (points.rows() < k)
    throw std::invalid_argument(
        "kmeans: need at least k points, got " +
        std::to_string(points.rows()) + " for k=" + std::to_string(k));
  if (restarts < 1)
    throw std::invalid_argument("kmeans: restarts must be at least 1");
  Rng rng(seed);
  KmeansResult best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    KmeansResult run = lloyd_run(points, k, rng, max_iters);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  return best;
}

Bank export_necks(LanguageModel& model, const QueryCorpus& corpus,
                  const EmbeddingTable& table) {
  Bank bank;
  for (const auto& q : corpus.queries) {
    auto [r_e, E] = model.encode_query(q, table);
    (void)r_e;
    bank.put(q.query_id, E, Dtype::f64);
  }
  return bank;
}

ClusterBank build_cluster_bank_from_necks(const Bank& necks, int n_necks,
                                          int n_clusters,
                                          const std::string& mode,
                                          uint64_t seed, int restarts,
                                          int max_iters) {
  if (mode != "center" && mode != "sample" && mode != "random")
    throw std::invalid_argument("unknown center mode: " + mode);
  const auto& ids = necks.names();
  const int m = static_cast<int>(ids.size());
  if (m < n_clusters)
    throw std::invalid_argument(
        "cannot form " + std::to_string(n_clusters) + " clusters from " +
        std::to_string(m) + " queries");
  ClusterBank out;
  out.n_necks = n_necks;
  out.n_clusters = n_clusters;
  out.mode = mode;
  out.dim = static_cast<int>(necks.matrix(ids[0]).cols());
  out.centers.resize(n_necks);
  out.assignments.resize(n_necks);
  out.inertia.assign(n_necks, 0.0);
  Rng rng(seed);
  for (int i = 0; i < n_necks; ++i) {
    Eigen::MatrixXd pts(m, out.dim);
    for (int q = 0; q < m; ++q) {
      const Eigen::MatrixXd& E = necks.matrix(ids[q]);
      if (E.rows() != n_necks || E.cols() != out.dim)
        throw std::runtime_error("neck matrix for " + ids[q] +
                                 " has unexpected shape");
      pts.row(q) = E.row(i);
    }
    if (mode == "random") {
      auto picks = rng.sample_without_replacement(m, n_clusters);
      out.centers[i].resize(n_clusters, out.dim);
      for (int c = 0; c < n_clusters; ++c)
        out.centers[i].row(c) = pts.row(static_cast<int>(picks[c]));
      double inertia = 0.0;
      for (int q = 0; q < m; ++q) {
        double d2 = 0.0;
        int a = nearest_center(out.centers[i], pts.row(q), &d2);
        out.assignments[i][ids[q]] = a;
        inertia += d2;
      }
      out.inertia[i] = inertia;
      continue;
    }
    KmeansResult km = kmeans(pts, n_clusters, seed + 7919ull * (i + 1),
                             restarts, max_iters);
    out.centers[i] = km.centers;
    out.inertia[i] = km.inertia;
    for (int q = 0; q < m; ++q) out.assignments[i][ids[q]] = km.assignments[q];
    if (mode == "sample") {
      for (int c = 0; c < n_clusters; ++c) {
        std::vector<int> members;
        for (int q = 0; q < m; ++q)
          if (km.assignments[q] == c) members.push_back(q);
        if (members.empty()) continue;  // keep the centroid
        int pick = members[rng.index(members.size())];
        out.centers[i].row(c) = pts.row(pick);
      }
    }
  }
  return out;
}

ClusterBank build_cluster_bank(LanguageModel& model, const QueryCorpus& corpus,
                               const EmbeddingTable& table, const Config& cfg) {
  Bank necks = export_necks(model, corpus, table);
  return build_cluster_bank_from_necks(necks, cfg.n_necks, cfg.n_clusters,
                                       cfg.center_mode, cfg.seed,
                                       cfg.kmeans_restarts,
                                       cfg.kmeans_max_iters);
}

void ClusterBank::save(const std::string& path) const {
  Bank bank;
  bank.put_text("meta/format", "tvg-clusters-v1");
  bank.put_text("meta/n_necks", std::to_string(n_necks));
  bank.put_text("meta/n_clusters", std::to_string(n_clusters));
  bank.put_text("meta/dim", std::to_string(dim));
  bank.put_text("meta/mode", mode);
  Eigen::MatrixXd in(n_necks, 1);
  for (int i = 0; i < n_necks; ++i) in(i, 0) = inertia[i];
  bank.put("inertia", in, Dtype::f64);
  for (int i = 0; i < n_necks; ++i) {
    bank.put("centers/" + std::to_string(i), centers[i], Dtype::f64);
    std::ostringstream os;
    for (const auto& [qid, c] : assignments[i]) os << qid << ' ' << c << '\n';
    bank.put_text("assign/" + std::to_string(i), os.str());
  }
  bank.save(path);
}

ClusterBank ClusterBank::load(const std::string& path) {
  Bank bank = Bank::load(path);
  if (!bank.has("meta/format") || bank.text("meta/format") != "tvg-clusters-v1")
    throw std::runtime_error(path + ": not a cluster bank file");
  ClusterBank out;
  out.n_necks = std::stoi(bank.text("meta/n_necks"));
  out.n_clusters = std::stoi(bank.text("meta/n_clusters"));
  out.dim = std::stoi(bank.text("meta/dim"));
  out.mode = bank.text("meta/mode");
  const Eigen::MatrixXd& in = bank.matrix("inertia");
  out.centers.resize(out.n_necks);
  out.assignments.resize(out.n_necks);
  out.inertia.resize(out.n_necks);
  for (int i = 0; i < out.n_necks; ++i) {
    out.inertia[i] = in(i, 0);
    out.centers[i] = bank.matrix("centers/" + std::to_string(i));
    std::istringstream is(bank.text("assign/" + std::to_string(i)));
    std::string qid;
    int c;
    while (is >> qid >> c) out.assignments[i][qid] = c;
  }
  return out;
}

std::string ClusterBank::assignment_table() const {
  std::ostringstream os;
  os << "neck,query_id,cluster\n";
  for (int i = 0; i < n_necks; ++i)
    for (const auto& [qid, c] : assignments[i])
      os << i << ',' << qid << ',' << c << '\n';
  return os.str();
}

}  // namespace tvg
