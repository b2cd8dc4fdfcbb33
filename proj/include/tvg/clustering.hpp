#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "tvg/common.hpp"
#include "tvg/config.hpp"
#include "tvg/data_model.hpp"
#include "tvg/matrix_io.hpp"

namespace tvg {

class LanguageModel;

struct KmeansResult {
  Eigen::MatrixXd centers;       // k x d
  std::vector<int> assignments;  // one entry per input point
  double inertia = 0.0;          // within-cluster sum of squared distances
};

// Lloyd's algorithm with k-means++ seeding, `restarts` independent starts,
// lowest inertia wins (ties keep the earliest restart). Empty clusters are
// reseeded to the point farthest from its current center. Within a run the
// inertia never increases between Lloyd steps (asserted). Throws when the
// point count is below k.
KmeansResult kmeans(const Eigen::MatrixXd& points, int k, uint64_t seed,
                    int restarts = 8, int max_iters = 100);

// Per neck index: N_c guidance vectors over the corpus necks, plus the
// query-to-cluster assignment used by evaluation tooling.
struct ClusterBank {
  int n_necks = 0;
  int n_clusters = 0;
  int dim = 0;
  std::string mode;  // center | sample | random
  std::vector<Eigen::MatrixXd> centers;                // per neck: N_c x d_e
  std::vector<std::map<std::string, int>> assignments; // per neck
  std::vector<double> inertia;                         // per neck

  void save(const std::string& path) const;
  static ClusterBank load(const std::string& path);
  // Plain-text table "neck,query_id,cluster" for inspection.
  std::string assignment_table() const;
};

// Encodes every query and stores its neck matrix under its query_id.
Bank export_necks(LanguageModel& model, const QueryCorpus& corpus,
                  const EmbeddingTable& table);

// Clusters the i-th necks of all queries independently per neck index.
// mode "center" keeps the centroids, "sample" swaps each centroid for a
// random member of its cluster, "random" skips clustering and picks N_c
// distinct query necks (assignments then map to the nearest pick).
ClusterBank build_cluster_bank_from_necks(const Bank& necks, int n_necks,
                                          int n_clusters,
                                          const std::string& mode,
                                          uint64_t seed, int restarts,
                                          int max_iters);

ClusterBank build_cluster_bank(LanguageModel& model, const QueryCorpus& corpus,
                               const EmbeddingTable& table, const Config& cfg);

}  // namespace tvg
