#pragma once

#include <string>
#include <vector>

#include "tvg/checkpoint.hpp"
#include "tvg/clustering.hpp"
#include "tvg/config.hpp"
#include "tvg/data_model.hpp"
#include "tvg/matrix_io.hpp"
#include "tvg/pseudo_labels.hpp"
#include "tvg/video_model.hpp"

namespace tvg {

struct TrainMetricsRow {
  int iteration = 0;
  int neck = 0;
  double mean_cls = 0.0;
  double mean_sab = 0.0;
  double mean_trip = 0.0;
  double label_change_rate = 0.0;
};

struct TrainResult {
  std::vector<double> loss_history;  // one entry per optimizer step
  std::vector<TrainMetricsRow> metrics;
  LabelStats label_stats;
  int trip_degenerate = 0;
  std::string final_checkpoint;
};

// The iterative video-side training loop. Labels start from raw frames and
// raw cluster centers; each (iteration, neck) does one full pass over the
// videos in shuffled batches of `videos_per_center`, then refreshes that
// neck's pseudo labels from the learned specific-branch features against the
// projected centers. Ground-truth pairings never enter here: inputs are the
// video features, the cluster bank, and the config.
class VideoTrainer {
 public:
  VideoTrainer(const std::vector<FrameFeatureSequence>& videos,
               const ClusterBank& bank, const Config& cfg);

  // Writes ckpt_iter<l>.tvgb, labels_iter<l>.tvgl, metrics.csv, and
  // ckpt_final.tvgb under out_dir. resume_from restores a per-iteration
  // checkpoint and replays the remaining iterations bit-for-bit.
  TrainResult run(const std::string& out_dir,
                  const std::string& resume_from = "");

  VideoModel& model() { return model_; }
  const LabelStore& labels() const { return labels_; }

 private:
  void init_labels();
  double refresh_labels(int neck);
  Checkpoint make_checkpoint(int completed_iterations);
  void restore(const std::string& path);

  const std::vector<FrameFeatureSequence>& videos_;
  const ClusterBank& bank_;
  Config cfg_;
  Rng rng_;
  VideoModel model_;
  Adam opt_;
  LabelStore labels_;
  LabelStats label_stats_;
  int trip_degenerate_ = 0;
  int start_iteration_ = 1;
};

// Rebuilds the video model stored in a training checkpoint.
VideoModel video_model_from_checkpoint(const Checkpoint& ck);
LabelStore labels_from_checkpoint(const Checkpoint& ck);

}  // namespace tvg
