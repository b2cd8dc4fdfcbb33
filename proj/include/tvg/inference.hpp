#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "tvg/video_model.hpp"

namespace tvg {

struct Segment {
  long start = 0;  // inclusive frame indices
  long end = 0;
  double score = 0.0;
};

struct GroundingResult {
  std::string video_id;
  std::string query_id;
  std::vector<Segment> segments;  // descending score
};

// Joint per-frame match probability: the query's necks act as semantic
// centers, each neck row of the specific attention is gated by the
// foreground attention, softmaxed over time, and the per-neck distributions
// multiply entrywise.
Eigen::VectorXd score_curve(const Eigen::MatrixXd& necks,
                            const Eigen::MatrixXd& frames, VideoModel& model);

// Expands [seed, seed] outward: a neighbor joins while its score stays at
// or above threshold times the score of the nearest current boundary.
// The segment keeps the seed's score.
Segment grow_segment(const Eigen::VectorXd& scores, long seed,
                     double threshold);

// The N highest plateau local maxima (leftmost index represents a plateau),
// each grown independently; overlapping candidates keep only the
// higher-scored segment. Sorted by descending score, ties by smaller start.
std::vector<Segment> top_n_segments(const Eigen::VectorXd& scores, int n,
                                    double threshold);

// Intersection over union on inclusive frame intervals.
double temporal_iou(const Segment& a, const Segment& b);

// Percentage of queries where some segment among the first n has IoU
// strictly greater than theta. Every result needs a ground-truth entry.
double recall_at_n(const std::vector<GroundingResult>& results,
                   const std::map<std::string, Segment>& ground_truth, int n,
                   double theta);

// One line per ranked segment: video_id,query_id,rank,start,end,score.
// A positive fps appends start/end converted to seconds.
void save_results(const std::string& path,
                  const std::vector<GroundingResult>& results,
                  double fps = 0.0);
std::vector<GroundingResult> load_results(const std::string& path);

// R@{1,5} x IoU{0.3,0.5,0.7} table as CSV text.
std::string eval_table_csv(const std::vector<GroundingResult>& results,
                           const std::map<std::string, Segment>& ground_truth);

}  // namespace tvg
