#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "tvg/common.hpp"
#include "tvg/data_model.hpp"
#include "tvg/inference.hpp"

namespace tvg {

// Generative recipe for the desk-scale benchmark: K latent semantic atoms,
// each with a feature prototype and a private vocabulary; videos are noise
// with one planted prototype segment; queries are token strings from the
// matching atom's vocabulary. The query-video pairing and the planted
// segment are written to separate files that only evaluation reads.
struct SyntheticSpec {
  int atoms = 8;
  int vocab_per_atom = 6;
  int videos = 200;
  int frames = 64;
  double seg_min_frac = 0.10;
  double seg_max_frac = 0.30;
  int feature_dim = 32;
  double noise_std = 0.5;
  double prototype_scale = 3.0;
  int embed_dim = 16;
  double embed_jitter = 0.3;
  int query_min_len = 3;
  int query_max_len = 8;
  int segments_per_video = 1;  // extra segments come from other atoms
  uint64_t seed = 0;

  void validate() const;
  std::string to_text() const;
  static SyntheticSpec from_text(const std::string& text);
  static SyntheticSpec load(const std::string& path);
  void save(const std::string& path) const;
};

// Planted segment length bounds for a T-frame video; throws when the
// fraction range admits no whole frame count.
std::pair<long, long> segment_length_bounds(const SyntheticSpec& spec, long T);

struct SyntheticCorpus {
  std::vector<FrameFeatureSequence> videos;
  std::vector<std::string> query_lines;  // token text; line i belongs to q<i>
  std::vector<std::string> query_ids;
  std::vector<std::string> vocab;
  Eigen::MatrixXd embedding_rows;  // one row per vocab token
  // Evaluation-only truths.
  std::map<std::string, std::string> query_video;
  std::map<std::string, Segment> ground_truth;
  std::map<std::string, int> video_atom;
};

SyntheticCorpus generate_corpus(const SyntheticSpec& spec);

// Layout under dir: videos/<id>.tvgm, queries.txt, vocab.txt,
// embeddings.tvgm, spec.txt, and the evaluation-only pairs.csv,
// groundtruth.csv, atoms.csv.
void write_corpus(const std::string& dir, const SyntheticCorpus& corpus);

std::map<std::string, Segment> load_ground_truth(const std::string& path);
std::map<std::string, std::string> load_pairs(const std::string& path);

// Uniformly random segments drawn from the spec's length range, top_n per
// query, scores descending by rank.
std::vector<GroundingResult> random_baseline(
    const std::map<std::string, std::string>& query_video,
    const std::map<std::string, long>& video_frames, const SyntheticSpec& spec,
    int top_n, uint64_t seed);

// Monte-Carlo estimate of R@1 for a random segment against a random planted
// segment, both drawn from the spec's generative ranges. Percentage.
double mc_random_recall(const SyntheticSpec& spec, double theta, int draws,
                        uint64_t seed);

}  // namespace tvg
