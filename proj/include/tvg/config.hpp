#pragma once

#include <cstdint>
#include <string>

namespace tvg {

// All tunables for the pipeline in one place. Loaded from a plain
// key=value file ('#' starts a comment, blank lines ignored). Unknown keys
// are an error so typos fail loudly instead of silently using defaults.
struct Config {
  // Language mining.
  int n_necks = 4;        // number of semantic necks mined per query
  int sentence_dim = 512; // LSTM hidden width (encoder and decoder)
  int neck_dim = 256;     // width of each neck representation
  double lambda = 0.5;    // target diagonal value in the neck-separation loss
  double alpha_w = 0.5;   // weight of the reconstruction term
  double beta_w = 0.5;    // weight of the neck-separation term
  int max_query_len = 10; // queries are truncated/padded to this length
  int language_epochs = 30;
  double lr_language = 1e-4;

  // Clustering.
  int n_clusters = 16;
  int kmeans_restarts = 8;
  int kmeans_max_iters = 100;
  std::string center_mode = "center"; // center | sample | random

  // Video model.
  int joint_dim = 1024;    // shared space for frames and centers
  int attention_heads = 4; // heads in the frame self-attention layer
  double theta = 1.0;      // weight of the dispersing term inside L_sab
  double tau1 = 1e-4;      // similarity margin
  double tau2 = 1e-4;      // dispersion margin
  double tau3 = 0.5;       // frame triplet margin
  double alpha_v = 0.5;    // weight of the activity-separation term
  double beta_v = 0.5;     // weight of the frame triplet term
  int sampled_centers = 4; // J: centers sampled per step for L_sab
  int videos_per_center = 8; // Z: videos sampled per chosen center
  double sigma_ncut = 0.0; // 0 means median pairwise distance heuristic
  int video_epochs = 1;    // passes over the data per (iteration, neck)
  double lr_video = 5e-4;
  int iterations = 5; // outer label-refresh rounds

  // Inference.
  double infer_threshold = 0.9; // peak-growing stop ratio
  int top_n = 5;

  uint64_t seed = 0;

  // Throws std::runtime_error naming the offending key/value.
  void validate() const;

  // Stable content hash for logging; equal configs hash equal.
  uint64_t hash() const;

  std::string to_text() const;

  static Config from_text(const std::string& text);
  static Config load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace tvg
