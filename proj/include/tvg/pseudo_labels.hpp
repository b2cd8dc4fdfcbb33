#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace tvg {

// W_st = exp(-||x_s - x_t||^2 / (2 sigma^2)) over the rows of `points`.
// Symmetric with unit diagonal. Throws when sigma <= 0.
Eigen::MatrixXd gaussian_affinity(const Eigen::MatrixXd& points, double sigma);

// Median of the strictly positive pairwise row distances; 0 when every row
// is identical (callers treat that as the degenerate-video signal).
double median_pairwise_distance(const Eigen::MatrixXd& points);

struct NcutResult {
  std::vector<uint8_t> labels;  // labels[0] == 0 by convention
  double lambda2 = 0.0;
  double residual = 0.0;
};

// Spectral bipartition: Fiedler vector of L_sym = I - D^{-1/2} W D^{-1/2},
// thresholded at 0. Requires a symmetric nonnegative W with positive row
// sums and at least one off-diagonal edge. The eigenpair residual is
// checked against 1e-8.
NcutResult ncut_bipartition(const Eigen::MatrixXd& W);

// Normalized-cut objective of a given bipartition, for oracle comparisons.
// Empty sides give +infinity.
double ncut_value(const Eigen::MatrixXd& W, const std::vector<uint8_t>& labels);

struct LabelStats {
  int degenerate_all_ones = 0;  // constant-feature videos forced to all-1
  int single_frame = 0;         // T=1 videos labeled 1 by definition
};

// Binary per-frame labels for one (video, center) pair: bipartition the
// concatenated rows [f_t ; c] with a Gaussian-kernel normalized cut, then
// orient so the side whose mean frame feature is more cosine-similar to c
// is positive. Tied similarity makes the smaller side positive (equal
// sizes fall back to the side holding frame 0). sigma <= 0 selects the
// median pairwise distance of the concatenated points.
std::vector<uint8_t> init_pseudo_labels(const Eigen::MatrixXd& frames,
                                        const Eigen::VectorXd& center,
                                        double sigma = 0.0,
                                        LabelStats* stats = nullptr);

// Refresh step of the iterative loop: identical rule on learned features.
std::vector<uint8_t> update_pseudo_labels(const Eigen::MatrixXd& learned,
                                          const Eigen::VectorXd& center,
                                          double sigma = 0.0,
                                          LabelStats* stats = nullptr);

}  // namespace tvg
