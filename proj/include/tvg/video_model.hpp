#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "tvg/autodiff.hpp"
#include "tvg/common.hpp"
#include "tvg/config.hpp"

namespace tvg {

// Frame-side model: affine projection into the joint space followed by one
// residual multi-head self-attention layer (no positional terms), a separate
// projection for semantic centers, and a two-convolution foreground branch
// over the raw frames with a per-frame sigmoid head.
class VideoModel {
 public:
  VideoModel(int frame_dim, int center_dim, const Config& cfg, Rng& rng);

  // Tape builders. `frames` and `centers` enter as constants; parameters
  // enter as gradient sinks.
  Var encode(Graph& g, const Eigen::MatrixXd& frames);        // T x d'
  Var project(Graph& g, const Eigen::MatrixXd& centers);      // N x d'

  struct Foreground {
    Var features;   // T x d'
    Var attention;  // T x 1, entries in (0,1)
  };
  Foreground foreground(Graph& g, const Eigen::MatrixXd& frames);

  // Eager conveniences for label refresh and inference.
  Eigen::MatrixXd encode_frames(const Eigen::MatrixXd& frames);
  Eigen::MatrixXd project_centers(const Eigen::MatrixXd& centers);
  std::pair<Eigen::MatrixXd, Eigen::VectorXd> foreground_values(
      const Eigen::MatrixXd& frames);

  std::vector<Param*> params();

  int frame_dim() const { return frame_dim_; }
  int center_dim() const { return center_dim_; }
  int joint_dim() const { return joint_dim_; }
  int heads() const { return heads_; }

 private:
  int frame_dim_ = 0, center_dim_ = 0, joint_dim_ = 0, heads_ = 0;
  Param W_p, b_p;                    // frame projection
  Param W_q, W_k, W_v, W_o;          // self-attention, bias free
  Param W_c, b_c;                    // center projection
  Param Wm1, W01, Wp1, b1;           // conv over time, kernel 3
  Param Wm2, W02, Wp2, b2;
  Param w_h, b_h;                    // scalar foreground head
};

struct SpecificAttention {
  Var A;  // row-stochastic, N x T
  Var B;  // (1 - A) / T
};

// A = rowwise softmax of Chat * Fhat^T (plain correlation, no scaling).
SpecificAttention specific_attention(Graph& g, Var Chat, Var Fhat);

// Eager form for inference paths.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> specific_attention_values(
    const Eigen::MatrixXd& Chat, const Eigen::MatrixXd& Fhat);

// Row j of the attention map applied to the encoded frames: 1 x d'.
Var compose_activity(Graph& g, Var attn, Var Fhat, int j);

// Cosine distance 1 - cos(a, b) between two row vectors, norms floored at
// 1e-8. Inputs of differing width are rejected.
Var cosine_distance(Graph& g, Var a, Var b);
double cosine_distance_value(const Eigen::RowVectorXd& a,
                             const Eigen::RowVectorXd& b);

// Contrastive loss over composed activities: pos[v][j] / neg[v][j] hold the
// positive and negative composition for video v and sampled center j.
// Per (j, v): sum over u != v of max[d(p_vj, p_uj) - tau1, 0] plus theta
// times max[d(p_vj, p_uj) - d(p_vj, n_vj) + tau2, 0].
Var loss_sab(Graph& g, const std::vector<std::vector<Var>>& pos,
             const std::vector<std::vector<Var>>& neg, double tau1,
             double tau2, double theta);

// Triplet loss over foreground features. Anchors are the foreground frames;
// each pairs with its nearest foreground frame and the farthest background
// frame (cosine distance, ties to the smallest index, selection done on
// values). Fewer than two foreground or one background frames give 0 and
// bump the counter.
Var loss_trip(Graph& g, Var features, const std::vector<uint8_t>& labels,
              double tau3, int* degenerate_counter = nullptr);

// Binary cross-entropy between Y and h_jt = A[j,t] * fore[t], clamped to
// [1e-7, 1 - 1e-7], summed over centers and frames.
Var loss_cls(Graph& g, Var A_spe, Var A_fore, const Eigen::MatrixXd& Y);

Var loss_video(Graph& g, Var cls, Var sab, Var trip, double alpha_v,
               double beta_v);

}  // namespace tvg
