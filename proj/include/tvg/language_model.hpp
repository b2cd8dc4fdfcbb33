#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tvg/autodiff.hpp"
#include "tvg/common.hpp"
#include "tvg/config.hpp"
#include "tvg/data_model.hpp"

namespace tvg {

// One recurrent layer; gate order in the fused weight matrices is
// [input, forget, cell, output]. Forget-gate bias starts at 1.
struct LstmLayer {
  Param W_x;  // d_in x 4H
  Param W_h;  // H x 4H
  Param b;    // 1 x 4H
  int hidden = 0;

  LstmLayer() = default;
  LstmLayer(const std::string& name, int d_in, int hidden_dim, Rng& rng);

  // x: 1 x d_in, h/c: 1 x H. Returns (h', c').
  std::pair<Var, Var> step(Graph& g, Var x, Var h, Var c);

  void collect(std::vector<Param*>& out);
};

// affine -> tanh -> affine
struct Mlp2 {
  Param W1, b1, W2, b2;

  Mlp2() = default;
  Mlp2(const std::string& name, int in, int hidden, int out, Rng& rng);

  Var apply(Graph& g, Var x);
  void collect(std::vector<Param*>& out);
};

// Query encoder-decoder that mines N_e neck vectors per query. The
// embedding table is frozen input data, not a parameter.
class LanguageModel {
 public:
  LanguageModel(int embed_dim, int vocab_size, const Config& cfg, Rng& rng);

  struct EncodeOut {
    Var r_e;  // 1 x d_r
    Var E;    // N_e x d_e
  };
  // Runs the two-layer recurrent encoder over the true-length prefix and
  // applies the per-neck feed-forward maps. Throws on empty queries.
  EncodeOut encode(Graph& g, const QueryTokens& q, const EmbeddingTable& table);

  struct DecodeOut {
    Var r_o;  // 1 x d_r, aggregated from the necks
    Var P;    // L_max x N_w unnormalized scores
    std::vector<int> emitted;  // greedy choices; teacher mode leaves it empty
  };
  // Aggregates the necks into r_o, seeds both decoder layers with it, and
  // unrolls L_max steps. With `teacher` the inputs are the ground-truth
  // tokens shifted by one (training); without, the decoder feeds back its
  // own greedy choices (reconstruction reports).
  DecodeOut decode(Graph& g, Var E, const EmbeddingTable& table,
                   const std::vector<int>* teacher);

  // Eager convenience wrappers (no gradients kept).
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> encode_query(
      const QueryTokens& q, const EmbeddingTable& table);
  struct Reconstruction {
    Eigen::VectorXd r_o;
    Eigen::MatrixXd P;
    std::vector<int> tokens;
  };
  Reconstruction decode_necks(const Eigen::MatrixXd& E,
                              const EmbeddingTable& table);

  std::vector<Param*> params();

  int neck_count() const { return n_necks_; }
  int neck_dim() const { return d_e_; }
  int sentence_dim() const { return d_r_; }
  int max_len() const { return max_len_; }
  int vocab_size() const { return n_vocab_; }
  int embed_dim() const { return d_w_; }

 private:
  int d_w_, n_vocab_, d_r_, d_e_, n_necks_, max_len_;
  LstmLayer enc1_, enc2_;
  std::vector<Mlp2> neck_heads_;
  std::vector<Mlp2> neck_decoders_;
  Param agg_W_, agg_b_;     // N_e*d_e -> d_r
  Param start_embed_;       // 1 x d_w
  LstmLayer dec1_, dec2_;
  Param vocab_W_, vocab_b_; // d_r -> N_w
};

// Loss builders. All return 1x1 nodes in g.
Var loss_cel(Graph& g, Var P, const QueryTokens& q);
Var loss_dqa(Graph& g, Var E, double lambda);
Var loss_mse(Graph& g, Var r_e, Var r_o);
Var loss_language(Graph& g, Var cel, Var mse, Var dqa, double alpha_w,
                  double beta_w);

struct LanguageTrace {
  struct Row {
    int epoch;
    double cel, mse, dqa, total;
  };
  std::vector<Row> rows;
  double heldout_initial = 0.0;  // mean L_w on the held-out slice, pre-training
  double heldout_final = 0.0;
  int heldout_count = 0;
};

// Mean L_w over the given queries with current parameters (no updates).
double evaluate_language_loss(LanguageModel& model,
                              const std::vector<QueryTokens>& queries,
                              const EmbeddingTable& table, const Config& cfg);

// Adam over shuffled single-query steps, cfg.language_epochs epochs. When
// the corpus has at least 10 queries the last tenth is held out from the
// updates and only scored; smaller corpora train on everything and the
// held-out numbers cover the full corpus. Aborts on non-finite loss. When
// trace_csv is non-empty, writes rows "epoch,cel,mse,dqa,total".
LanguageTrace train_language_model(LanguageModel& model,
                                   const QueryCorpus& corpus,
                                   const EmbeddingTable& table,
                                   const Config& cfg, Rng& rng,
                                   const std::string& trace_csv = "");

// Bank with a format tag, the config text, the input dimensions, and every
// parameter tensor. Loading validates the tag and rebuilds the model.
void save_language_model(LanguageModel& model, const Config& cfg,
                         const std::string& path);
LanguageModel load_language_model(const std::string& path);

}  // namespace tvg
