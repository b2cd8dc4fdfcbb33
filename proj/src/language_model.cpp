#include "tvg/language_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tvg/checkpoint.hpp"

namespace tvg {

namespace {

Eigen::MatrixXd uniform_init(long rows, long cols, double scale, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = rng.uniform(-scale, scale);
  return m;
}

}  // namespace

LstmLayer::LstmLayer(const std::string& name, int d_in, int hidden_dim,
                     Rng& rng)
    : hidden(hidden_dim) {
  const double sx = 1.0 / std::sqrt(static_cast<double>(d_in));
  const double sh = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  W_x = Param(name + "/W_x", uniform_init(d_in, 4 * hidden_dim, sx, rng));
  W_h = Param(name + "/W_h", uniform_init(hidden_dim, 4 * hidden_dim, sh, rng));
  Eigen::MatrixXd bias = Eigen::MatrixXd::Zero(1, 4 * hidden_dim);
  bias.block(0, hidden_dim, 1, hidden_dim).setOnes();  // forget gate
  b = Param(name + "/b", bias);
}

std::pair<Var, Var> LstmLayer::step(Graph& g, Var x, Var h, Var c) {
  Var gates = g.add(g.add(g.matmul(x, g.leaf(W_x)), g.matmul(h, g.leaf(W_h))),
                    g.leaf(b));
  const int H = hidden;
  Var i = g.sigmoid(g.cols(gates, 0, H));
  Var f = g.sigmoid(g.cols(gates, H, H));
  Var z = g.tanh(g.cols(gates, 2 * H, H));
  Var o = g.sigmoid(g.cols(gates, 3 * H, H));
  Var c_next = g.add(g.cmul(f, c), g.cmul(i, z));
  Var h_next = g.cmul(o, g.tanh(c_next));
  return {h_next, c_next};
}

void LstmLayer::collect(std::vector<Param*>& out) {
  out.push_back(&W_x);
  out.push_back(&W_h);
  out.push_back(&b);
}

Mlp2::Mlp2(const std::string& name, int in, int hidden, int out, Rng& rng) {
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  W1 = Param(name + "/W1", uniform_init(in, hidden, s1, rng));
  b1 = Param(name + "/b1", Eigen::MatrixXd::Zero(1, hidden));
  W2 = Param(name + "/W2", uniform_init(hidden, out, s2, rng));
  b2 = Param(name + "/b2", Eigen::MatrixXd::Zero(1, out));
}

Var Mlp2::apply(Graph& g, Var x) {
  Var h = g.tanh(g.add(g.matmul(x, g.leaf(W1)), g.leaf(b1)));
  return g.add(g.matmul(h, g.leaf(W2)), g.leaf(b2));
}

void Mlp2::collect(std::vector<Param*>& out) {
  out.push_back(&W1);
  out.push_back(&b1);
  out.push_back(&W2);
  out.push_back(&b2);
}

LanguageModel::LanguageModel(int embed_dim, int vocab_size, const Config& cfg,
                             Rng& rng)
    : d_w_(embed_dim),
      n_vocab_(vocab_size),
      d_r_(cfg.sentence_dim),
      d_e_(cfg.neck_dim),
      n_necks_(cfg.n_necks),
      max_len_(cfg.max_query_len) {
  enc1_ = LstmLayer("lang/enc1", d_w_, d_r_, rng);
  enc2_ = LstmLayer("lang/enc2", d_r_, d_r_, rng);
  neck_heads_.reserve(static_cast<size_t>(n_necks_));
  neck_decoders_.reserve(static_cast<size_t>(n_necks_));
  for (int i = 0; i < n_necks_; ++i) {
    neck_heads_.emplace_back("lang/neck" + std::to_string(i), d_r_, d_e_, d_e_,
                             rng);
  }
  for (int i = 0; i < n_necks_; ++i) {
    neck_decoders_.emplace_back("lang/neckdec" + std::to_string(i), d_e_, d_e_,
                                d_e_, rng);
  }
  const double sa = 1.0 / std::sqrt(static_cast<double>(n_necks_ * d_e_));
  agg_W_ = Param("lang/agg/W", uniform_init(n_necks_ * d_e_, d_r_, sa, rng));
  agg_b_ = Param("lang/agg/b", Eigen::MatrixXd::Zero(1, d_r_));
  start_embed_ = Param("lang/start", uniform_init(1, d_w_, 0.1, rng));
  dec1_ = LstmLayer("lang/dec1", d_w_, d_r_, rng);
  dec2_ = LstmLayer("lang/dec2", d_r_, d_r_, rng);
  const double sv = 1.0 / std::sqrt(static_cast<double>(d_r_));
  vocab_W_ = Param("lang/vocab/W", uniform_init(d_r_, n_vocab_, sv, rng));
  vocab_b_ = Param("lang/vocab/b", Eigen::MatrixXd::Zero(1, n_vocab_));
}

LanguageModel::EncodeOut LanguageModel::encode(Graph& g, const QueryTokens& q,
                                               const EmbeddingTable& table) {
  if (q.true_len < 1) {
    throw std::invalid_argument("encode: query '" + q.query_id +
                                "' has no tokens");
  }
  if (table.dim() != d_w_) {
    throw std::invalid_argument("encode: embedding table dim " +
                                std::to_string(table.dim()) +
                                " does not match model dim " +
                                std::to_string(d_w_));
  }
  Var h1 = g.constant(Eigen::MatrixXd::Zero(1, d_r_));
  Var c1 = h1, h2 = h1, c2 = h1;
  for (int t = 0; t < q.true_len; ++t) {
    Var x = g.constant(table.vector_of(q.ids[static_cast<size_t>(t)]).transpose());
    std::tie(h1, c1) = enc1_.step(g, x, h1, c1);
    std::tie(h2, c2) = enc2_.step(g, h1, h2, c2);
  }
  std::vector<Var> necks;
  necks.reserve(static_cast<size_t>(n_necks_));
  for (auto& head : neck_heads_) necks.push_back(head.apply(g, h2));
  return {h2, g.vcat(necks)};
}

LanguageModel::DecodeOut LanguageModel::decode(Graph& g, Var E,
                                               const EmbeddingTable& table,
                                               const std::vector<int>* teacher) {
  const auto& Ev = g.value(E);
  if (Ev.rows() != n_necks_ || Ev.cols() != d_e_) {
    throw std::invalid_argument(
        "decode: neck matrix is " + std::to_string(Ev.rows()) + "x" +
        std::to_string(Ev.cols()) + ", expected " + std::to_string(n_necks_) +
        "x" + std::to_string(d_e_));
  }
  if (teacher && static_cast<int>(teacher->size()) < max_len_) {
    throw std::invalid_argument("decode: teacher sequence shorter than " +
                                std::to_string(max_len_));
  }
  std::vector<Var> mapped;
  mapped.reserve(static_cast<size_t>(n_necks_));
  for (int i = 0; i < n_necks_; ++i) {
    mapped.push_back(neck_decoders_[static_cast<size_t>(i)].apply(
        g, g.rows(E, i, 1)));
  }
  Var r_o = g.add(g.matmul(g.hcat(mapped), g.leaf(agg_W_)), g.leaf(agg_b_));

  Var h1 = r_o, h2 = r_o;
  Var c1 = g.constant(Eigen::MatrixXd::Zero(1, d_r_));
  Var c2 = c1;
  DecodeOut out;
  out.r_o = r_o;
  std::vector<Var> score_rows;
  score_rows.reserve(static_cast<size_t>(max_len_));
  Var input = g.leaf(start_embed_);
  for (int t = 0; t < max_len_; ++t) {
    std::tie(h1, c1) = dec1_.step(g, input, h1, c1);
    std::tie(h2, c2) = dec2_.step(g, h1, h2, c2);
    Var logits = g.add(g.matmul(h2, g.leaf(vocab_W_)), g.leaf(vocab_b_));
    score_rows.push_back(logits);
    if (t + 1 < max_len_) {
      if (teacher) {
        input = g.constant(
            table.vector_of((*teacher)[static_cast<size_t>(t)]).transpose());
      } else {
        long best;
        g.value(logits).row(0).maxCoeff(&best);
        out.emitted.push_back(static_cast<int>(best));
        input = g.constant(table.vector_of(static_cast<int>(best)).transpose());
      }
    } else if (!teacher) {
      long best;
      g.value(logits).row(0).maxCoeff(&best);
      out.emitted.push_back(static_cast<int>(best));
    }
  }
  out.P = g.vcat(score_rows);
  return out;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> LanguageModel::encode_query(
    const QueryTokens& q, const EmbeddingTable& table) {
  Graph g;
  EncodeOut enc = encode(g, q, table);
  return {g.value(enc.r_e).row(0).transpose(), g.value(enc.E)};
}

LanguageModel::Reconstruction LanguageModel::decode_necks(
    const Eigen::MatrixXd& E, const EmbeddingTable& table) {
  Graph g;
  DecodeOut dec = decode(g, g.constant(E), table, nullptr);
  Reconstruction rec;
  rec.r_o = g.value(dec.r_o).row(0).transpose();
  rec.P = g.value(dec.P);
  rec.tokens = dec.emitted;
  return rec;
}

std::vector<Param*> LanguageModel::params() {
  std::vector<Param*> out;
  enc1_.collect(out);
  enc2_.collect(out);
  for (auto& m : neck_heads_) m.collect(out);
  for (auto& m : neck_decoders_) m.collect(out);
  out.push_back(&agg_W_);
  out.push_back(&agg_b_);
  out.push_back(&start_embed_);
  dec1_.collect(out);
  dec2_.collect(out);
  out.push_back(&vocab_W_);
  out.push_back(&vocab_b_);
  return out;
}

Var loss_cel(Graph& g, Var P, const QueryTokens& q) {
  if (q.true_len < 1) {
    throw std::invalid_argument("loss_cel: query '" + q.query_id +
                                "' has no tokens");
  }
  std::vector<int> targets(q.ids.begin(), q.ids.begin() + q.true_len);
  return g.cross_entropy_rows(g.rows(P, 0, q.true_len), targets);
}

Var loss_dqa(Graph& g, Var E, double lambda) {
  const long d_e = g.value(E).cols();
  Eigen::MatrixXd target =
      lambda * Eigen::MatrixXd::Identity(d_e, d_e);
  Var M = g.sub(g.matmul(g.transpose(E), E), g.constant(target));
  return g.sqrt(g.sum(g.square(M)));
}

Var loss_mse(Graph& g, Var r_e, Var r_o) {
  const auto &a = g.value(r_e), &b = g.value(r_o);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(
        "loss_mse: dim mismatch " + std::to_string(a.rows()) + "x" +
        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
        std::to_string(b.cols()));
  }
  return g.mean(g.square(g.sub(r_e, r_o)));
}

Var loss_language(Graph& g, Var cel, Var mse, Var dqa, double alpha_w,
                  double beta_w) {
  return g.add(cel, g.add(g.scale(mse, alpha_w), g.scale(dqa, beta_w)));
}

namespace {

// Builds the full per-query loss; shared by training and evaluation.
Var build_query_loss(LanguageModel& model, Graph& g, const QueryTokens& q,
                     const EmbeddingTable& table, const Config& cfg) {
  auto enc = model.encode(g, q, table);
  auto dec = model.decode(g, enc.E, table, &q.ids);
  Var cel = loss_cel(g, dec.P, q);
  Var mse = loss_mse(g, enc.r_e, dec.r_o);
  Var dqa = loss_dqa(g, enc.E, cfg.lambda);
  return loss_language(g, cel, mse, dqa, cfg.alpha_w, cfg.beta_w);
}

}  // namespace

double evaluate_language_loss(LanguageModel& model,
                              const std::vector<QueryTokens>& queries,
                              const EmbeddingTable& table, const Config& cfg) {
  if (queries.empty()) return 0.0;
  double total = 0.0;
  for (const auto& q : queries) {
    Graph g;
    total += g.scalar_value(build_query_loss(model, g, q, table, cfg));
  }
  return total / static_cast<double>(queries.size());
}

LanguageTrace train_language_model(LanguageModel& model,
                                   const QueryCorpus& corpus,
                                   const EmbeddingTable& table,
                                   const Config& cfg, Rng& rng,
                                   const std::string& trace_csv) {
  if (corpus.queries.empty()) {
    throw std::invalid_argument("train_language_model: empty corpus");
  }
  const size_t M = corpus.queries.size();
  const size_t heldout = M >= 10 ? (M + 9) / 10 : 0;
  const size_t trainable = M - heldout;

  std::vector<QueryTokens> heldout_slice(corpus.queries.end() -
                                             static_cast<long>(heldout),
                                         corpus.queries.end());
  std::vector<QueryTokens> eval_slice =
      heldout ? heldout_slice : corpus.queries;

  LanguageTrace trace;
  trace.heldout_count = static_cast<int>(eval_slice.size());
  trace.heldout_initial = evaluate_language_loss(model, eval_slice, table, cfg);

  Adam opt(model.params(), cfg.lr_language);
  for (int epoch = 0; epoch < cfg.language_epochs; ++epoch) {
    auto order = rng.permutation(trainable);
    double sum_cel = 0, sum_mse = 0, sum_dqa = 0, sum_total = 0;
    for (size_t idx : order) {
      const QueryTokens& q = corpus.queries[idx];
      Graph g;
      auto enc = model.encode(g, q, table);
      auto dec = model.decode(g, enc.E, table, &q.ids);
      Var cel = loss_cel(g, dec.P, q);
      Var mse = loss_mse(g, enc.r_e, dec.r_o);
      Var dqa = loss_dqa(g, enc.E, cfg.lambda);
      Var total = loss_language(g, cel, mse, dqa, cfg.alpha_w, cfg.beta_w);
      const double tv = g.scalar_value(total);
      if (!std::isfinite(tv)) {
        throw std::runtime_error(
            "train_language_model: non-finite loss at epoch " +
            std::to_string(epoch) + ", query " + q.query_id);
      }
      sum_cel += g.scalar_value(cel);
      sum_mse += g.scalar_value(mse);
      sum_dqa += g.scalar_value(dqa);
      sum_total += tv;
      opt.zero_grad();
      g.backward(total);
      opt.step();
    }
    const double n = std::max<double>(1.0, static_cast<double>(trainable));
    trace.rows.push_back({epoch, sum_cel / n, sum_mse / n, sum_dqa / n,
                          sum_total / n});
  }
  trace.heldout_final = evaluate_language_loss(model, eval_slice, table, cfg);

  if (!trace_csv.empty()) {
    std::ofstream out(trace_csv);
    if (!out) {
      throw std::runtime_error("cannot write loss trace: " + trace_csv);
    }
    out << "epoch,cel,mse,dqa,total\n";
    out.precision(12);
    for (const auto& row : trace.rows) {
      out << row.epoch << "," << row.cel << "," << row.mse << "," << row.dqa
          << "," << row.total << "\n";
    }
  }
  return trace;
}

void save_language_model(LanguageModel& model, const Config& cfg,
                         const std::string& path) {
  Bank bank;
  bank.put_text("meta/format", "tvg-lang-v1");
  bank.put_text("meta/config", cfg.to_text());
  bank.put_text("meta/embed_dim", std::to_string(model.embed_dim()));
  bank.put_text("meta/vocab_size", std::to_string(model.vocab_size()));
  save_params(bank, model.params(), "param");
  bank.save(path);
}

LanguageModel load_language_model(const std::string& path) {
  Bank bank = Bank::load(path);
  if (!bank.has("meta/format") || bank.text("meta/format") != "tvg-lang-v1")
    throw std::runtime_error(path + ": not a language model file");
  Config cfg = Config::from_text(bank.text("meta/config"));
  cfg.validate();
  Rng scratch(0);
  LanguageModel model(std::stoi(bank.text("meta/embed_dim")),
                      std::stoi(bank.text("meta/vocab_size")), cfg, scratch);
  load_params(bank, model.params(), "param");
  return model;
}

}  // namespace tvg
