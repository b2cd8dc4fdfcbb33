#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_oracles.hpp"
#include "tvg/common.hpp"
#include "tvg/config.hpp"
#include "tvg/data_model.hpp"
#include "tvg/gradcheck.hpp"
#include "tvg/language_model.hpp"
#include "tvg/matrix_io.hpp"

using namespace tvg;
namespace fs = std::filesystem;

namespace {

Config small_cfg() {
  Config cfg;
  cfg.n_necks = 2;
  cfg.sentence_dim = 8;
  cfg.neck_dim = 6;
  cfg.max_query_len = 4;
  cfg.lambda = 0.5;
  cfg.alpha_w = 0.5;
  cfg.beta_w = 0.5;
  return cfg;
}

EmbeddingTable small_table(int vocab, int d_w, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> tokens;
  for (int i = 0; i < vocab; ++i) tokens.push_back("t" + std::to_string(i));
  Eigen::MatrixXd vecs(vocab, d_w);
  for (int r = 0; r < vocab; ++r)
    for (int c = 0; c < d_w; ++c) vecs(r, c) = rng.normal(0.0, 0.5);
  return EmbeddingTable(std::move(tokens), std::move(vecs));
}

QueryTokens make_query(std::vector<int> ids, int true_len, int padded,
                       int pad_id) {
  QueryTokens q;
  q.query_id = "q0";
  q.true_len = true_len;
  q.ids = std::move(ids);
  while (static_cast<int>(q.ids.size()) < padded) q.ids.push_back(pad_id);
  return q;
}

Param* find_param(std::vector<Param*> params, const std::string& name) {
  for (Param* p : params)
    if (p->name == name) return p;
  REQUIRE(false);
  return nullptr;
}

Eigen::MatrixXd randm(long r, long c, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("language") {

TEST_CASE("encoding is deterministic and ignores bytes past the true length") {
  Config cfg = small_cfg();
  EmbeddingTable table = small_table(9, 7, 1);
  Rng rng(3);
  LanguageModel model(table.dim(), table.size(), cfg, rng);

  QueryTokens a = make_query({1, 2, 3}, 3, 4, table.pad_id());
  auto [re1, E1] = model.encode_query(a, table);
  auto [re2, E2] = model.encode_query(a, table);
  CHECK((re1 - re2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((E1 - E2).cwiseAbs().maxCoeff() == 0.0);

  // Same prefix, garbage after true_len: the suffix must not leak in.
  QueryTokens b = a;
  b.ids[3] = 5;
  auto [re3, E3] = model.encode_query(b, table);
  CHECK((re1 - re3).cwiseAbs().maxCoeff() == 0.0);
  CHECK((E1 - E3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("changing one token changes the mined necks") {
  Config cfg = small_cfg();
  EmbeddingTable table = small_table(9, 7, 2);
  Rng rng(4);
  LanguageModel model(table.dim(), table.size(), cfg, rng);
  QueryTokens a = make_query({1, 2, 3}, 3, 4, table.pad_id());
  QueryTokens b = make_query({1, 6, 3}, 3, 4, table.pad_id());
  auto [rea, Ea] = model.encode_query(a, table);
  auto [reb, Eb] = model.encode_query(b, table);
  CHECK((Ea - Eb).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("empty query is rejected") {
  Config cfg = small_cfg();
  EmbeddingTable table = small_table(9, 7, 5);
  Rng rng(5);
  LanguageModel model(table.dim(), table.size(), cfg, rng);
  QueryTokens q = make_query({}, 0, 4, table.pad_id());
  Graph g;
  CHECK_THROWS(model.encode(g, q, table));
}

TEST_CASE("zeroed neck maps emit exactly their output bias for any query") {
  Config cfg = small_cfg();
  EmbeddingTable table = small_table(9, 7, 6);
  Rng rng(6);
  LanguageModel model(table.dim(), table.size(), cfg, rng);
  auto params = model.params();
  Eigen::MatrixXd want(cfg.n_necks, cfg.neck_dim);
  for (int i = 0; i < cfg.n_necks; ++i) {
    std::string base = "lang/neck" + std::to_string(i);
    find_param(params, base + "/W1")->value.setZero();
    find_param(params, base + "/b1")->value.setZero();
    find_param(params, base + "/W2")->value.setZero();
    Param* b2 = find_param(params, base + "/b2");
    b2->value = randm(1, cfg.neck_dim, 100 + i);
    want.row(i) = b2->value.row(0);
  }
  for (int t : {1, 2, 5}) {
    QueryTokens q = make_query({t, t}, 2, 4, table.pad_id());
    auto [re, E] = model.encode_query(q, table);
    CHECK((E - want).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("zero necks through zeroed decoder biases aggregate to r_o = 0") {
  Config cfg = small_cfg();
  EmbeddingTable table = small_table(9, 7, 7);
  Rng rng(7);
  LanguageModel model(table.dim(), table.size(), cfg, rng);
  auto params = model.params();
  for (int i = 0; i < cfg.n_necks; ++i) {
    std::string base = "lang/neckdec" + std::to_string(i);
    find_param(params, base + "/b1")->value.setZero();
    find_param(params, base + "/b2")->value.setZero();
  }
  find_param(params, "lang/agg/b")->value.setZero();
  Graph g;
  Var E = g.constant(Eigen::MatrixXd::Zero(cfg.n_necks, cfg.neck_dim));
  auto out = model.decode(g, E, table, nullptr);
  CHECK(g.value(out.r_o).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.value(out.P).rows() == cfg.max_query_len);
  CHECK(g.value(out.P).cols() == table.size());
  CHECK(out.emitted.size() == static_cast<size_t>(cfg.max_query_len));
}

TEST_CASE("teacher-forced decode leaves emitted empty and matches shapes") {
  Config cfg = small_cfg();
  EmbeddingTable table = small_table(9, 7, 8);
  Rng rng(8);
  LanguageModel model(table.dim(), table.size(), cfg, rng);
  QueryTokens q = make_query({1, 2, 3, 4}, 4, 4, table.pad_id());
  Graph g;
  auto enc = model.encode(g, q, table);
  auto dec = model.decode(g, enc.E, table, &q.ids);
  CHECK(dec.emitted.empty());
  CHECK(g.value(dec.P).rows() == 4);
  CHECK(g.value(dec.r_o).rows() == 1);
  CHECK(g.value(dec.r_o).cols() == cfg.sentence_dim);
}

TEST_CASE("uniform scores give L ln(N_w) exactly") {
  Graph g;
  QueryTokens q;
  q.true_len = 5;
  q.ids = {0, 1, 2, 3, 4};
  Var P = g.constant(Eigen::MatrixXd::Zero(5, 100));
  double v = g.scalar_value(loss_cel(g, P, q));
  CHECK(v == doctest::Approx(5.0 * std::log(100.0)).epsilon(1e-9));
}

TEST_CASE("a 50-point margin saturates the softmax loss below 1e-20") {
  Graph g;
  QueryTokens q;
  q.true_len = 1;
  q.ids = {2};
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(1, 5);
  P(0, 2) = 50.0;
  double v = g.scalar_value(loss_cel(g, g.constant(P), q));
  CHECK(v >= 0.0);
  CHECK(v < 1e-20);
}

TEST_CASE("token loss over random scores matches the scalar oracle") {
  for (uint64_t seed : {11u, 12u, 13u}) {
    Eigen::MatrixXd P = randm(3, 7, seed);
    QueryTokens q;
    q.true_len = 3;
    q.ids = {int(seed % 7), 2, 6};
    Graph g;
    double v = g.scalar_value(loss_cel(g, g.constant(P), q));
    CHECK(v == doctest::Approx(oracle::cel_oracle(P, q.ids, 3)).epsilon(1e-12));
  }
}

TEST_CASE("rows past the true length never affect the token loss") {
  Eigen::MatrixXd P1 = randm(4, 6, 21);
  Eigen::MatrixXd P2 = P1;
  P2.row(3).setConstant(1e6);  // beyond true_len
  QueryTokens q;
  q.true_len = 3;
  q.ids = {0, 1, 2, 0};
  Graph g1, g2;
  CHECK(g1.scalar_value(loss_cel(g1, g1.constant(P1), q)) ==
        g2.scalar_value(loss_cel(g2, g2.constant(P2), q)));
}

TEST_CASE("neck separation penalty closed forms") {
  // All-zero necks: ||0 - lambda I||_F = lambda sqrt(d_e).
  Graph g;
  double v0 = g.scalar_value(
      loss_dqa(g, g.constant(Eigen::MatrixXd::Zero(2, 4)), 0.5));
  CHECK(v0 == doctest::Approx(0.5 * 2.0).epsilon(1e-9));

  // One unit-norm neck, d_e = 4, lambda = 0.5 -> exactly 1.
  Eigen::VectorXd u(4);
  u << 0.5, 0.5, 0.5, 0.5;  // unit norm
  Graph g2;
  double v1 = g2.scalar_value(loss_dqa(g2, g2.constant(u.transpose()), 0.5));
  CHECK(v1 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("neck separation penalty vanishes exactly on scaled orthonormal columns") {
  // E (N_e x d_e) with E^T E = lambda I.
  const int ne = 5, de = 3;
  Eigen::MatrixXd A = randm(ne, de, 31);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(ne, de);
  double lambda = 0.37;
  Eigen::MatrixXd E = std::sqrt(lambda) * Q;
  Graph g;
  CHECK(g.scalar_value(loss_dqa(g, g.constant(E), lambda)) < 1e-12);
  // And any perturbation moves it strictly above zero.
  E(0, 0) += 0.05;
  Graph g2;
  CHECK(g2.scalar_value(loss_dqa(g2, g2.constant(E), lambda)) > 1e-4);
}

TEST_CASE("neck separation penalty matches the scalar oracle") {
  for (uint64_t seed : {41u, 42u}) {
    Eigen::MatrixXd E = randm(3, 5, seed);
    Graph g;
    CHECK(g.scalar_value(loss_dqa(g, g.constant(E), 0.5)) ==
          doctest::Approx(oracle::dqa_oracle(E, 0.5)).epsilon(1e-12));
  }
}

TEST_CASE("reconstruction error closed forms and oracle") {
  Graph g;
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 1, 0;
  b << 0, 0;
  CHECK(g.scalar_value(loss_mse(g, g.constant(a), g.constant(b))) ==
        doctest::Approx(0.5).epsilon(1e-12));
  Graph g2;
  CHECK(g2.scalar_value(loss_mse(g2, g2.constant(a), g2.constant(a))) == 0.0);

  Eigen::MatrixXd x = randm(1, 9, 51), y = randm(1, 9, 52);
  Graph g3;
  CHECK(g3.scalar_value(loss_mse(g3, g3.constant(x), g3.constant(y))) ==
        doctest::Approx(oracle::mse_oracle(x.row(0), y.row(0))).epsilon(1e-12));

  Graph g4;
  CHECK_THROWS(loss_mse(g4, g4.constant(x), g4.constant(randm(1, 5, 53))));
}

TEST_CASE("weighted language loss composes as cel + a*mse + b*dqa") {
  Graph g;
  Var cel = g.scalar(2.0), mse = g.scalar(1.0), dqa = g.scalar(4.0);
  double v = g.scalar_value(loss_language(g, cel, mse, dqa, 0.5, 0.5));
  CHECK(v == doctest::Approx(4.5).epsilon(1e-12));
  Graph g2;
  double v2 = g2.scalar_value(loss_language(g2, g2.scalar(2.0), g2.scalar(9.0),
                                            g2.scalar(7.0), 0.0, 0.0));
  CHECK(v2 == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("full language loss gradients check out at the contract dims") {
  // d_r=8, d_e=6, N_e=2, N_w=11, L=4.
  Config cfg = small_cfg();
  EmbeddingTable table = small_table(9, 7, 61);  // 9 + <unk> + <pad> = 11
  REQUIRE(table.size() == 11);
  for (uint64_t seed : {1u, 2u}) {
    Rng rng(seed);
    LanguageModel model(table.dim(), table.size(), cfg, rng);
    QueryTokens q = make_query({1, 4, 2, 7}, 4, 4, table.pad_id());
    auto build = [&](Graph& g) {
      auto enc = model.encode(g, q, table);
      auto dec = model.decode(g, enc.E, table, &q.ids);
      Var cel = loss_cel(g, dec.P, q);
      Var mse = loss_mse(g, enc.r_e, dec.r_o);
      Var dqa = loss_dqa(g, enc.E, cfg.lambda);
      return loss_language(g, cel, mse, dqa, cfg.alpha_w, cfg.beta_w);
    };
    GradCheckOptions opt;
    opt.max_coords_per_param = 6;
    opt.sample_seed = seed;
    auto rep = check_gradients(model.params(), build, opt);
    INFO(rep.describe());
    CHECK(rep.max_rel_err <= 1e-4);
  }
}

TEST_CASE("zero learning rate leaves every parameter byte-identical") {
  Config cfg = small_cfg();
  cfg.language_epochs = 2;
  cfg.lr_language = 0.0;
  EmbeddingTable table = small_table(9, 7, 71);
  Rng init(9);
  LanguageModel model(table.dim(), table.size(), cfg, init);
  std::vector<Eigen::MatrixXd> before;
  for (Param* p : model.params()) before.push_back(p->value);
  QueryCorpus corpus;
  corpus.padded_len = cfg.max_query_len;
  for (int i = 0; i < 6; ++i) {
    corpus.queries.push_back(
        make_query({i % 9, (i + 3) % 9}, 2, 4, table.pad_id()));
    corpus.queries.back().query_id = "q" + std::to_string(i);
  }
  Rng train_rng(10);
  train_language_model(model, corpus, table, cfg, train_rng);
  auto params = model.params();
  for (size_t i = 0; i < params.size(); ++i) {
    CHECK((params[i]->value - before[i]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("same seed reproduces the training trace exactly") {
  Config cfg = small_cfg();
  cfg.language_epochs = 3;
  cfg.lr_language = 1e-3;
  EmbeddingTable table = small_table(9, 7, 81);
  QueryCorpus corpus;
  corpus.padded_len = cfg.max_query_len;
  for (int i = 0; i < 5; ++i) {
    corpus.queries.push_back(
        make_query({i % 9, (i * 2 + 1) % 9, 3}, 3, 4, table.pad_id()));
    corpus.queries.back().query_id = "q" + std::to_string(i);
  }
  auto run = [&]() {
    Rng init(55);
    LanguageModel model(table.dim(), table.size(), cfg, init);
    Rng rng(56);
    auto trace = train_language_model(model, corpus, table, cfg, rng);
    return std::make_pair(trace, model.encode_query(corpus.queries[0], table));
  };
  auto [t1, e1] = run();
  auto [t2, e2] = run();
  REQUIRE(t1.rows.size() == t2.rows.size());
  for (size_t i = 0; i < t1.rows.size(); ++i) {
    CHECK(t1.rows[i].total == t2.rows[i].total);
    CHECK(t1.rows[i].cel == t2.rows[i].cel);
  }
  CHECK((e1.second - e2.second).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one query and 200 steps drive the token loss under ln(vocab)") {
  Config cfg = small_cfg();
  cfg.language_epochs = 200;
  cfg.lr_language = 5e-3;
  EmbeddingTable table = small_table(9, 7, 91);
  QueryCorpus corpus;
  corpus.padded_len = cfg.max_query_len;
  corpus.queries.push_back(make_query({2, 7, 4}, 3, 4, table.pad_id()));
  Rng init(12);
  LanguageModel model(table.dim(), table.size(), cfg, init);
  Rng rng(13);
  auto trace = train_language_model(model, corpus, table, cfg, rng);
  REQUIRE(!trace.rows.empty());
  CHECK(trace.rows.back().cel < std::log(double(table.size())));
}

TEST_CASE("held-out loss does not rise on a patterned corpus") {
  Config cfg = small_cfg();
  cfg.language_epochs = 40;
  cfg.lr_language = 3e-3;
  EmbeddingTable table = small_table(9, 7, 101);
  QueryCorpus corpus;
  corpus.padded_len = cfg.max_query_len;
  // Three fixed patterns repeated: the held-out tenth shares them.
  std::vector<std::vector<int>> patterns = {{1, 2, 3}, {4, 5, 6}, {7, 8, 0}};
  for (int i = 0; i < 12; ++i) {
    corpus.queries.push_back(
        make_query(patterns[i % 3], 3, 4, table.pad_id()));
    corpus.queries.back().query_id = "q" + std::to_string(i);
  }
  Rng init(14);
  LanguageModel model(table.dim(), table.size(), cfg, init);
  Rng rng(15);
  auto trace = train_language_model(model, corpus, table, cfg, rng);
  CHECK(trace.heldout_count > 0);
  CHECK(trace.heldout_final <= trace.heldout_initial);
}

TEST_CASE("mean corpus loss is invariant to query order") {
  Config cfg = small_cfg();
  EmbeddingTable table = small_table(9, 7, 111);
  Rng init(16);
  LanguageModel model(table.dim(), table.size(), cfg, init);
  std::vector<QueryTokens> qs;
  for (int i = 0; i < 6; ++i) {
    qs.push_back(make_query({i % 9, (i + 4) % 9}, 2, 4, table.pad_id()));
  }
  double fwd = evaluate_language_loss(model, qs, table, cfg);
  std::reverse(qs.begin(), qs.end());
  double rev = evaluate_language_loss(model, qs, table, cfg);
  CHECK(fwd == doctest::Approx(rev).epsilon(1e-12));
}

TEST_CASE("language model save/load round trips exactly") {
  Config cfg = small_cfg();
  EmbeddingTable table = small_table(9, 7, 121);
  Rng init(17);
  LanguageModel model(table.dim(), table.size(), cfg, init);
  fs::path path = fs::temp_directory_path() / "tvg_lang_rt.tvgb";
  save_language_model(model, cfg, path.string());
  LanguageModel back = load_language_model(path.string());
  QueryTokens q = make_query({3, 1, 8}, 3, 4, table.pad_id());
  auto [re1, E1] = model.encode_query(q, table);
  auto [re2, E2] = back.encode_query(q, table);
  CHECK((re1 - re2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((E1 - E2).cwiseAbs().maxCoeff() == 0.0);
  fs::remove(path);
}

TEST_CASE("loading a bank with the wrong model tag fails") {
  fs::path path = fs::temp_directory_path() / "tvg_lang_bad.tvgb";
  Bank bank;
  bank.put_text("meta/format", "tvg-lang-v9");
  bank.save(path.string());
  CHECK_THROWS(load_language_model(path.string()));
  fs::remove(path);
}

}  // TEST_SUITE
