#include "tvg/selfcheck.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "tvg/clustering.hpp"
#include "tvg/config.hpp"
#include "tvg/gradcheck.hpp"
#include "tvg/inference.hpp"
#include "tvg/language_model.hpp"
#include "tvg/matrix_io.hpp"
#include "tvg/pseudo_labels.hpp"
#include "tvg/video_model.hpp"

namespace tvg {

namespace {

struct Harness {
  std::ostream& out;
  int failures = 0;

  void check(const std::string& name, const std::function<bool()>& fn) {
    bool ok = false;
    std::string note;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      note = e.what();
    }
    if (ok) {
      out << "[ok]   " << name << "\n";
    } else {
      ++failures;
      out << "[FAIL] " << name;
      if (!note.empty()) out << " (" << note << ")";
      out << "\n";
    }
  }
};

Config small_language_config() {
  Config cfg;
  cfg.n_necks = 2;
  cfg.sentence_dim = 8;
  cfg.neck_dim = 4;
  cfg.max_query_len = 4;
  return cfg;
}

Config small_video_config() {
  Config cfg;
  cfg.joint_dim = 8;
  cfg.attention_heads = 4;
  cfg.n_clusters = 3;
  cfg.sampled_centers = 2;
  return cfg;
}

Eigen::MatrixXd randn(long r, long c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

int run_selfcheck(std::ostream& out) {
  Harness h{out};

  h.check("matrix container round trip", [] {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "tvg_selfcheck";
    fs::create_directories(dir);
    Rng rng(3);
    Eigen::MatrixXd m = randn(5, 7, rng);
    std::string p = (dir / "m.tvgm").string();
    save_matrix(p, m, Dtype::f64);
    bool ok = (load_matrix(p) - m).cwiseAbs().maxCoeff() == 0.0;
    fs::remove_all(dir);
    return ok;
  });

  h.check("language loss gradients (2 seeds)", [] {
    Config cfg = small_language_config();
    for (uint64_t seed : {11u, 12u}) {
      Rng rng(seed);
      const int vocab_real = 9, d_w = 5;
      Eigen::MatrixXd emb = randn(vocab_real + 2, d_w, rng);
      std::vector<std::string> words;
      for (int i = 0; i < vocab_real; ++i) words.push_back("w" + std::to_string(i));
      words.push_back("<unk>");
      words.push_back("<pad>");
      EmbeddingTable table(words, emb);
      LanguageModel model(d_w, table.size(), cfg, rng);
      QueryTokens q{"q0", {1, 3, 2, 0}, 3};
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
      if (!rep.ok(1e-4)) throw std::runtime_error(rep.describe());
    }
    return true;
  });

  h.check("video loss gradients (2 seeds)", [] {
    Config cfg = small_video_config();
    for (uint64_t seed : {21u, 22u}) {
      Rng rng(seed);
      VideoModel model(6, 4, cfg, rng);
      Eigen::MatrixXd f1 = randn(4, 6, rng), f2 = randn(4, 6, rng);
      Eigen::MatrixXd centers = randn(3, 4, rng);
      Eigen::MatrixXd Y = (randn(3, 4, rng).array() > 0.0).cast<double>();
      std::vector<uint8_t> y1{1, 1, 0, 0}, y2{0, 1, 1, 0};
      int degenerate = 0;
      auto build = [&](Graph& g) {
        Var Chat = model.project(g, centers);
        Var F1 = model.encode(g, f1), F2 = model.encode(g, f2);
        auto a1 = specific_attention(g, Chat, F1);
        auto a2 = specific_attention(g, Chat, F2);
        auto fg1 = model.foreground(g, f1);
        auto fg2 = model.foreground(g, f2);
        Var cls = g.add(loss_cls(g, a1.A, fg1.attention, Y),
                        loss_cls(g, a2.A, fg2.attention, Y));
        std::vector<std::vector<Var>> pos(2), neg(2);
        for (int j = 0; j < 2; ++j) {
          pos[0].push_back(compose_activity(g, a1.A, F1, j));
          neg[0].push_back(compose_activity(g, a1.B, F1, j));
          pos[1].push_back(compose_activity(g, a2.A, F2, j));
          neg[1].push_back(compose_activity(g, a2.B, F2, j));
        }
        Var sab = loss_sab(g, pos, neg, 1e-4, 1e-4, 1.0);
        Var trip = g.add(loss_trip(g, fg1.features, y1, 0.5, &degenerate),
                         loss_trip(g, fg2.features, y2, 0.5, &degenerate));
        return loss_video(g, cls, sab, trip, 0.5, 0.5);
      };
      GradCheckOptions opt;
      opt.max_coords_per_param = 5;
      opt.sample_seed = seed;
      auto rep = check_gradients(model.params(), build, opt);
      if (!rep.ok(1e-4)) throw std::runtime_error(rep.describe());
    }
    return true;
  });

  h.check("attention row invariants (100 shapes)", [] {
    Rng rng(7);
    for (int c = 0; c < 100; ++c) {
      long n = 1 + rng.index(6), t = 1 + rng.index(9), d = 1 + rng.index(8);
      auto [A, B] = specific_attention_values(randn(n, d, rng), randn(t, d, rng));
      for (long r = 0; r < n; ++r) {
        if (std::abs(A.row(r).sum() - 1.0) > 1e-6) return false;
        if (std::abs(B.row(r).sum() - double(t - 1) / t) > 1e-6) return false;
        if ((A.row(r).array() <= 0.0).any()) return false;
      }
    }
    return true;
  });

  h.check("k-means recovers two blobs", [] {
    Rng rng(5);
    Eigen::MatrixXd pts(20, 2);
    for (int i = 0; i < 10; ++i)
      pts.row(i) << rng.normal() * 0.1, rng.normal() * 0.1;
    for (int i = 10; i < 20; ++i)
      pts.row(i) << 10 + rng.normal() * 0.1, 10 + rng.normal() * 0.1;
    auto res = kmeans(pts, 2, 1);
    for (int i = 1; i < 10; ++i)
      if (res.assignments[i] != res.assignments[0]) return false;
    for (int i = 11; i < 20; ++i)
      if (res.assignments[i] != res.assignments[10]) return false;
    return res.assignments[0] != res.assignments[10];
  });

  h.check("normalized cut separates two cliques", [] {
    Eigen::MatrixXd W = Eigen::MatrixXd::Constant(6, 6, 1e-6);
    for (int s = 0; s < 3; ++s)
      for (int t = 0; t < 3; ++t) {
        W(s, t) = 1.0;
        W(s + 3, t + 3) = 1.0;
      }
    auto res = ncut_bipartition(W);
    for (int i = 0; i < 3; ++i)
      if (res.labels[i] != 0) return false;
    for (int i = 3; i < 6; ++i)
      if (res.labels[i] != 1) return false;
    return res.residual <= 1e-8;
  });

  h.check("closed-form loss values", [] {
    // Uniform logits: summed token cross-entropy = L * ln(vocab).
    {
      Graph g;
      Var logits = g.constant(Eigen::MatrixXd::Zero(5, 100));
      QueryTokens q{"q", {3, 1, 4, 1, 5}, 5};
      double v = g.scalar_value(loss_cel(g, logits, q));
      if (std::abs(v - 5.0 * std::log(100.0)) > 1e-9) return false;
    }
    // Zero neck matrix: ||0 - lambda I||_F = lambda * sqrt(d).
    {
      Graph g;
      double v = g.scalar_value(loss_dqa(g, g.constant(Eigen::MatrixXd::Zero(3, 4)), 0.5));
      if (std::abs(v - 0.5 * 2.0) > 1e-9) return false;
    }
    // Two-video contrastive batch with d(p,p')=0.3 and d(p,n)=0.9.
    {
      Graph g;
      Eigen::MatrixXd p1(1, 2), p2(1, 2), n1(1, 2), n2(1, 2);
      double th = std::acos(0.7);  // cosine distance 0.3 apart
      p1 << 1, 0;
      p2 << std::cos(th), std::sin(th);
      double tn = std::acos(0.1);  // cosine distance 0.9 from each p
      n1 << std::cos(tn), std::sin(tn);
      n2 << std::cos(th - tn), std::sin(th - tn);
      std::vector<std::vector<Var>> pos{{g.constant(p1)}, {g.constant(p2)}};
      std::vector<std::vector<Var>> neg{{g.constant(n1)}, {g.constant(n2)}};
      double v = g.scalar_value(loss_sab(g, pos, neg, 1e-4, 1e-4, 1.0));
      if (std::abs(v - 0.5998) > 1e-6) return false;
    }
    return true;
  });

  h.check("segment utilities", [] {
    Eigen::VectorXd s(5);
    s << 0.1, 0.5, 1.0, 0.55, 0.1;
    Segment seg = grow_segment(s, 2, 0.9);
    if (seg.start != 2 || seg.end != 2) return false;
    if (std::abs(temporal_iou({10, 20, 0}, {15, 25, 0}) - 6.0 / 16.0) > 1e-12)
      return false;
    Eigen::VectorXd flat = Eigen::VectorXd::Constant(7, 0.3);
    Segment whole = grow_segment(flat, 0, 1.0);
    return whole.start == 0 && whole.end == 6;
  });

  out << (h.failures == 0 ? "selfcheck passed\n" : "selfcheck FAILED\n");
  return h.failures;
}

}  // namespace tvg
