#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "tvg/common.hpp"
#include "tvg/gradcheck.hpp"
#include "tvg/language_model.hpp"
#include "tvg/pseudo_labels.hpp"
#include "tvg/trainer.hpp"

using namespace tvg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("tvg_trainer_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string sub(const std::string& name) const {
    return (path / name).string();
  }
};

Config trainer_cfg() {
  Config cfg;
  cfg.n_necks = 2;
  cfg.n_clusters = 3;
  cfg.joint_dim = 8;
  cfg.attention_heads = 4;
  cfg.sampled_centers = 2;
  cfg.videos_per_center = 3;
  cfg.video_epochs = 1;
  cfg.iterations = 2;
  cfg.lr_video = 1e-3;
  cfg.seed = 7;
  return cfg;
}

// Six short videos with a planted two-regime structure so the initial
// bipartitions are meaningful rather than noise-driven.
std::vector<FrameFeatureSequence> toy_videos(int count = 6, int frames = 10,
                                             int dim = 5, uint64_t seed = 3) {
  Rng rng(seed);
  std::vector<FrameFeatureSequence> videos;
  for (int v = 0; v < count; ++v) {
    FrameFeatureSequence seq;
    seq.video_id = "v" + std::to_string(v);
    seq.features.resize(frames, dim);
    int split = frames / 2;
    for (int t = 0; t < frames; ++t) {
      double base = t < split ? 2.0 : -2.0;
      for (int c = 0; c < dim; ++c)
        seq.features(t, c) = base + rng.normal(0.0, 0.4);
    }
    videos.push_back(std::move(seq));
  }
  return videos;
}

ClusterBank toy_bank(const Config& cfg, int dim = 4, uint64_t seed = 11) {
  Rng rng(seed);
  ClusterBank bank;
  bank.n_necks = cfg.n_necks;
  bank.n_clusters = cfg.n_clusters;
  bank.dim = dim;
  bank.mode = "center";
  for (int i = 0; i < cfg.n_necks; ++i) {
    Eigen::MatrixXd centers(cfg.n_clusters, dim);
    for (int j = 0; j < cfg.n_clusters; ++j)
      for (int c = 0; c < dim; ++c) centers(j, c) = rng.normal(0.0, 1.0);
    bank.centers.push_back(centers);
    bank.assignments.emplace_back();
    bank.inertia.push_back(0.0);
  }
  return bank;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("construction rejects empty input and mismatched bank shapes") {
  Config cfg = trainer_cfg();
  auto videos = toy_videos();
  auto bank = toy_bank(cfg);
  std::vector<FrameFeatureSequence> empty;
  CHECK_THROWS(VideoTrainer(empty, bank, cfg));
  Config wrong = cfg;
  wrong.n_clusters = 5;
  CHECK_THROWS_WITH_AS(VideoTrainer(videos, bank, wrong),
                       doctest::Contains("cluster bank"), std::invalid_argument);
}

TEST_CASE("initial labels cover every (video, neck, cluster) triple") {
  Config cfg = trainer_cfg();
  auto videos = toy_videos();
  auto bank = toy_bank(cfg);
  VideoTrainer trainer(videos, bank, cfg);
  CHECK(trainer.labels().entry_count() ==
        videos.size() * size_t(cfg.n_necks) * size_t(cfg.n_clusters));
  for (const auto& vid : videos)
    for (int i = 0; i < cfg.n_necks; ++i)
      for (int j = 0; j < cfg.n_clusters; ++j) {
        REQUIRE(trainer.labels().has(vid.video_id, i, j));
        CHECK(trainer.labels().get(vid.video_id, i, j).size() ==
              size_t(vid.frames()));
      }
}

TEST_CASE("initial labels equal the direct rule on raw frames and raw centers") {
  Config cfg = trainer_cfg();
  auto videos = toy_videos();
  auto bank = toy_bank(cfg);
  VideoTrainer trainer(videos, bank, cfg);
  for (const auto& vid : videos)
    for (int i = 0; i < cfg.n_necks; ++i)
      for (int j = 0; j < cfg.n_clusters; ++j) {
        auto expect = init_pseudo_labels(
            vid.features, bank.centers[i].row(j).transpose(), cfg.sigma_ncut);
        CHECK(trainer.labels().get(vid.video_id, i, j) == expect);
      }
}

TEST_CASE("zero learning rate: refreshed labels equal a recomputation from the frozen model") {
  Config cfg = trainer_cfg();
  cfg.lr_video = 0.0;
  cfg.iterations = 1;
  auto videos = toy_videos();
  auto bank = toy_bank(cfg);
  TempDir dir("zerolr");
  VideoTrainer trainer(videos, bank, cfg);
  trainer.run(dir.sub("out"));

  // A second trainer with the same seed carries an identical (frozen) model.
  VideoTrainer frozen(videos, bank, cfg);
  for (int i = 0; i < cfg.n_necks; ++i) {
    Eigen::MatrixXd Chat = frozen.model().project_centers(bank.centers[i]);
    for (const auto& vid : videos) {
      Eigen::MatrixXd Fhat = frozen.model().encode_frames(vid.features);
      for (int j = 0; j < cfg.n_clusters; ++j) {
        auto expect = update_pseudo_labels(Fhat, Chat.row(j).transpose(),
                                           cfg.sigma_ncut);
        CHECK(trainer.labels().get(vid.video_id, i, j) == expect);
      }
    }
  }
}

TEST_CASE("loss history length is iterations x necks x epochs x batches") {
  Config cfg = trainer_cfg();
  cfg.video_epochs = 2;
  auto videos = toy_videos(7);  // 7 videos, Z=3 -> 3+3+1 folds into 3+4
  auto bank = toy_bank(cfg);
  TempDir dir("len");
  VideoTrainer trainer(videos, bank, cfg);
  auto result = trainer.run(dir.sub("out"));
  const size_t batches = 2;  // after folding
  CHECK(result.loss_history.size() ==
        size_t(cfg.iterations) * cfg.n_necks * cfg.video_epochs * batches);
  CHECK(result.metrics.size() == size_t(cfg.iterations) * cfg.n_necks);
  for (double v : result.loss_history) CHECK(std::isfinite(v));
  // Metrics rows walk (iteration, neck) in order.
  CHECK(result.metrics[0].iteration == 1);
  CHECK(result.metrics[0].neck == 0);
  CHECK(result.metrics[1].neck == 1);
  CHECK(result.metrics.back().iteration == cfg.iterations);
}

TEST_CASE("identical seeds and configs reproduce the loss history exactly") {
  Config cfg = trainer_cfg();
  auto videos = toy_videos();
  auto bank = toy_bank(cfg);
  TempDir dir("det");
  VideoTrainer a(videos, bank, cfg);
  auto ra = a.run(dir.sub("a"));
  VideoTrainer b(videos, bank, cfg);
  auto rb = b.run(dir.sub("b"));
  REQUIRE(ra.loss_history.size() == rb.loss_history.size());
  for (size_t i = 0; i < ra.loss_history.size(); ++i)
    CHECK(ra.loss_history[i] == rb.loss_history[i]);
  for (size_t i = 0; i < ra.metrics.size(); ++i) {
    CHECK(ra.metrics[i].mean_cls == rb.metrics[i].mean_cls);
    CHECK(ra.metrics[i].label_change_rate == rb.metrics[i].label_change_rate);
  }
  CHECK(!ra.loss_history.empty());
}

TEST_CASE("training writes per-iteration checkpoints, labels and metrics") {
  Config cfg = trainer_cfg();
  auto videos = toy_videos();
  auto bank = toy_bank(cfg);
  TempDir dir("files");
  VideoTrainer trainer(videos, bank, cfg);
  auto result = trainer.run(dir.sub("out"));
  for (int l = 1; l <= cfg.iterations; ++l) {
    CHECK(fs::exists(dir.sub("out/ckpt_iter" + std::to_string(l) + ".tvgb")));
    CHECK(fs::exists(dir.sub("out/labels_iter" + std::to_string(l) + ".tvgl")));
  }
  CHECK(fs::exists(result.final_checkpoint));
  std::ifstream csv(dir.sub("out/metrics.csv"));
  REQUIRE(csv.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header == "iteration,neck,mean_cls,mean_sab,mean_trip,label_change_rate");
  int rows = 0;
  std::string line;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == cfg.iterations * cfg.n_necks);
}

TEST_CASE("resume replays the remaining iterations bit-for-bit") {
  Config cfg = trainer_cfg();
  cfg.iterations = 3;
  auto videos = toy_videos();
  auto bank = toy_bank(cfg);
  TempDir dir("resume");

  VideoTrainer full(videos, bank, cfg);
  auto rfull = full.run(dir.sub("full"));

  VideoTrainer half(videos, bank, cfg);
  auto rhalf = half.run(dir.sub("half"),
                        dir.sub("full") + "/ckpt_iter1.tvgb");
  // The resumed history must be exactly the tail of the full history.
  REQUIRE(rhalf.loss_history.size() < rfull.loss_history.size());
  size_t tail = rhalf.loss_history.size();
  size_t offset = rfull.loss_history.size() - tail;
  for (size_t i = 0; i < tail; ++i)
    CHECK(rhalf.loss_history[i] == rfull.loss_history[offset + i]);

  // Final checkpoints agree byte for byte.
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(dir.sub("full") + "/ckpt_final.tvgb") ==
        slurp(dir.sub("half") + "/ckpt_final.tvgb"));

  // And the stored labels match.
  LabelStore la = labels_from_checkpoint(
      Checkpoint::load(dir.sub("full") + "/ckpt_final.tvgb"));
  LabelStore lb = labels_from_checkpoint(
      Checkpoint::load(dir.sub("half") + "/ckpt_final.tvgb"));
  CHECK(la.diff_fraction(lb) == 0.0);
  CHECK(la.entry_count() == lb.entry_count());
}

TEST_CASE("resume rejects a config that differs from the checkpoint") {
  Config cfg = trainer_cfg();
  cfg.iterations = 1;
  auto videos = toy_videos();
  auto bank = toy_bank(cfg);
  TempDir dir("badresume");
  VideoTrainer first(videos, bank, cfg);
  first.run(dir.sub("out"));
  Config other = cfg;
  other.lr_video = 5e-4;
  VideoTrainer second(videos, bank, other);
  CHECK_THROWS_WITH_AS(second.run(dir.sub("out2"),
                                  dir.sub("out") + "/ckpt_iter1.tvgb"),
                       doctest::Contains("resume rejected"),
                       std::runtime_error);
}

TEST_CASE("a checkpointed model reloads into an identical scorer") {
  Config cfg = trainer_cfg();
  cfg.iterations = 1;
  auto videos = toy_videos();
  auto bank = toy_bank(cfg);
  TempDir dir("reload");
  VideoTrainer trainer(videos, bank, cfg);
  auto result = trainer.run(dir.sub("out"));
  Checkpoint ck = Checkpoint::load(result.final_checkpoint);
  VideoModel model = video_model_from_checkpoint(ck);
  Eigen::MatrixXd direct = trainer.model().encode_frames(videos[0].features);
  Eigen::MatrixXd loaded = model.encode_frames(videos[0].features);
  CHECK((direct - loaded).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-finite features abort training naming the step") {
  Config cfg = trainer_cfg();
  cfg.iterations = 1;
  auto videos = toy_videos();
  auto bank = toy_bank(cfg);
  TempDir dir("nan");
  VideoTrainer trainer(videos, bank, cfg);
  // The trainer reads the caller's feature storage; poisoning it after
  // construction leaves the initial labels intact but breaks the first
  // training step that touches this video.
  videos[2].features(3, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    trainer.run(dir.sub("out"));
    FAIL("expected a non-finite abort");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("non-finite loss") != std::string::npos);
    CHECK(msg.find("iteration 1") != std::string::npos);
    CHECK(msg.find("v2") != std::string::npos);
  }
}

TEST_CASE("gradient checker is tight on a smooth quadratic") {
  Param w("w", Eigen::MatrixXd::Constant(2, 3, 0.7));
  Eigen::MatrixXd target = Eigen::MatrixXd::Constant(2, 3, -0.2);
  auto build = [&](Graph& g) {
    return g.sum(g.square(g.sub(g.leaf(w), g.constant(target))));
  };
  auto rep = check_gradients({&w}, build);
  CHECK(rep.max_rel_err < 1e-9);
  CHECK(rep.kinks_skipped == 0);
}

TEST_CASE("neck separation gradient passes at the training tolerance") {
  Param E("E", Eigen::MatrixXd::Random(3, 5));
  auto build = [&](Graph& g) { return loss_dqa(g, g.leaf(E), 0.5); };
  auto rep = check_gradients({&E}, build);
  INFO(rep.describe());
  CHECK(rep.max_rel_err <= 1e-4);
}

}  // TEST_SUITE
