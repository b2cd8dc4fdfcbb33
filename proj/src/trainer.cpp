#include "tvg/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace tvg {

namespace {

// Shuffled batches of size Z; a trailing single video folds into the
// previous batch so the contrastive term keeps at least a pair whenever the
// corpus allows one.
std::vector<std::vector<size_t>> make_batches(const std::vector<size_t>& order,
                                              int z) {
  std::vector<std::vector<size_t>> batches;
  for (size_t pos = 0; pos < order.size(); pos += z) {
    size_t end = std::min(pos + static_cast<size_t>(z), order.size());
    batches.emplace_back(order.begin() + pos, order.begin() + end);
  }
  if (batches.size() >= 2 && batches.back().size() < 2) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

}  // namespace

VideoTrainer::VideoTrainer(const std::vector<FrameFeatureSequence>& videos,
                           const ClusterBank& bank, const Config& cfg)
    : videos_(videos),
      bank_(bank),
      cfg_(cfg),
      rng_(cfg.seed),
      model_(videos.empty() ? 1 : static_cast<int>(videos[0].dim()),
             bank.dim, cfg, rng_),
      opt_(model_.params(), cfg.lr_video) {
  if (videos_.empty())
    throw std::invalid_argument("video training needs at least one video");
  if (bank_.n_necks != cfg_.n_necks || bank_.n_clusters != cfg_.n_clusters)
    throw std::invalid_argument(
        "cluster bank shape does not match the config: bank has " +
        std::to_string(bank_.n_necks) + " necks / " +
        std::to_string(bank_.n_clusters) + " clusters, config wants " +
        std::to_string(cfg_.n_necks) + " / " +
        std::to_string(cfg_.n_clusters));
  cfg_.validate();
  init_labels();
}

void VideoTrainer::init_labels() {
  for (const auto& vid : videos_)
    for (int i = 0; i < bank_.n_necks; ++i)
      for (int j = 0; j < bank_.n_clusters; ++j) {
        auto y = init_pseudo_labels(vid.features,
                                    bank_.centers[i].row(j).transpose(),
                                    cfg_.sigma_ncut, &label_stats_);
        labels_.set(vid.video_id, i, j, y);
      }
}

double VideoTrainer::refresh_labels(int neck) {
  Eigen::MatrixXd Chat = model_.project_centers(bank_.centers[neck]);
  long changed = 0, total = 0;
  for (const auto& vid : videos_) {
    Eigen::MatrixXd Fhat = model_.encode_frames(vid.features);
    for (int j = 0; j < bank_.n_clusters; ++j) {
      auto y = update_pseudo_labels(Fhat, Chat.row(j).transpose(),
                                    cfg_.sigma_ncut, &label_stats_);
      const auto& old = labels_.get(vid.video_id, neck, j);
      for (size_t t = 0; t < y.size(); ++t) changed += y[t] != old[t];
      total += static_cast<long>(y.size());
      labels_.set(vid.video_id, neck, j, y);
    }
  }
  return total > 0 ? static_cast<double>(changed) / total : 0.0;
}

Checkpoint VideoTrainer::make_checkpoint(int completed_iterations) {
  Checkpoint ck;
  ck.set_meta(cfg_, completed_iterations, rng_.serialize());
  ck.bank.put_text("meta/frame_dim", std::to_string(videos_[0].dim()));
  ck.bank.put_text("meta/center_dim", std::to_string(bank_.dim));
  save_params(ck.bank, model_.params(), "param");
  opt_.save_state(ck.bank, "adam");
  ck.bank.put_text("labels", labels_.to_bytes());
  return ck;
}

void VideoTrainer::restore(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.config().to_text() != cfg_.to_text())
    throw std::runtime_error("resume rejected: checkpoint config differs from "
                             "the requested config");
  if (std::stoi(ck.bank.text("meta/frame_dim")) != videos_[0].dim() ||
      std::stoi(ck.bank.text("meta/center_dim")) != bank_.dim)
    throw std::runtime_error("resume rejected: checkpoint dimensions do not "
                             "match the provided features or cluster bank");
  load_params(ck.bank, model_.params(), "param");
  opt_.load_state(ck.bank, "adam");
  labels_ = LabelStore::from_bytes(ck.bank.text("labels"));
  rng_.restore(ck.rng_state());
  start_iteration_ = ck.iteration() + 1;
}

TrainResult VideoTrainer::run(const std::string& out_dir,
                              const std::string& resume_from) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  if (!resume_from.empty()) restore(resume_from);

  TrainResult result;
  std::ostringstream metrics_csv;
  metrics_csv << "iteration,neck,mean_cls,mean_sab,mean_trip,label_change_rate\n";
  metrics_csv << std::setprecision(12);

  const int n_c = bank_.n_clusters;
  const int j_sampled = cfg_.sampled_centers;

  for (int l = start_iteration_; l <= cfg_.iterations; ++l) {
    for (int i = 0; i < cfg_.n_necks; ++i) {
      double sum_cls = 0.0, sum_sab = 0.0, sum_trip = 0.0;
      int steps = 0;
      for (int epoch = 0; epoch < cfg_.video_epochs; ++epoch) {
        auto order = rng_.permutation(videos_.size());
        auto batches = make_batches(order, cfg_.videos_per_center);
        for (const auto& batch : batches) {
          auto center_pick =
              rng_.sample_without_replacement(n_c, j_sampled);
          Graph g;
          Var Chat = model_.project(g, bank_.centers[i]);
          Var cls_total = g.scalar(0.0);
          Var trip_total = g.scalar(0.0);
          std::vector<std::vector<Var>> pos(batch.size()), neg(batch.size());
          for (size_t b = 0; b < batch.size(); ++b) {
            const auto& vid = videos_[batch[b]];
            const long T = vid.frames();
            Var Fhat = model_.encode(g, vid.features);
            SpecificAttention at = specific_attention(g, Chat, Fhat);
            VideoModel::Foreground fore = model_.foreground(g, vid.features);
            Eigen::MatrixXd Y(n_c, T);
            for (int j = 0; j < n_c; ++j) {
              const auto& y = labels_.get(vid.video_id, i, j);
              for (long t = 0; t < T; ++t) Y(j, t) = y[t];
            }
            cls_total = g.add(cls_total, loss_cls(g, at.A, fore.attention, Y));
            for (size_t jj : center_pick) {
              int j = static_cast<int>(jj);
              pos[b].push_back(compose_activity(g, at.A, Fhat, j));
              neg[b].push_back(compose_activity(g, at.B, Fhat, j));
              trip_total = g.add(
                  trip_total,
                  loss_trip(g, fore.features, labels_.get(vid.video_id, i, j),
                            cfg_.tau3, &trip_degenerate_));
            }
          }
          Var sab = batch.size() >= 2
                        ? loss_sab(g, pos, neg, cfg_.tau1, cfg_.tau2,
                                   cfg_.theta)
                        : g.scalar(0.0);
          Var total = loss_video(g, cls_total, sab, trip_total, cfg_.alpha_v,
                                 cfg_.beta_v);
          double lv = g.scalar_value(total);
          if (!std::isfinite(lv)) {
            std::ostringstream os;
            os << "non-finite loss at iteration " << l << ", neck " << i
               << ", step " << steps << "; batch:";
            for (size_t idx : batch) os << ' ' << videos_[idx].video_id;
            throw std::runtime_error(os.str());
          }
          sum_cls += g.scalar_value(cls_total);
          sum_sab += g.scalar_value(sab);
          sum_trip += g.scalar_value(trip_total);
          ++steps;
          opt_.zero_grad();
          g.backward(total);
          opt_.step();
          result.loss_history.push_back(lv);
        }
      }
      double rate = refresh_labels(i);
      TrainMetricsRow row{l, i, sum_cls / steps, sum_sab / steps,
                          sum_trip / steps, rate};
      result.metrics.push_back(row);
      metrics_csv << row.iteration << ',' << row.neck << ',' << row.mean_cls
                  << ',' << row.mean_sab << ',' << row.mean_trip << ','
                  << row.label_change_rate << '\n';
    }
    make_checkpoint(l).save(out_dir + "/ckpt_iter" + std::to_string(l) +
                            ".tvgb");
    labels_.save(out_dir + "/labels_iter" + std::to_string(l) + ".tvgl");
  }

  write_text_file(out_dir + "/metrics.csv", metrics_csv.str());
  result.final_checkpoint = out_dir + "/ckpt_final.tvgb";
  make_checkpoint(cfg_.iterations).save(result.final_checkpoint);
  result.label_stats = label_stats_;
  result.trip_degenerate = trip_degenerate_;
  return result;
}

VideoModel video_model_from_checkpoint(const Checkpoint& ck) {
  Config cfg = ck.config();
  int frame_dim = std::stoi(ck.bank.text("meta/frame_dim"));
  int center_dim = std::stoi(ck.bank.text("meta/center_dim"));
  Rng scratch(0);
  VideoModel model(frame_dim, center_dim, cfg, scratch);
  load_params(ck.bank, model.params(), "param");
  return model;
}

LabelStore labels_from_checkpoint(const Checkpoint& ck) {
  return LabelStore::from_bytes(ck.bank.text("labels"));
}

}  // namespace tvg
