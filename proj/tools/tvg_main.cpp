// Umbrella command line: corpus generation, the two training stages,
// clustering, inference, evaluation, reporting, and the selfcheck suite.
#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "tvg/clustering.hpp"
#include "tvg/config.hpp"
#include "tvg/data_model.hpp"
#include "tvg/inference.hpp"
#include "tvg/language_model.hpp"
#include "tvg/matrix_io.hpp"
#include "tvg/selfcheck.hpp"
#include "tvg/synthbench.hpp"
#include "tvg/trainer.hpp"

namespace fs = std::filesystem;
using namespace tvg;

namespace {

void log_run(const std::string& cmd, const std::string& config_text,
             uint64_t seed) {
  std::cout << "[tvg " << cmd << "] config-hash=" << std::hex
            << fnv1a64(config_text) << std::dec << " seed=" << seed << "\n";
}

Config load_config_or_default(const std::string& path) {
  if (path.empty()) return Config{};
  return Config::load(path);
}

int cmd_synth_gen(const std::string& spec_path, const std::string& out_dir,
                  int64_t seed_override, int segments_per_video) {
  SyntheticSpec spec =
      spec_path.empty() ? SyntheticSpec{} : SyntheticSpec::load(spec_path);
  if (seed_override >= 0) spec.seed = static_cast<uint64_t>(seed_override);
  if (segments_per_video > 0) spec.segments_per_video = segments_per_video;
  spec.validate();
  log_run("synth-gen", spec.to_text(), spec.seed);
  SyntheticCorpus corpus = generate_corpus(spec);
  write_corpus(out_dir, corpus);
  spec.save(out_dir + "/spec.txt");
  std::cout << "wrote " << corpus.videos.size() << " videos and "
            << corpus.query_ids.size() << " queries to " << out_dir << "\n";
  return 0;
}

int cmd_train_language(const std::string& corpus_dir,
                       const std::string& config_path,
                       const std::string& out_path,
                       const std::string& necks_out,
                       const std::string& trace_csv) {
  Config cfg = load_config_or_default(config_path);
  log_run("train-language", cfg.to_text(), cfg.seed);
  EmbeddingTable table = EmbeddingTable::load(corpus_dir + "/vocab.txt",
                                              corpus_dir + "/embeddings.tvgm");
  QueryCorpus corpus = load_query_corpus(corpus_dir + "/queries.txt", table,
                                         cfg.max_query_len);
  Rng rng(cfg.seed);
  LanguageModel model(table.dim(), table.size(), cfg, rng);
  LanguageTrace trace = train_language_model(model, corpus, table, cfg, rng,
                                             trace_csv);
  save_language_model(model, cfg, out_path);
  std::cout << "held-out loss " << trace.heldout_initial << " -> "
            << trace.heldout_final << " over " << trace.heldout_count
            << " queries; model saved to " << out_path << "\n";
  if (!necks_out.empty()) {
    Bank necks = export_necks(model, corpus, table);
    necks.save(necks_out);
    std::cout << "neck matrices for " << necks.size() << " queries saved to "
              << necks_out << "\n";
  }
  return 0;
}

int cmd_build_clusters(const std::string& necks_path, int k, int64_t seed,
                       const std::string& mode, int restarts,
                       const std::string& out_path) {
  Bank necks = Bank::load(necks_path);
  if (necks.size() == 0)
    throw std::runtime_error(necks_path + ": no neck records");
  int n_necks = static_cast<int>(necks.matrix(necks.names()[0]).rows());
  std::ostringstream cfgtext;
  cfgtext << "necks=" << necks_path << " k=" << k << " mode=" << mode
          << " restarts=" << restarts << " seed=" << seed;
  log_run("build-clusters", cfgtext.str(), static_cast<uint64_t>(seed));
  ClusterBank bank = build_cluster_bank_from_necks(
      necks, n_necks, k, mode, static_cast<uint64_t>(seed), restarts, 100);
  bank.save(out_path);
  write_text_file(out_path + ".assignments.csv", bank.assignment_table());
  double total_inertia = 0.0;
  for (double in : bank.inertia) total_inertia += in;
  std::cout << "clustered " << necks.size() << " queries x " << n_necks
            << " necks into " << k << " groups (mode " << mode
            << ", total inertia " << total_inertia << "); bank saved to "
            << out_path << "\n";
  return 0;
}

int cmd_train_video(const std::string& config_path,
                    const std::string& features_dir,
                    const std::string& clusters_path,
                    const std::string& out_ckpt, const std::string& out_dir,
                    const std::string& resume) {
  Config cfg = load_config_or_default(config_path);
  log_run("train-video", cfg.to_text(), cfg.seed);
  std::vector<FrameFeatureSequence> videos = load_feature_dir(features_dir);
  ClusterBank bank = ClusterBank::load(clusters_path);
  std::string aux_dir = out_dir.empty()
                            ? fs::path(out_ckpt).parent_path().string()
                            : out_dir;
  if (aux_dir.empty()) aux_dir = ".";
  VideoTrainer trainer(videos, bank, cfg);
  TrainResult result = trainer.run(aux_dir, resume);
  if (fs::path(result.final_checkpoint) != fs::path(out_ckpt))
    fs::copy_file(result.final_checkpoint, out_ckpt,
                  fs::copy_options::overwrite_existing);
  std::cout << "trained " << result.loss_history.size() << " steps over "
            << cfg.iterations << " iterations; final loss "
            << (result.loss_history.empty() ? 0.0
                                            : result.loss_history.back())
            << "; checkpoint " << out_ckpt << "\n";
  return 0;
}

int cmd_infer(const std::string& corpus_dir, const std::string& features_dir,
              const std::string& pairs_path, const std::string& lang_path,
              const std::string& video_ckpt, const std::string& out_path,
              double threshold, int top_n, double fps) {
  Checkpoint ck = Checkpoint::load(video_ckpt);
  Config cfg = ck.config();
  if (threshold > 0.0) cfg.infer_threshold = threshold;
  if (top_n > 0) cfg.top_n = top_n;
  log_run("infer", cfg.to_text(), cfg.seed);
  LanguageModel lang = load_language_model(lang_path);
  VideoModel video = video_model_from_checkpoint(ck);
  EmbeddingTable table = EmbeddingTable::load(corpus_dir + "/vocab.txt",
                                              corpus_dir + "/embeddings.tvgm");
  QueryCorpus queries = load_query_corpus(corpus_dir + "/queries.txt", table,
                                          cfg.max_query_len);
  std::string feat_dir =
      features_dir.empty() ? corpus_dir + "/videos" : features_dir;
  std::vector<FrameFeatureSequence> videos = load_feature_dir(feat_dir);
  std::map<std::string, const FrameFeatureSequence*> by_id;
  for (const auto& v : videos) by_id[v.video_id] = &v;
  std::string pp = pairs_path.empty() ? corpus_dir + "/pairs.csv" : pairs_path;
  auto pairs = load_pairs(pp);

  std::vector<GroundingResult> results;
  for (const auto& q : queries.queries) {
    auto pit = pairs.find(q.query_id);
    if (pit == pairs.end()) continue;  // unpaired queries have no task
    auto vit = by_id.find(pit->second);
    if (vit == by_id.end())
      throw std::runtime_error("no features for video " + pit->second);
    auto [r_e, E] = lang.encode_query(q, table);
    (void)r_e;
    Eigen::VectorXd scores = score_curve(E, vit->second->features, video);
    GroundingResult r{pit->second, q.query_id,
                      top_n_segments(scores, cfg.top_n, cfg.infer_threshold)};
    results.push_back(std::move(r));
  }
  save_results(out_path, results, fps);
  std::cout << "grounded " << results.size() << " queries; results in "
            << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& results_path, const std::string& truth_path,
             const std::string& out_path) {
  auto results = load_results(results_path);
  auto truth = load_ground_truth(truth_path);
  std::ostringstream cfgtext;
  cfgtext << "results=" << results_path << " truth=" << truth_path;
  log_run("eval", cfgtext.str(), 0);
  std::string table = eval_table_csv(results, truth);
  std::cout << table;
  if (!out_path.empty()) write_text_file(out_path, table);
  return 0;
}

int cmd_report(const std::string& corpus_dir, const std::string& features_dir,
               const std::string& pairs_path, const std::string& lang_path,
               const std::string& video_ckpt, const std::string& curves_out,
               const std::string& attention_dir, double fps) {
  Checkpoint ck = Checkpoint::load(video_ckpt);
  Config cfg = ck.config();
  log_run("report", cfg.to_text(), cfg.seed);
  LanguageModel lang = load_language_model(lang_path);
  VideoModel video = video_model_from_checkpoint(ck);
  EmbeddingTable table = EmbeddingTable::load(corpus_dir + "/vocab.txt",
                                              corpus_dir + "/embeddings.tvgm");
  QueryCorpus queries = load_query_corpus(corpus_dir + "/queries.txt", table,
                                          cfg.max_query_len);
  std::string feat_dir =
      features_dir.empty() ? corpus_dir + "/videos" : features_dir;
  std::vector<FrameFeatureSequence> videos = load_feature_dir(feat_dir);
  std::map<std::string, const FrameFeatureSequence*> by_id;
  for (const auto& v : videos) by_id[v.video_id] = &v;
  std::string pp = pairs_path.empty() ? corpus_dir + "/pairs.csv" : pairs_path;
  auto pairs = load_pairs(pp);

  if (!attention_dir.empty()) fs::create_directories(attention_dir);
  std::ostringstream curves;
  curves << std::setprecision(12) << "query_id,video_id,frame";
  if (fps > 0.0) curves << ",seconds";
  curves << ",score\n";
  for (const auto& q : queries.queries) {
    auto pit = pairs.find(q.query_id);
    if (pit == pairs.end()) continue;
    auto vit = by_id.find(pit->second);
    if (vit == by_id.end())
      throw std::runtime_error("no features for video " + pit->second);
    auto [r_e, E] = lang.encode_query(q, table);
    (void)r_e;
    const auto& frames = vit->second->features;
    Eigen::VectorXd scores = score_curve(E, frames, video);
    for (long t = 0; t < scores.size(); ++t) {
      curves << q.query_id << ',' << pit->second << ',' << t;
      if (fps > 0.0) curves << ',' << t / fps;
      curves << ',' << scores(t) << '\n';
    }
    if (!attention_dir.empty()) {
      Eigen::MatrixXd Chat = video.project_centers(E);
      Eigen::MatrixXd Fhat = video.encode_frames(frames);
      auto [A, B] = specific_attention_values(Chat, Fhat);
      (void)B;
      save_matrix(attention_dir + "/" + q.query_id + "_spe.tvgm", A);
      Eigen::VectorXd fore = video.foreground_values(frames).second;
      save_matrix(attention_dir + "/" + pit->second + "_fore.tvgm", fore);
    }
  }
  write_text_file(curves_out, curves.str());
  std::cout << "score curves written to " << curves_out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal grounding pipeline"};
  app.require_subcommand(1);

  // synth-gen
  std::string sg_spec, sg_out;
  int64_t sg_seed = -1;
  int sg_segments = 0;
  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic corpus");
  synth->add_option("--spec", sg_spec, "spec file (key=value)");
  synth->add_option("--out", sg_out, "output directory")->required();
  synth->add_option("--seed", sg_seed, "override the spec seed");
  synth->add_option("--segments-per-video", sg_segments,
                    "plant extra distractor segments");

  // train-language
  std::string tl_corpus, tl_config, tl_out, tl_necks, tl_trace;
  auto* trainlang =
      app.add_subcommand("train-language", "train the query encoder-decoder");
  trainlang->add_option("--corpus", tl_corpus, "corpus directory")->required();
  trainlang->add_option("--config", tl_config, "config file");
  trainlang->add_option("--out", tl_out, "model output path")->required();
  trainlang->add_option("--necks-out", tl_necks,
                        "also export per-query neck matrices");
  trainlang->add_option("--trace", tl_trace, "loss trace CSV");

  // build-clusters
  std::string bc_necks, bc_mode = "center", bc_out;
  int bc_k = 16, bc_restarts = 8;
  int64_t bc_seed = 0;
  auto* clusters =
      app.add_subcommand("build-clusters", "cluster the mined necks");
  clusters->add_option("--necks", bc_necks, "neck bank file")->required();
  clusters->add_option("--k", bc_k, "clusters per neck index");
  clusters->add_option("--seed", bc_seed, "clustering seed");
  clusters->add_option("--mode", bc_mode, "center | sample | random");
  clusters->add_option("--restarts", bc_restarts, "independent starts");
  clusters->add_option("--out", bc_out, "cluster bank output")->required();

  // train-video
  std::string tv_config, tv_features, tv_clusters, tv_out, tv_dir, tv_resume;
  auto* trainvid =
      app.add_subcommand("train-video", "train the two-branch video model");
  trainvid->add_option("--config", tv_config, "config file");
  trainvid->add_option("--features", tv_features, "frame feature directory")
      ->required();
  trainvid->add_option("--clusters", tv_clusters, "cluster bank")->required();
  trainvid->add_option("--out", tv_out, "final checkpoint path")->required();
  trainvid->add_option("--out-dir", tv_dir,
                       "directory for per-iteration checkpoints and metrics");
  trainvid->add_option("--resume", tv_resume, "checkpoint to resume from");

  // infer
  std::string in_corpus, in_features, in_pairs, in_lang, in_video, in_out;
  double in_threshold = 0.0, in_fps = 0.0;
  int in_top = 0;
  auto* infer = app.add_subcommand("infer", "localize segments per query");
  infer->add_option("--corpus", in_corpus, "corpus directory")->required();
  infer->add_option("--features", in_features,
                    "frame feature directory (default <corpus>/videos)");
  infer->add_option("--pairs", in_pairs,
                    "query-video pairs (default <corpus>/pairs.csv)");
  infer->add_option("--language", in_lang, "language model file")->required();
  infer->add_option("--video", in_video, "video checkpoint")->required();
  infer->add_option("--out", in_out, "results CSV")->required();
  infer->add_option("--threshold", in_threshold, "growth ratio threshold");
  infer->add_option("--top-n", in_top, "candidates per query");
  infer->add_option("--fps", in_fps, "append second-based boundaries");

  // eval
  std::string ev_results, ev_truth, ev_out;
  auto* eval = app.add_subcommand("eval", "score results against the truth");
  eval->add_option("--results", ev_results, "results CSV")->required();
  eval->add_option("--truth", ev_truth, "ground truth CSV")->required();
  eval->add_option("--out", ev_out, "also write the table here");

  // report
  std::string rp_corpus, rp_features, rp_pairs, rp_lang, rp_video, rp_out,
      rp_attn;
  double rp_fps = 0.0;
  auto* report = app.add_subcommand("report", "dump score curves per query");
  report->add_option("--corpus", rp_corpus, "corpus directory")->required();
  report->add_option("--features", rp_features, "frame feature directory");
  report->add_option("--pairs", rp_pairs, "query-video pairs");
  report->add_option("--language", rp_lang, "language model file")->required();
  report->add_option("--video", rp_video, "video checkpoint")->required();
  report->add_option("--out", rp_out, "curves CSV")->required();
  report->add_option("--attention-dir", rp_attn,
                     "also dump attention matrices here");
  report->add_option("--fps", rp_fps, "append second-based timestamps");

  auto* selfcheck =
      app.add_subcommand("selfcheck", "run the invariant and gradient suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth_gen(sg_spec, sg_out, sg_seed, sg_segments);
    if (trainlang->parsed())
      return cmd_train_language(tl_corpus, tl_config, tl_out, tl_necks,
                                tl_trace);
    if (clusters->parsed())
      return cmd_build_clusters(bc_necks, bc_k, bc_seed, bc_mode, bc_restarts,
                                bc_out);
    if (trainvid->parsed())
      return cmd_train_video(tv_config, tv_features, tv_clusters, tv_out,
                             tv_dir, tv_resume);
    if (infer->parsed())
      return cmd_infer(in_corpus, in_features, in_pairs, in_lang, in_video,
                       in_out, in_threshold, in_top, in_fps);
    if (eval->parsed()) return cmd_eval(ev_results, ev_truth, ev_out);
    if (report->parsed())
      return cmd_report(rp_corpus, rp_features, rp_pairs, rp_lang, rp_video,
                        rp_out, rp_attn, rp_fps);
    if (selfcheck->parsed()) {
      log_run("selfcheck", "selfcheck", 0);
      return run_selfcheck(std::cout) == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
