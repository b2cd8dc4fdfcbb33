#include "tvg/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "tvg/matrix_io.hpp"

namespace tvg {

namespace {

std::string fmt_id(const char* prefix, int i) {
  std::ostringstream os;
  os << prefix << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("synthetic spec: " + msg); };
  if (atoms < 2) fail("atoms must be at least 2");
  if (vocab_per_atom < 1) fail("vocab_per_atom must be positive");
  if (videos < 1) fail("videos must be positive");
  if (frames < 2) fail("frames must be at least 2");
  if (!(seg_min_frac > 0.0 && seg_min_frac < 1.0))
    fail("seg_min_frac must be in (0,1)");
  if (!(seg_max_frac > 0.0 && seg_max_frac < 1.0))
    fail("seg_max_frac must be in (0,1)");
  if (seg_min_frac > seg_max_frac) fail("seg_min_frac exceeds seg_max_frac");
  if (feature_dim < 1) fail("feature_dim must be positive");
  if (noise_std < 0.0) fail("noise_std must be nonnegative");
  if (prototype_scale <= 0.0) fail("prototype_scale must be positive");
  if (embed_dim < 1) fail("embed_dim must be positive");
  if (embed_jitter < 0.0) fail("embed_jitter must be nonnegative");
  if (query_min_len < 1) fail("query_min_len must be positive");
  if (query_max_len < query_min_len)
    fail("query_max_len below query_min_len");
  if (segments_per_video < 1) fail("segments_per_video must be positive");
}

std::string SyntheticSpec::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "atoms=" << atoms << '\n'
     << "vocab_per_atom=" << vocab_per_atom << '\n'
     << "videos=" << videos << '\n'
     << "frames=" << frames << '\n'
     << "seg_min_frac=" << seg_min_frac << '\n'
     << "seg_max_frac=" << seg_max_frac << '\n'
     << "feature_dim=" << feature_dim << '\n'
     << "noise_std=" << noise_std << '\n'
     << "prototype_scale=" << prototype_scale << '\n'
     << "embed_dim=" << embed_dim << '\n'
     << "embed_jitter=" << embed_jitter << '\n'
     << "query_min_len=" << query_min_len << '\n'
     << "query_max_len=" << query_max_len << '\n'
     << "segments_per_video=" << segments_per_video << '\n'
     << "seed=" << seed << '\n';
  return os.str();
}

SyntheticSpec SyntheticSpec::from_text(const std::string& text) {
  SyntheticSpec spec;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("synthetic spec line " +
                                  std::to_string(lineno) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    try {
      if (key == "atoms") spec.atoms = std::stoi(val);
      else if (key == "vocab_per_atom") spec.vocab_per_atom = std::stoi(val);
      else if (key == "videos") spec.videos = std::stoi(val);
      else if (key == "frames") spec.frames = std::stoi(val);
      else if (key == "seg_min_frac") spec.seg_min_frac = std::stod(val);
      else if (key == "seg_max_frac") spec.seg_max_frac = std::stod(val);
      else if (key == "feature_dim") spec.feature_dim = std::stoi(val);
      else if (key == "noise_std") spec.noise_std = std::stod(val);
      else if (key == "prototype_scale") spec.prototype_scale = std::stod(val);
      else if (key == "embed_dim") spec.embed_dim = std::stoi(val);
      else if (key == "embed_jitter") spec.embed_jitter = std::stod(val);
      else if (key == "query_min_len") spec.query_min_len = std::stoi(val);
      else if (key == "query_max_len") spec.query_max_len = std::stoi(val);
      else if (key == "segments_per_video") spec.segments_per_video = std::stoi(val);
      else if (key == "seed") spec.seed = std::stoull(val);
      else
        throw std::invalid_argument("unknown key");
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("synthetic spec line " +
                                  std::to_string(lineno) + ": bad entry '" +
                                  key + "'");
    }
  }
  return spec;
}

SyntheticSpec SyntheticSpec::load(const std::string& path) {
  SyntheticSpec spec = from_text(read_text_file(path));
  spec.validate();
  return spec;
}

void SyntheticSpec::save(const std::string& path) const {
  write_text_file(path, to_text());
}

std::pair<long, long> segment_length_bounds(const SyntheticSpec& spec,
                                            long T) {
  long lmin = static_cast<long>(std::ceil(spec.seg_min_frac * T));
  long lmax = static_cast<long>(std::floor(spec.seg_max_frac * T));
  if (lmin < 1) lmin = 1;
  if (lmin > lmax)
    throw std::invalid_argument(
        "segment length range infeasible for " + std::to_string(T) +
        " frames: [" + std::to_string(lmin) + ", " + std::to_string(lmax) +
        "]");
  return {lmin, lmax};
}

SyntheticCorpus generate_corpus(const SyntheticSpec& spec) {
  spec.validate();
  auto [lmin, lmax] = segment_length_bounds(spec, spec.frames);
  Rng rng(spec.seed);
  SyntheticCorpus out;

  std::vector<Eigen::RowVectorXd> protos(spec.atoms);
  for (int k = 0; k < spec.atoms; ++k) {
    protos[k].resize(spec.feature_dim);
    for (int d = 0; d < spec.feature_dim; ++d)
      protos[k](d) = rng.normal() * spec.prototype_scale;
  }

  out.embedding_rows.resize(spec.atoms * spec.vocab_per_atom, spec.embed_dim);
  for (int k = 0; k < spec.atoms; ++k) {
    Eigen::RowVectorXd center(spec.embed_dim);
    for (int d = 0; d < spec.embed_dim; ++d) center(d) = rng.normal();
    for (int w = 0; w < spec.vocab_per_atom; ++w) {
      out.vocab.push_back("a" + std::to_string(k) + "w" + std::to_string(w));
      long row = static_cast<long>(k) * spec.vocab_per_atom + w;
      for (int d = 0; d < spec.embed_dim; ++d)
        out.embedding_rows(row, d) = center(d) + rng.normal() * spec.embed_jitter;
    }
  }

  const long T = spec.frames;
  for (int v = 0; v < spec.videos; ++v) {
    std::string vid = fmt_id("v", v);
    std::string qid = "q" + std::to_string(v);
    int atom = static_cast<int>(rng.index(spec.atoms));
    out.video_atom[vid] = atom;

    Eigen::MatrixXd F(T, spec.feature_dim);
    for (long t = 0; t < T; ++t)
      for (int d = 0; d < spec.feature_dim; ++d)
        F(t, d) = rng.normal() * spec.noise_std;

    long len = lmin + static_cast<long>(rng.index(lmax - lmin + 1));
    long start = static_cast<long>(rng.index(T - len + 1));
    for (long t = start; t < start + len; ++t)
      for (int d = 0; d < spec.feature_dim; ++d)
        F(t, d) = protos[atom](d) + rng.normal() * spec.noise_std;
    std::vector<Segment> planted{{start, start + len - 1, 1.0}};

    // Optional distractor segments from other atoms, placed without overlap.
    for (int extra = 1; extra < spec.segments_per_video; ++extra) {
      int other = static_cast<int>(rng.index(spec.atoms - 1));
      if (other >= atom) ++other;
      bool placed = false;
      for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
        long l2 = lmin + static_cast<long>(rng.index(lmax - lmin + 1));
        long s2 = static_cast<long>(rng.index(T - l2 + 1));
        Segment cand{s2, s2 + l2 - 1, 0.0};
        bool clash = false;
        for (const auto& p : planted)
          if (cand.start <= p.end && p.start <= cand.end) {
            clash = true;
            break;
          }
        if (clash) continue;
        for (long t = cand.start; t <= cand.end; ++t)
          for (int d = 0; d < spec.feature_dim; ++d)
            F(t, d) = protos[other](d) + rng.normal() * spec.noise_std;
        planted.push_back(cand);
        placed = true;
      }
    }

    out.videos.push_back({vid, F});
    out.query_ids.push_back(qid);
    int qlen = spec.query_min_len +
               static_cast<int>(rng.index(spec.query_max_len -
                                          spec.query_min_len + 1));
    std::ostringstream qs;
    for (int w = 0; w < qlen; ++w) {
      if (w) qs << ' ';
      qs << "a" << atom << "w" << rng.index(spec.vocab_per_atom);
    }
    out.query_lines.push_back(qs.str());
    out.query_video[qid] = vid;
    out.ground_truth[qid] = planted[0];
  }
  return out;
}

void write_corpus(const std::string& dir, const SyntheticCorpus& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(dir + "/videos");
  for (const auto& v : corpus.videos)
    save_matrix(dir + "/videos/" + v.video_id + ".tvgm", v.features,
                Dtype::f32);

  std::ostringstream queries;
  for (const auto& q : corpus.query_lines) queries << q << '\n';
  write_text_file(dir + "/queries.txt", queries.str());

  std::ostringstream vocab;
  for (const auto& t : corpus.vocab) vocab << t << '\n';
  write_text_file(dir + "/vocab.txt", vocab.str());
  save_matrix(dir + "/embeddings.tvgm", corpus.embedding_rows, Dtype::f64);

  std::ostringstream pairs;
  pairs << "query_id,video_id\n";
  for (const auto& [q, v] : corpus.query_video) pairs << q << ',' << v << '\n';
  write_text_file(dir + "/pairs.csv", pairs.str());

  std::ostringstream gt;
  gt << "query_id,start,end\n";
  for (const auto& [q, s] : corpus.ground_truth)
    gt << q << ',' << s.start << ',' << s.end << '\n';
  write_text_file(dir + "/groundtruth.csv", gt.str());

  std::ostringstream atoms;
  atoms << "video_id,atom\n";
  for (const auto& [v, a] : corpus.video_atom) atoms << v << ',' << a << '\n';
  write_text_file(dir + "/atoms.csv", atoms.str());
}

std::map<std::string, Segment> load_ground_truth(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error(path + ": empty ground truth file");
  std::map<std::string, Segment> out;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string qid, field;
    Segment s;
    try {
      std::getline(ls, qid, ',');
      std::getline(ls, field, ',');
      s.start = std::stol(field);
      std::getline(ls, field, ',');
      s.end = std::stol(field);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": malformed line: " + line);
    }
    out[qid] = s;
  }
  return out;
}

std::map<std::string, std::string> load_pairs(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error(path + ": empty pairs file");
  std::map<std::string, std::string> out;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path + ": malformed line: " + line);
    out[trim(line.substr(0, comma))] = trim(line.substr(comma + 1));
  }
  return out;
}

std::vector<GroundingResult> random_baseline(
    const std::map<std::string, std::string>& query_video,
    const std::map<std::string, long>& video_frames, const SyntheticSpec& spec,
    int top_n, uint64_t seed) {
  Rng rng(seed);
  std::vector<GroundingResult> out;
  for (const auto& [qid, vid] : query_video) {
    auto it = video_frames.find(vid);
    if (it == video_frames.end())
      throw std::runtime_error("random_baseline: unknown video " + vid);
    const long T = it->second;
    auto [lmin, lmax] = segment_length_bounds(spec, T);
    GroundingResult r{vid, qid, {}};
    for (int k = 0; k < top_n; ++k) {
      long len = lmin + static_cast<long>(rng.index(lmax - lmin + 1));
      long start = static_cast<long>(rng.index(T - len + 1));
      r.segments.push_back(
          {start, start + len - 1,
           static_cast<double>(top_n - k) / top_n});
    }
    out.push_back(std::move(r));
  }
  return out;
}

double mc_random_recall(const SyntheticSpec& spec, double theta, int draws,
                        uint64_t seed) {
  Rng rng(seed);
  auto [lmin, lmax] = segment_length_bounds(spec, spec.frames);
  const long T = spec.frames;
  int hits = 0;
  for (int i = 0; i < draws; ++i) {
    long gl = lmin + static_cast<long>(rng.index(lmax - lmin + 1));
    long gs = static_cast<long>(rng.index(T - gl + 1));
    long pl = lmin + static_cast<long>(rng.index(lmax - lmin + 1));
    long ps = static_cast<long>(rng.index(T - pl + 1));
    Segment gt{gs, gs + gl - 1, 0.0};
    Segment pr{ps, ps + pl - 1, 0.0};
    if (temporal_iou(pr, gt) > theta) ++hits;
  }
  return 100.0 * hits / draws;
}

}  // namespace tvg
