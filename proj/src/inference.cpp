#include "tvg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "tvg/common.hpp"

namespace tvg {

Eigen::VectorXd score_curve(const Eigen::MatrixXd& necks,
                            const Eigen::MatrixXd& frames, VideoModel& model) {
  if (necks.rows() < 1)
    throw std::invalid_argument("score_curve: need at least one neck");
  Eigen::MatrixXd Chat = model.project_centers(necks);
  Eigen::MatrixXd Fhat = model.encode_frames(frames);
  auto [A, B] = specific_attention_values(Chat, Fhat);
  (void)B;
  Eigen::VectorXd fore = model.foreground_values(frames).second;
  const long T = frames.rows();
  Eigen::VectorXd out = Eigen::VectorXd::Ones(T);
  for (long i = 0; i < A.rows(); ++i) {
    Eigen::VectorXd m = A.row(i).transpose().cwiseProduct(fore);
    // Stable softmax over time.
    Eigen::VectorXd e = (m.array() - m.maxCoeff()).exp();
    out = out.cwiseProduct(Eigen::VectorXd(e / e.sum()));
  }
  return out;
}

Segment grow_segment(const Eigen::VectorXd& scores, long seed,
                     double threshold) {
  const long T = scores.size();
  if (seed < 0 || seed >= T)
    throw std::out_of_range("grow_segment: seed " + std::to_string(seed) +
                            " outside [0, " + std::to_string(T) + ")");
  if (threshold <= 0.0 || threshold > 1.0)
    throw std::invalid_argument("grow_segment: threshold must be in (0, 1]");
  Segment seg{seed, seed, scores(seed)};
  while (seg.start > 0 &&
         scores(seg.start - 1) >= threshold * scores(seg.start))
    --seg.start;
  while (seg.end + 1 < T &&
         scores(seg.end + 1) >= threshold * scores(seg.end))
    ++seg.end;
  return seg;
}

namespace {

// Leftmost indices of plateau local maxima: maximal equal-value runs strictly
// above both flanks (array ends count as open flanks).
std::vector<long> plateau_maxima(const Eigen::VectorXd& s) {
  std::vector<long> peaks;
  const long T = s.size();
  long t = 0;
  while (t < T) {
    long end = t;
    while (end + 1 < T && s(end + 1) == s(t)) ++end;
    bool left_ok = t == 0 || s(t - 1) < s(t);
    bool right_ok = end == T - 1 || s(end + 1) < s(t);
    if (left_ok && right_ok) peaks.push_back(t);
    t = end + 1;
  }
  return peaks;
}

bool overlaps(const Segment& a, const Segment& b) {
  return a.start <= b.end && b.start <= a.end;
}

}  // namespace

std::vector<Segment> top_n_segments(const Eigen::VectorXd& scores, int n,
                                    double threshold) {
  if (n < 1) throw std::invalid_argument("top_n_segments: n must be >= 1");
  std::vector<long> peaks = plateau_maxima(scores);
  std::sort(peaks.begin(), peaks.end(), [&](long a, long b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  if (static_cast<int>(peaks.size()) > n) peaks.resize(n);
  std::vector<Segment> kept;
  for (long p : peaks) {
    Segment seg = grow_segment(scores, p, threshold);
    bool clash = false;
    // Peaks arrive in descending score order, so on overlap the kept
    // segment is the higher-scored one.
    for (const auto& k : kept)
      if (overlaps(k, seg)) {
        clash = true;
        break;
      }
    if (!clash) kept.push_back(seg);
  }
  std::sort(kept.begin(), kept.end(), [](const Segment& a, const Segment& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.start < b.start;
  });
  return kept;
}

double temporal_iou(const Segment& a, const Segment& b) {
  long inter = std::min(a.end, b.end) - std::max(a.start, b.start) + 1;
  if (inter <= 0) return 0.0;
  long len_a = a.end - a.start + 1;
  long len_b = b.end - b.start + 1;
  return static_cast<double>(inter) / static_cast<double>(len_a + len_b - inter);
}

double recall_at_n(const std::vector<GroundingResult>& results,
                   const std::map<std::string, Segment>& ground_truth, int n,
                   double theta) {
  if (results.empty())
    throw std::invalid_argument("recall_at_n: no results to score");
  std::vector<std::string> missing;
  for (const auto& r : results)
    if (!ground_truth.count(r.query_id)) missing.push_back(r.query_id);
  if (!missing.empty()) {
    std::ostringstream os;
    os << "recall_at_n: missing ground truth for:";
    for (const auto& q : missing) os << ' ' << q;
    throw std::runtime_error(os.str());
  }
  int hits = 0;
  for (const auto& r : results) {
    const Segment& gt = ground_truth.at(r.query_id);
    int considered = std::min<int>(n, static_cast<int>(r.segments.size()));
    for (int k = 0; k < considered; ++k)
      if (temporal_iou(r.segments[k], gt) > theta) {
        ++hits;
        break;
      }
  }
  return 100.0 * hits / results.size();
}

void save_results(const std::string& path,
                  const std::vector<GroundingResult>& results, double fps) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "video_id,query_id,rank,start,end,score";
  if (fps > 0.0) os << ",start_seconds,end_seconds";
  os << '\n';
  for (const auto& r : results) {
    int rank = 1;
    for (const auto& s : r.segments) {
      os << r.video_id << ',' << r.query_id << ',' << rank << ',' << s.start
         << ',' << s.end << ',' << s.score;
      if (fps > 0.0)
        os << ',' << s.start / fps << ',' << (s.end + 1) / fps;
      os << '\n';
      ++rank;
    }
  }
  write_text_file(path, os.str());
}

std::vector<GroundingResult> load_results(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error(path + ": empty results file");
  std::vector<GroundingResult> out;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string vid, qid, field;
    if (!std::getline(ls, vid, ',') || !std::getline(ls, qid, ','))
      throw std::runtime_error(path + ": malformed line: " + line);
    Segment s;
    int rank = 0;
    try {
      std::getline(ls, field, ',');
      rank = std::stoi(field);
      std::getline(ls, field, ',');
      s.start = std::stol(field);
      std::getline(ls, field, ',');
      s.end = std::stol(field);
      std::getline(ls, field, ',');
      s.score = std::stod(field);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": malformed line: " + line);
    }
    if (out.empty() || out.back().query_id != qid ||
        out.back().video_id != vid) {
      out.push_back({vid, qid, {}});
    }
    if (rank != static_cast<int>(out.back().segments.size()) + 1)
      throw std::runtime_error(path + ": ranks out of order at: " + line);
    out.back().segments.push_back(s);
  }
  return out;
}

std::string eval_table_csv(const std::vector<GroundingResult>& results,
                           const std::map<std::string, Segment>& ground_truth) {
  const double thetas[] = {0.3, 0.5, 0.7};
  std::ostringstream os;
  os << std::setprecision(6);
  os << "metric,iou_0.3,iou_0.5,iou_0.7\n";
  for (int n : {1, 5}) {
    os << "R@" << n;
    for (double th : thetas) os << ',' << recall_at_n(results, ground_truth, n, th);
    os << '\n';
  }
  return os.str();
}

}  // namespace tvg
