#include "tvg/data_model.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tvg/common.hpp"
#include "tvg/matrix_io.hpp"

namespace fs = std::filesystem;

namespace tvg {

FrameFeatureSequence load_frame_features(const std::string& path) {
  FrameFeatureSequence seq;
  seq.features = load_matrix(path);
  if (seq.features.rows() < 1 || seq.features.cols() < 1) {
    throw std::runtime_error(path + ": feature matrix must be non-empty, got " +
                             std::to_string(seq.features.rows()) + "x" +
                             std::to_string(seq.features.cols()));
  }
  seq.video_id = fs::path(path).stem().string();
  return seq;
}

std::vector<FrameFeatureSequence> load_feature_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("feature directory not found: " + dir);
  }
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tvgm") {
      paths.push_back(entry.path().string());
    }
  }
  if (paths.empty()) {
    throw std::runtime_error("no .tvgm feature files in " + dir);
  }
  std::sort(paths.begin(), paths.end());
  std::vector<FrameFeatureSequence> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(load_frame_features(p));
  std::sort(out.begin(), out.end(),
            [](const FrameFeatureSequence& a, const FrameFeatureSequence& b) {
              return a.video_id < b.video_id;
            });
  long d = out.front().dim();
  for (const auto& s : out) {
    if (s.dim() != d) {
      throw std::runtime_error("feature dim mismatch: " + out.front().video_id +
                               " has " + std::to_string(d) + ", " + s.video_id +
                               " has " + std::to_string(s.dim()));
    }
  }
  return out;
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> vocab,
                               Eigen::MatrixXd vectors)
    : vocab_(std::move(vocab)), vectors_(std::move(vectors)) {
  if (static_cast<long>(vocab_.size()) != vectors_.rows()) {
    throw std::runtime_error(
        "embedding table: vocab has " + std::to_string(vocab_.size()) +
        " tokens but matrix has " + std::to_string(vectors_.rows()) + " rows");
  }
  if (vectors_.cols() < 1) {
    throw std::runtime_error("embedding table: zero-width vectors");
  }
  for (size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i].empty()) {
      throw std::runtime_error("embedding table: empty token at row " +
                               std::to_string(i));
    }
    auto [it, inserted] = index_.emplace(vocab_[i], static_cast<int>(i));
    if (!inserted) {
      throw std::runtime_error("embedding table: duplicate token '" +
                               vocab_[i] + "'");
    }
  }
  // Special tokens get appended with zero rows when the source lacks them.
  for (const char* special : {"<unk>", "<pad>"}) {
    if (!index_.count(special)) {
      int id = static_cast<int>(vocab_.size());
      vocab_.push_back(special);
      index_.emplace(special, id);
      vectors_.conservativeResize(vectors_.rows() + 1, Eigen::NoChange);
      vectors_.row(vectors_.rows() - 1).setZero();
    }
  }
  unk_id_ = index_.at("<unk>");
  pad_id_ = index_.at("<pad>");
}

EmbeddingTable EmbeddingTable::load(const std::string& vocab_path,
                                    const std::string& matrix_path) {
  std::string text = read_text_file(vocab_path);
  std::vector<std::string> vocab;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (!line.empty()) vocab.push_back(line);
  }
  return EmbeddingTable(std::move(vocab), load_matrix(matrix_path));
}

void EmbeddingTable::save(const std::string& vocab_path,
                          const std::string& matrix_path) const {
  std::ostringstream os;
  for (const auto& tok : vocab_) os << tok << "\n";
  write_text_file(vocab_path, os.str());
  save_matrix(matrix_path, vectors_, Dtype::f64);
}

int EmbeddingTable::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_id_ : it->second;
}

bool EmbeddingTable::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

const std::string& EmbeddingTable::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("embedding table: token id " + std::to_string(id) +
                            " out of range [0, " + std::to_string(size()) + ")");
  }
  return vocab_[static_cast<size_t>(id)];
}

Eigen::VectorXd EmbeddingTable::vector_of(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("embedding table: token id " + std::to_string(id) +
                            " out of range [0, " + std::to_string(size()) + ")");
  }
  return vectors_.row(id).transpose();
}

QueryCorpus load_query_corpus(const std::string& path,
                              const EmbeddingTable& table, int max_len) {
  if (max_len < 1) {
    throw std::invalid_argument("query corpus: max_len must be >= 1");
  }
  std::string text = read_text_file(path);
  QueryCorpus corpus;
  corpus.padded_len = max_len;
  std::istringstream is(text);
  std::string line;
  int kept = 0;
  while (std::getline(is, line)) {
    auto tokens = split_ws(line);
    if (tokens.empty()) {
      ++corpus.skipped_blank;
      continue;
    }
    QueryTokens q;
    q.query_id = "q" + std::to_string(kept);
    ++kept;
    if (static_cast<int>(tokens.size()) > max_len) {
      tokens.resize(static_cast<size_t>(max_len));
    }
    q.true_len = static_cast<int>(tokens.size());
    q.ids.reserve(static_cast<size_t>(max_len));
    for (const auto& tok : tokens) q.ids.push_back(table.id_of(tok));
    while (static_cast<int>(q.ids.size()) < max_len)
      q.ids.push_back(table.pad_id());
    corpus.queries.push_back(std::move(q));
  }
  if (corpus.queries.empty()) {
    throw std::runtime_error(path + ": no queries (every line blank or file empty)");
  }
  return corpus;
}

}  // namespace tvg
