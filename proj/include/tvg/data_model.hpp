#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <vector>

namespace tvg {

// One untrimmed video: T rows of d_v-dimensional frame features.
struct FrameFeatureSequence {
  std::string video_id;       // filename stem of the source container
  Eigen::MatrixXd features;   // T x d_v
  long frames() const { return features.rows(); }
  long dim() const { return features.cols(); }
};

// Loads a single sequence; video_id is the basename without extension.
FrameFeatureSequence load_frame_features(const std::string& path);

// Loads every *.tvgm under dir (non-recursive), sorted by video_id.
// Throws if the directory holds none or if feature dims disagree.
std::vector<FrameFeatureSequence> load_feature_dir(const std::string& dir);

// Token vocabulary plus embedding rows. "<unk>" and "<pad>" are always
// present: if the stored vocabulary lacks them they are appended with a
// zero embedding row. Lookups of unknown words resolve to "<unk>".
class EmbeddingTable {
 public:
  EmbeddingTable(std::vector<std::string> vocab, Eigen::MatrixXd vectors);

  static EmbeddingTable load(const std::string& vocab_path,
                             const std::string& matrix_path);
  void save(const std::string& vocab_path, const std::string& matrix_path) const;

  int id_of(const std::string& token) const;  // OOV maps to unk_id()
  bool contains(const std::string& token) const;
  const std::string& token_of(int id) const;
  Eigen::VectorXd vector_of(int id) const;

  int unk_id() const { return unk_id_; }
  int pad_id() const { return pad_id_; }
  int size() const { return static_cast<int>(vocab_.size()); }
  int dim() const { return static_cast<int>(vectors_.cols()); }
  const Eigen::MatrixXd& vectors() const { return vectors_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

 private:
  std::vector<std::string> vocab_;
  Eigen::MatrixXd vectors_;  // size() x dim()
  std::unordered_map<std::string, int> index_;
  int unk_id_ = -1;
  int pad_id_ = -1;
};

// One query: ids padded to a fixed length, with the true length kept so
// padding never leaks into losses.
struct QueryTokens {
  std::string query_id;
  std::vector<int> ids;  // length == padded_len
  int true_len = 0;      // tokens before padding (after truncation)
};

struct QueryCorpus {
  std::vector<QueryTokens> queries;
  int padded_len = 0;
  int skipped_blank = 0;  // blank input lines ignored by the loader
};

// Reads one query per line, whitespace-tokenized, mapping OOV words to
// <unk>. Queries longer than max_len are truncated; shorter ones padded
// with <pad>. query_id is "q" + zero-based line-order index among kept
// lines. Throws if no non-blank line remains.
QueryCorpus load_query_corpus(const std::string& path,
                              const EmbeddingTable& table, int max_len);

}  // namespace tvg
