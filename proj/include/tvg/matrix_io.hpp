#pragma once
// Binary containers used across the pipeline.
//
// Single matrix file ("TVGM"): magic, version, dtype, rows, cols, row-major
// payload, trailing CRC-32. Frame features are stored as 32-bit floats;
// model tensors as 64-bit. All integers are little-endian.
//
// Bank file ("TVGB"): an ordered sequence of named records, each either a
// matrix or a text blob, with one trailing CRC-32 over all records. Used for
// neck exports, cluster banks, attention dumps and checkpoints.
//
// Label file ("TVGL"): per (video_id, neck, cluster) bit-packed binary frame
// labels, trailing CRC-32.

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tvg/common.hpp"

namespace tvg {

enum class Dtype : uint32_t { f32 = 1, f64 = 2 };

void save_matrix(const std::string& path, const Eigen::MatrixXd& m,
                 Dtype dtype = Dtype::f64);

// Throws on missing file, bad magic/version, payload size mismatch, checksum
// failure, and (when require_finite) on any non-finite entry, naming the
// offending index.
Eigen::MatrixXd load_matrix(const std::string& path, bool require_finite = true);

// Ordered, named records. Matrix records remember their storage dtype so a
// save/load round trip is byte-exact.
class Bank {
 public:
  void put(const std::string& name, const Eigen::MatrixXd& m,
           Dtype dtype = Dtype::f64);
  void put_text(const std::string& name, const std::string& text);

  bool has(const std::string& name) const;
  const Eigen::MatrixXd& matrix(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  size_t size() const { return order_.size(); }

  void save(const std::string& path) const;
  static Bank load(const std::string& path);

 private:
  struct Record {
    uint32_t kind = 0;  // 1 = matrix, 2 = text
    Eigen::MatrixXd m;
    Dtype dtype = Dtype::f64;
    std::string text;
  };
  std::vector<std::string> order_;
  std::map<std::string, Record> records_;
};

// Binary frame labels for every (video, neck index, cluster index) triple.
// Values are strictly 0/1; storage is bit-packed.
class LabelStore {
 public:
  void set(const std::string& video_id, int neck, int cluster,
           const std::vector<uint8_t>& labels);
  const std::vector<uint8_t>& get(const std::string& video_id, int neck,
                                  int cluster) const;
  bool has(const std::string& video_id, int neck, int cluster) const;
  size_t entry_count() const { return entries_.size(); }

  // Fraction of individual frame labels that differ from `other`, over the
  // keys present in both stores. Used for the per-iteration change rate.
  double diff_fraction(const LabelStore& other) const;

  void save(const std::string& path) const;
  static LabelStore load(const std::string& path);

  // Same byte layout as the file form; lets a checkpoint bank embed the
  // label state so a resumed run is self-contained.
  std::string to_bytes() const;
  static LabelStore from_bytes(const std::string& bytes);

  // Deterministic iteration for metrics and tests.
  std::vector<std::tuple<std::string, int, int>> keys() const;

 private:
  static LabelStore parse_labels(const std::string& bytes,
                                 const std::string& label);

  using Key = std::tuple<std::string, int, int>;
  std::map<Key, std::vector<uint8_t>> entries_;
};

}  // namespace tvg
