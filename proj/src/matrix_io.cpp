#include "tvg/matrix_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

namespace tvg {

namespace {

constexpr uint32_t kFormatVersion = 1;

// Tracks a running CRC over everything after the magic.
class CrcWriter {
 public:
  CrcWriter(std::ostream& out, std::string label)
      : out_(out), label_(std::move(label)) {}

  void raw(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw std::runtime_error("write failed: " + label_);
  }

  void checked(const void* p, size_t n) {
    crc_ = crc32(p, n, crc_);
    raw(p, n);
  }

  template <typename T>
  void value(T v) {
    checked(&v, sizeof(T));
  }

  void finish() {
    raw(&crc_, sizeof(crc_));
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + label_);
  }

 private:
  std::ostream& out_;
  std::string label_;
  uint32_t crc_ = 0;
};

// Validates magic and trailing CRC of an in-memory image, then serves values.
class CrcReader {
 public:
  CrcReader(std::string buf, std::string label, const char magic[4])
      : label_(std::move(label)), buf_(std::move(buf)) {
    if (buf_.size() < 8) {
      throw std::runtime_error(label_ + ": file too short for header");
    }
    if (std::memcmp(buf_.data(), magic, 4) != 0) {
      throw std::runtime_error(label_ + ": bad magic (expected " +
                               std::string(magic, 4) + ")");
    }
    uint32_t stored;
    std::memcpy(&stored, buf_.data() + buf_.size() - 4, 4);
    uint32_t actual = crc32(buf_.data() + 4, buf_.size() - 8);
    if (stored != actual) {
      throw std::runtime_error(label_ + ": checksum mismatch (file corrupted)");
    }
    pos_ = 4;
    end_ = buf_.size() - 4;
  }

  void bytes(void* p, size_t n) {
    if (pos_ + n > end_) {
      throw std::runtime_error(label_ + ": payload size mismatch (expected " +
                               std::to_string(n) + " more bytes, have " +
                               std::to_string(end_ - pos_) + ")");
    }
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }

  template <typename T>
  T value() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }

  size_t remaining() const { return end_ - pos_; }
  const std::string& label() const { return label_; }

 private:
  std::string label_;
  std::string buf_;
  size_t pos_ = 0;
  size_t end_ = 0;
};

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for reading: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  return out;
}

size_t element_size(Dtype d) { return d == Dtype::f32 ? 4 : 8; }

void write_payload(CrcWriter& w, const Eigen::MatrixXd& m, Dtype dtype) {
  const long rows = m.rows(), cols = m.cols();
  if (dtype == Dtype::f32) {
    std::vector<float> buf(static_cast<size_t>(rows) * cols);
    size_t i = 0;
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) buf[i++] = static_cast<float>(m(r, c));
    if (!buf.empty()) w.checked(buf.data(), buf.size() * 4);
  } else {
    std::vector<double> buf(static_cast<size_t>(rows) * cols);
    size_t i = 0;
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) buf[i++] = m(r, c);
    if (!buf.empty()) w.checked(buf.data(), buf.size() * 8);
  }
}

Eigen::MatrixXd read_payload(CrcReader& r, Dtype dtype, uint64_t rows,
                             uint64_t cols) {
  const size_t n = static_cast<size_t>(rows) * static_cast<size_t>(cols);
  const size_t need = n * element_size(dtype);
  if (r.remaining() < need) {
    throw std::runtime_error(
        r.label() + ": payload size mismatch (header says " +
        std::to_string(rows) + "x" + std::to_string(cols) +
        ", payload holds " +
        std::to_string(r.remaining() / element_size(dtype)) + " elements)");
  }
  Eigen::MatrixXd m(static_cast<long>(rows), static_cast<long>(cols));
  if (dtype == Dtype::f32) {
    std::vector<float> buf(n);
    if (n) r.bytes(buf.data(), need);
    size_t i = 0;
    for (uint64_t rr = 0; rr < rows; ++rr)
      for (uint64_t cc = 0; cc < cols; ++cc)
        m(static_cast<long>(rr), static_cast<long>(cc)) = buf[i++];
  } else {
    std::vector<double> buf(n);
    if (n) r.bytes(buf.data(), need);
    size_t i = 0;
    for (uint64_t rr = 0; rr < rows; ++rr)
      for (uint64_t cc = 0; cc < cols; ++cc)
        m(static_cast<long>(rr), static_cast<long>(cc)) = buf[i++];
  }
  return m;
}

Dtype parse_dtype(uint32_t v, const std::string& label) {
  if (v == 1) return Dtype::f32;
  if (v == 2) return Dtype::f64;
  throw std::runtime_error(label + ": unknown element type tag " +
                           std::to_string(v));
}

void check_version(uint32_t v, const std::string& label) {
  if (v != kFormatVersion) {
    throw std::runtime_error(label + ": container version " +
                             std::to_string(v) + " unsupported (expected " +
                             std::to_string(kFormatVersion) + ")");
  }
}

}  // namespace

void save_matrix(const std::string& path, const Eigen::MatrixXd& m,
                 Dtype dtype) {
  std::ofstream out = open_for_write(path);
  CrcWriter w(out, path);
  w.raw("TVGM", 4);
  w.value<uint32_t>(kFormatVersion);
  w.value<uint32_t>(static_cast<uint32_t>(dtype));
  w.value<uint64_t>(static_cast<uint64_t>(m.rows()));
  w.value<uint64_t>(static_cast<uint64_t>(m.cols()));
  write_payload(w, m, dtype);
  w.finish();
}

Eigen::MatrixXd load_matrix(const std::string& path, bool require_finite) {
  CrcReader r(read_file_bytes(path), path, "TVGM");
  check_version(r.value<uint32_t>(), path);
  Dtype dtype = parse_dtype(r.value<uint32_t>(), path);
  uint64_t rows = r.value<uint64_t>();
  uint64_t cols = r.value<uint64_t>();
  Eigen::MatrixXd m = read_payload(r, dtype, rows, cols);
  if (r.remaining() != 0) {
    throw std::runtime_error(path + ": payload size mismatch (" +
                             std::to_string(r.remaining()) +
                             " trailing bytes beyond declared shape)");
  }
  if (require_finite) {
    auto [fr, fc] = first_non_finite(m);
    if (fr >= 0) {
      throw std::runtime_error(path + ": non-finite value at row " +
                               std::to_string(fr) + ", col " +
                               std::to_string(fc));
    }
  }
  return m;
}

void Bank::put(const std::string& name, const Eigen::MatrixXd& m, Dtype dtype) {
  auto it = records_.find(name);
  if (it == records_.end()) order_.push_back(name);
  Record rec;
  rec.kind = 1;
  rec.m = m;
  rec.dtype = dtype;
  records_[name] = std::move(rec);
}

void Bank::put_text(const std::string& name, const std::string& text) {
  auto it = records_.find(name);
  if (it == records_.end()) order_.push_back(name);
  Record rec;
  rec.kind = 2;
  rec.text = text;
  records_[name] = std::move(rec);
}

bool Bank::has(const std::string& name) const {
  return records_.count(name) > 0;
}

const Eigen::MatrixXd& Bank::matrix(const std::string& name) const {
  auto it = records_.find(name);
  if (it == records_.end() || it->second.kind != 1) {
    throw std::runtime_error("bank: no matrix record named '" + name + "'");
  }
  return it->second.m;
}

const std::string& Bank::text(const std::string& name) const {
  auto it = records_.find(name);
  if (it == records_.end() || it->second.kind != 2) {
    throw std::runtime_error("bank: no text record named '" + name + "'");
  }
  return it->second.text;
}

void Bank::save(const std::string& path) const {
  std::ofstream out = open_for_write(path);
  CrcWriter w(out, path);
  w.raw("TVGB", 4);
  w.value<uint32_t>(kFormatVersion);
  w.value<uint64_t>(order_.size());
  for (const auto& name : order_) {
    const Record& rec = records_.at(name);
    w.value<uint32_t>(static_cast<uint32_t>(name.size()));
    if (!name.empty()) w.checked(name.data(), name.size());
    w.value<uint32_t>(rec.kind);
    if (rec.kind == 1) {
      w.value<uint32_t>(static_cast<uint32_t>(rec.dtype));
      w.value<uint64_t>(static_cast<uint64_t>(rec.m.rows()));
      w.value<uint64_t>(static_cast<uint64_t>(rec.m.cols()));
      write_payload(w, rec.m, rec.dtype);
    } else {
      w.value<uint64_t>(rec.text.size());
      if (!rec.text.empty()) w.checked(rec.text.data(), rec.text.size());
    }
  }
  w.finish();
}

Bank Bank::load(const std::string& path) {
  CrcReader r(read_file_bytes(path), path, "TVGB");
  check_version(r.value<uint32_t>(), path);
  uint64_t count = r.value<uint64_t>();
  Bank bank;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = r.value<uint32_t>();
    std::string name(name_len, '\0');
    if (name_len) r.bytes(name.data(), name_len);
    uint32_t kind = r.value<uint32_t>();
    if (kind == 1) {
      Dtype dtype = parse_dtype(r.value<uint32_t>(), path);
      uint64_t rows = r.value<uint64_t>();
      uint64_t cols = r.value<uint64_t>();
      bank.put(name, read_payload(r, dtype, rows, cols), dtype);
    } else if (kind == 2) {
      uint64_t len = r.value<uint64_t>();
      std::string text(static_cast<size_t>(len), '\0');
      if (len) r.bytes(text.data(), static_cast<size_t>(len));
      bank.put_text(name, text);
    } else {
      throw std::runtime_error(path + ": unknown record kind " +
                               std::to_string(kind));
    }
  }
  if (r.remaining() != 0) {
    throw std::runtime_error(path + ": trailing bytes after last record");
  }
  return bank;
}

void LabelStore::set(const std::string& video_id, int neck, int cluster,
                     const std::vector<uint8_t>& labels) {
  for (size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] > 1) {
      throw std::invalid_argument("label store: labels must be 0/1 (got " +
                                  std::to_string(int(labels[t])) +
                                  " at frame " + std::to_string(t) + ")");
    }
  }
  entries_[{video_id, neck, cluster}] = labels;
}

const std::vector<uint8_t>& LabelStore::get(const std::string& video_id,
                                            int neck, int cluster) const {
  auto it = entries_.find({video_id, neck, cluster});
  if (it == entries_.end()) {
    throw std::runtime_error("label store: no entry for (" + video_id + ", " +
                             std::to_string(neck) + ", " +
                             std::to_string(cluster) + ")");
  }
  return it->second;
}

bool LabelStore::has(const std::string& video_id, int neck, int cluster) const {
  return entries_.count({video_id, neck, cluster}) > 0;
}

double LabelStore::diff_fraction(const LabelStore& other) const {
  size_t total = 0, changed = 0;
  for (const auto& [key, labels] : entries_) {
    auto it = other.entries_.find(key);
    if (it == other.entries_.end()) continue;
    const auto& prev = it->second;
    size_t n = std::min(labels.size(), prev.size());
    for (size_t t = 0; t < n; ++t) {
      ++total;
      if (labels[t] != prev[t]) ++changed;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(changed) / total;
}

std::string LabelStore::to_bytes() const {
  std::ostringstream os(std::ios::binary);
  CrcWriter w(os, "label bytes");
  w.raw("TVGL", 4);
  w.value<uint32_t>(kFormatVersion);
  w.value<uint64_t>(entries_.size());
  for (const auto& [key, labels] : entries_) {
    const auto& [vid, neck, cluster] = key;
    w.value<uint32_t>(static_cast<uint32_t>(vid.size()));
    if (!vid.empty()) w.checked(vid.data(), vid.size());
    w.value<uint32_t>(static_cast<uint32_t>(neck));
    w.value<uint32_t>(static_cast<uint32_t>(cluster));
    w.value<uint64_t>(labels.size());
    std::vector<uint8_t> packed((labels.size() + 7) / 8, 0);
    for (size_t t = 0; t < labels.size(); ++t) {
      if (labels[t]) packed[t / 8] |= uint8_t(1u << (t % 8));
    }
    if (!packed.empty()) w.checked(packed.data(), packed.size());
  }
  w.finish();
  return os.str();
}

LabelStore LabelStore::from_bytes(const std::string& bytes) {
  return parse_labels(bytes, "label bytes");
}

LabelStore LabelStore::parse_labels(const std::string& bytes,
                                    const std::string& label) {
  CrcReader r(bytes, label, "TVGL");
  check_version(r.value<uint32_t>(), r.label());
  uint64_t count = r.value<uint64_t>();
  LabelStore store;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t vid_len = r.value<uint32_t>();
    std::string vid(vid_len, '\0');
    if (vid_len) r.bytes(vid.data(), vid_len);
    int neck = static_cast<int>(r.value<uint32_t>());
    int cluster = static_cast<int>(r.value<uint32_t>());
    uint64_t t_count = r.value<uint64_t>();
    std::vector<uint8_t> packed((t_count + 7) / 8);
    if (!packed.empty()) r.bytes(packed.data(), packed.size());
    std::vector<uint8_t> labels(static_cast<size_t>(t_count));
    for (uint64_t t = 0; t < t_count; ++t) {
      labels[t] = (packed[t / 8] >> (t % 8)) & 1u;
    }
    store.set(vid, neck, cluster, labels);
  }
  if (r.remaining() != 0) {
    throw std::runtime_error(label + ": trailing bytes after last record");
  }
  return store;
}

void LabelStore::save(const std::string& path) const {
  std::ofstream out = open_for_write(path);
  const std::string bytes = to_bytes();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

LabelStore LabelStore::load(const std::string& path) {
  return parse_labels(read_file_bytes(path), path);
}

std::vector<std::tuple<std::string, int, int>> LabelStore::keys() const {
  std::vector<std::tuple<std::string, int, int>> out;
  out.reserve(entries_.size());
  for (const auto& [key, _] : entries_) out.push_back(key);
  return out;
}

}  // namespace tvg
