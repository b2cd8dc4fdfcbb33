#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "tvg/checkpoint.hpp"
#include "tvg/common.hpp"
#include "tvg/config.hpp"
#include "tvg/data_model.hpp"
#include "tvg/matrix_io.hpp"

namespace fs = std::filesystem;
using namespace tvg;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("tvg_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  REQUIRE(out.good());
}

void append_u32(std::string& s, uint32_t v) {
  s.append(reinterpret_cast<const char*>(&v), 4);
}
void append_u64(std::string& s, uint64_t v) {
  s.append(reinterpret_cast<const char*>(&v), 8);
}
void append_f32(std::string& s, float v) {
  s.append(reinterpret_cast<const char*>(&v), 4);
}

// Builds a matrix container image from scratch so the reader is checked
// against the documented byte layout, not against the writer.
std::string craft_matrix_file(uint32_t version, uint32_t dtype, uint64_t rows,
                              uint64_t cols, const std::vector<float>& payload) {
  std::string body;
  append_u32(body, version);
  append_u32(body, dtype);
  append_u64(body, rows);
  append_u64(body, cols);
  for (float v : payload) append_f32(body, v);
  uint32_t crc = crc32(body.data(), body.size());
  std::string image = "TVGM" + body;
  image.append(reinterpret_cast<const char*>(&crc), 4);
  return image;
}

Eigen::MatrixXd random_matrix(long rows, long cols, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("data_model") {

TEST_CASE("matrix f64 round trip is exact") {
  TempDir dir;
  Eigen::MatrixXd m = random_matrix(7, 5, 11);
  save_matrix(dir.file("m.tvgm"), m, Dtype::f64);
  Eigen::MatrixXd back = load_matrix(dir.file("m.tvgm"));
  CHECK(back.rows() == 7);
  CHECK(back.cols() == 5);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix f32 round trip equals the float cast") {
  TempDir dir;
  Eigen::MatrixXd m = random_matrix(6, 4, 12);
  save_matrix(dir.file("m.tvgm"), m, Dtype::f32);
  Eigen::MatrixXd back = load_matrix(dir.file("m.tvgm"));
  Eigen::MatrixXd expect = m.cast<float>().cast<double>();
  CHECK((back - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hand-built header with 3x2 f32 payload parses to shape 3x2") {
  TempDir dir;
  std::vector<float> payload = {1.5f, -2.0f, 0.25f, 3.0f, -0.5f, 8.0f};
  spit(dir.file("h.tvgm"), craft_matrix_file(1, 1, 3, 2, payload));
  Eigen::MatrixXd m = load_matrix(dir.file("h.tvgm"));
  REQUIRE(m.rows() == 3);
  REQUIRE(m.cols() == 2);
  // Row-major payload order; all values are exact in f32.
  CHECK(m(0, 0) == 1.5);
  CHECK(m(0, 1) == -2.0);
  CHECK(m(2, 1) == 8.0);
}

TEST_CASE("payload shorter than the declared shape is a size mismatch") {
  TempDir dir;
  // Header claims 3x2 but only 4 floats follow; CRC is consistent so the
  // failure must come from the shape check, not the checksum.
  std::vector<float> payload = {1.f, 2.f, 3.f, 4.f};
  spit(dir.file("short.tvgm"), craft_matrix_file(1, 1, 3, 2, payload));
  CHECK_THROWS_WITH_AS(load_matrix(dir.file("short.tvgm")),
                       doctest::Contains("size mismatch"), std::runtime_error);
}

TEST_CASE("payload longer than the declared shape is a size mismatch") {
  TempDir dir;
  std::vector<float> payload = {1.f, 2.f, 3.f, 4.f, 5.f, 6.f, 7.f};
  spit(dir.file("long.tvgm"), craft_matrix_file(1, 1, 3, 2, payload));
  CHECK_THROWS_WITH_AS(load_matrix(dir.file("long.tvgm")),
                       doctest::Contains("size mismatch"), std::runtime_error);
}

TEST_CASE("physically truncated file fails to load") {
  TempDir dir;
  save_matrix(dir.file("t.tvgm"), random_matrix(4, 4, 3), Dtype::f64);
  std::string bytes = slurp(dir.file("t.tvgm"));
  spit(dir.file("t.tvgm"), bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(load_matrix(dir.file("t.tvgm")), std::runtime_error);
}

TEST_CASE("corrupted payload byte fails the checksum") {
  TempDir dir;
  save_matrix(dir.file("c.tvgm"), random_matrix(4, 4, 4), Dtype::f64);
  std::string bytes = slurp(dir.file("c.tvgm"));
  bytes[bytes.size() / 2] ^= 0x40;
  spit(dir.file("c.tvgm"), bytes);
  CHECK_THROWS_WITH_AS(load_matrix(dir.file("c.tvgm")),
                       doctest::Contains("checksum"), std::runtime_error);
}

TEST_CASE("unsupported container version names both versions") {
  TempDir dir;
  spit(dir.file("v.tvgm"), craft_matrix_file(9, 1, 1, 1, {1.f}));
  try {
    load_matrix(dir.file("v.tvgm"));
    FAIL("expected a version error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("9") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }
}

TEST_CASE("bad magic is rejected") {
  TempDir dir;
  spit(dir.file("bad.tvgm"), "NOPE" + std::string(64, '\0'));
  CHECK_THROWS_WITH_AS(load_matrix(dir.file("bad.tvgm")),
                       doctest::Contains("magic"), std::runtime_error);
}

TEST_CASE("128x500 f32 features survive a second round trip byte-identically") {
  TempDir dir;
  Eigen::MatrixXd m = random_matrix(128, 500, 99);
  save_matrix(dir.file("a.tvgm"), m, Dtype::f32);
  Eigen::MatrixXd once = load_matrix(dir.file("a.tvgm"));
  save_matrix(dir.file("b.tvgm"), once, Dtype::f32);
  CHECK(slurp(dir.file("a.tvgm")) == slurp(dir.file("b.tvgm")));
  Eigen::MatrixXd twice = load_matrix(dir.file("b.tvgm"));
  CHECK((once - twice).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-finite entry is reported with its index") {
  TempDir dir;
  Eigen::MatrixXd m = random_matrix(3, 3, 5);
  m(1, 2) = std::numeric_limits<double>::quiet_NaN();
  save_matrix(dir.file("nan.tvgm"), m, Dtype::f64);
  try {
    load_matrix(dir.file("nan.tvgm"));
    FAIL("expected a non-finite error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("col 2") != std::string::npos);
  }
  // Opting out of the finiteness check loads the raw values.
  Eigen::MatrixXd raw = load_matrix(dir.file("nan.tvgm"), false);
  CHECK(std::isnan(raw(1, 2)));
}

TEST_CASE("feature dir loads sorted by id and rejects dim mismatches") {
  TempDir dir;
  save_matrix(dir.file("vidB.tvgm"), random_matrix(4, 3, 1), Dtype::f32);
  save_matrix(dir.file("vidA.tvgm"), random_matrix(6, 3, 2), Dtype::f32);
  auto seqs = load_feature_dir(dir.path.string());
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].video_id == "vidA");
  CHECK(seqs[1].video_id == "vidB");
  CHECK(seqs[0].frames() == 6);
  CHECK(seqs[1].frames() == 4);

  save_matrix(dir.file("vidC.tvgm"), random_matrix(4, 5, 3), Dtype::f32);
  CHECK_THROWS_WITH_AS(load_feature_dir(dir.path.string()),
                       doctest::Contains("dim mismatch"), std::runtime_error);
}

TEST_CASE("empty feature dir is an error") {
  TempDir dir;
  CHECK_THROWS_WITH_AS(load_feature_dir(dir.path.string()),
                       doctest::Contains("no .tvgm"), std::runtime_error);
}

TEST_CASE("vocab {a,b} maps 'a b' to ids 0 1") {
  TempDir dir;
  Eigen::MatrixXd vecs(2, 3);
  vecs << 1, 2, 3, 4, 5, 6;
  EmbeddingTable table({"a", "b"}, vecs);
  write_text_file(dir.file("q.txt"), "a b\n");
  auto corpus = load_query_corpus(dir.file("q.txt"), table, 10);
  REQUIRE(corpus.queries.size() == 1);
  const auto& q = corpus.queries[0];
  CHECK(q.query_id == "q0");
  CHECK(q.true_len == 2);
  CHECK(q.ids[0] == 0);
  CHECK(q.ids[1] == 1);
  for (size_t i = 2; i < q.ids.size(); ++i) CHECK(q.ids[i] == table.pad_id());
  CHECK(static_cast<int>(q.ids.size()) == 10);
}

TEST_CASE("out-of-vocabulary token maps to <unk>") {
  Eigen::MatrixXd vecs(2, 3);
  vecs << 1, 2, 3, 4, 5, 6;
  EmbeddingTable table({"a", "b"}, vecs);
  TempDir dir;
  write_text_file(dir.file("q.txt"), "a zzz\n");
  auto corpus = load_query_corpus(dir.file("q.txt"), table, 10);
  CHECK(corpus.queries[0].ids[0] == 0);
  CHECK(corpus.queries[0].ids[1] == table.unk_id());
}

TEST_CASE("12-token query keeps exactly the first 10 tokens") {
  std::vector<std::string> vocab;
  for (int i = 0; i < 12; ++i) vocab.push_back("w" + std::to_string(i));
  EmbeddingTable table(vocab, Eigen::MatrixXd::Identity(12, 12));
  TempDir dir;
  std::string line;
  for (int i = 0; i < 12; ++i) line += "w" + std::to_string(i) + " ";
  write_text_file(dir.file("q.txt"), line + "\n");
  auto corpus = load_query_corpus(dir.file("q.txt"), table, 10);
  const auto& q = corpus.queries[0];
  CHECK(q.true_len == 10);
  REQUIRE(static_cast<int>(q.ids.size()) == 10);
  for (int i = 0; i < 10; ++i) CHECK(q.ids[i] == i);
}

TEST_CASE("blank lines are skipped and counted; ids follow kept order") {
  Eigen::MatrixXd vecs = Eigen::MatrixXd::Identity(2, 2);
  EmbeddingTable table({"a", "b"}, vecs);
  TempDir dir;
  write_text_file(dir.file("q.txt"), "a\n\n   \nb a\n");
  auto corpus = load_query_corpus(dir.file("q.txt"), table, 4);
  CHECK(corpus.skipped_blank == 2);
  REQUIRE(corpus.queries.size() == 2);
  CHECK(corpus.queries[0].query_id == "q0");
  CHECK(corpus.queries[1].query_id == "q1");
  CHECK(corpus.queries[1].ids[0] == 1);
}

TEST_CASE("query file with only blank lines is an error") {
  Eigen::MatrixXd vecs = Eigen::MatrixXd::Identity(2, 2);
  EmbeddingTable table({"a", "b"}, vecs);
  TempDir dir;
  write_text_file(dir.file("q.txt"), "\n\n");
  CHECK_THROWS_AS(load_query_corpus(dir.file("q.txt"), table, 4),
                  std::runtime_error);
}

TEST_CASE("special tokens are appended with zero rows when absent") {
  Eigen::MatrixXd vecs(1, 4);
  vecs << 1, 2, 3, 4;
  EmbeddingTable table({"hello"}, vecs);
  CHECK(table.size() == 3);
  CHECK(table.contains("<unk>"));
  CHECK(table.contains("<pad>"));
  CHECK(table.vector_of(table.unk_id()).norm() == 0.0);
  CHECK(table.vector_of(table.pad_id()).norm() == 0.0);
  CHECK(table.id_of("nonsense") == table.unk_id());
}

TEST_CASE("duplicate vocabulary tokens are rejected") {
  Eigen::MatrixXd vecs = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_WITH_AS(EmbeddingTable({"a", "a"}, vecs),
                       doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("embedding table save/load round trip") {
  TempDir dir;
  Eigen::MatrixXd vecs = random_matrix(3, 5, 21);
  EmbeddingTable table({"x", "y", "z"}, vecs);
  table.save(dir.file("vocab.txt"), dir.file("emb.tvgm"));
  EmbeddingTable back =
      EmbeddingTable::load(dir.file("vocab.txt"), dir.file("emb.tvgm"));
  CHECK(back.size() == table.size());
  CHECK(back.id_of("y") == table.id_of("y"));
  CHECK((back.vectors() - table.vectors()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("config text round trip preserves every field") {
  Config cfg;
  cfg.n_necks = 3;
  cfg.neck_dim = 48;
  cfg.lambda = 0.25;
  cfg.n_clusters = 7;
  cfg.lr_video = 1e-3;
  cfg.seed = 42;
  cfg.center_mode = "sample";
  Config back = Config::from_text(cfg.to_text());
  CHECK(back.n_necks == 3);
  CHECK(back.neck_dim == 48);
  CHECK(back.lambda == 0.25);
  CHECK(back.n_clusters == 7);
  CHECK(back.lr_video == 1e-3);
  CHECK(back.seed == 42);
  CHECK(back.center_mode == "sample");
  CHECK(back.to_text() == cfg.to_text());
  CHECK(back.hash() == cfg.hash());
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(Config::from_text("no_such_knob=1\n"), std::runtime_error);
  Config cfg;
  cfg.n_necks = 0;
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);
  cfg = Config();
  cfg.center_mode = "bogus";
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);
  cfg = Config();
  cfg.infer_threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);
}

TEST_CASE("config hash differs when a field differs") {
  Config a, b;
  b.n_clusters = a.n_clusters + 1;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("bank round trip preserves record order, kinds and bytes") {
  TempDir dir;
  Bank bank;
  bank.put("w/2", random_matrix(3, 3, 6), Dtype::f64);
  bank.put_text("note", "hello world");
  bank.put("feats", random_matrix(2, 4, 7), Dtype::f32);
  bank.save(dir.file("b.tvgb"));
  Bank back = Bank::load(dir.file("b.tvgb"));
  REQUIRE(back.size() == 3);
  CHECK(back.names()[0] == "w/2");
  CHECK(back.names()[1] == "note");
  CHECK(back.names()[2] == "feats");
  CHECK(back.text("note") == "hello world");
  CHECK((back.matrix("w/2") - bank.matrix("w/2")).cwiseAbs().maxCoeff() == 0.0);
  back.save(dir.file("b2.tvgb"));
  CHECK(slurp(dir.file("b.tvgb")) == slurp(dir.file("b2.tvgb")));
}

TEST_CASE("bank corruption fails the checksum") {
  TempDir dir;
  Bank bank;
  bank.put("m", random_matrix(5, 5, 8));
  bank.save(dir.file("b.tvgb"));
  std::string bytes = slurp(dir.file("b.tvgb"));
  bytes[20] ^= 0x01;
  spit(dir.file("b.tvgb"), bytes);
  CHECK_THROWS_WITH_AS(Bank::load(dir.file("b.tvgb")),
                       doctest::Contains("checksum"), std::runtime_error);
}

TEST_CASE("checkpoint stores iteration 3 and restores it") {
  TempDir dir;
  Config cfg;
  Checkpoint ck;
  ck.set_meta(cfg, 3, Rng(5).serialize());
  ck.bank.put("param/w", random_matrix(2, 2, 9));
  ck.save(dir.file("ck.tvgb"));
  Checkpoint back = Checkpoint::load(dir.file("ck.tvgb"));
  CHECK(back.iteration() == 3);
  CHECK(back.config().to_text() == cfg.to_text());
  CHECK(back.rng_state() == Rng(5).serialize());
}

TEST_CASE("checkpoint with a different format tag names found and expected") {
  TempDir dir;
  Bank bank;
  bank.put_text("meta/format", "tvg-ckpt-v9");
  bank.save(dir.file("ck.tvgb"));
  try {
    Checkpoint::load(dir.file("ck.tvgb"));
    FAIL("expected a format tag error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("tvg-ckpt-v9") != std::string::npos);
    CHECK(msg.find("tvg-ckpt-v1") != std::string::npos);
  }
}

TEST_CASE("label store round trips through file and bytes, odd lengths too") {
  TempDir dir;
  LabelStore store;
  store.set("v01", 0, 2, {1, 0, 1, 1, 0, 0, 1});         // 7 frames
  store.set("v02", 1, 0, {0, 1});                        // 2 frames
  store.set("v01", 1, 3, std::vector<uint8_t>(13, 1));   // 13 frames
  store.save(dir.file("l.tvgl"));
  LabelStore back = LabelStore::load(dir.file("l.tvgl"));
  CHECK(back.entry_count() == 3);
  CHECK(back.get("v01", 0, 2) == std::vector<uint8_t>({1, 0, 1, 1, 0, 0, 1}));
  CHECK(back.get("v02", 1, 0) == std::vector<uint8_t>({0, 1}));
  CHECK(back.get("v01", 1, 3).size() == 13);
  LabelStore again = LabelStore::from_bytes(back.to_bytes());
  CHECK(again.get("v01", 0, 2) == back.get("v01", 0, 2));
}

TEST_CASE("label store rejects values other than 0/1") {
  LabelStore store;
  CHECK_THROWS_AS(store.set("v", 0, 0, {0, 2}), std::invalid_argument);
}

TEST_CASE("label diff fraction counts flipped bits over shared keys") {
  LabelStore a, b;
  a.set("v", 0, 0, {1, 1, 0, 0});
  b.set("v", 0, 0, {1, 0, 0, 1});
  b.set("w", 0, 0, {1});  // only in b, ignored
  CHECK(a.diff_fraction(b) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(a.diff_fraction(a) == 0.0);
}

TEST_CASE("load_params restores bytes and rejects shape changes") {
  Param w("w", Eigen::MatrixXd::Zero(2, 3));
  Param b("b", Eigen::MatrixXd::Zero(1, 3));
  w.value << 1, 2, 3, 4, 5, 6;
  b.value << -1, -2, -3;
  Bank bank;
  save_params(bank, {&w, &b}, "param");
  Param w2("w", Eigen::MatrixXd::Zero(2, 3));
  Param b2("b", Eigen::MatrixXd::Zero(1, 3));
  load_params(bank, {&w2, &b2}, "param");
  CHECK((w2.value - w.value).cwiseAbs().maxCoeff() == 0.0);
  CHECK((b2.value - b.value).cwiseAbs().maxCoeff() == 0.0);

  Param wrong("w", Eigen::MatrixXd::Zero(3, 2));
  CHECK_THROWS_WITH_AS(load_params(bank, {&wrong}, "param"),
                       doctest::Contains("shape"), std::runtime_error);
  Param missing("nope", Eigen::MatrixXd::Zero(1, 1));
  CHECK_THROWS_WITH_AS(load_params(bank, {&missing}, "param"),
                       doctest::Contains("missing"), std::runtime_error);
}

}  // TEST_SUITE
