#include "tvg/config.hpp"

#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tvg/common.hpp"

namespace tvg {

namespace {

// Field table drives parse, serialize, and hash so they cannot drift apart.
struct Field {
  enum Kind { Int, Double, String, U64 } kind;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

std::map<std::string, Field> field_table() {
  std::map<std::string, Field> t;
  auto add_int = [&](const std::string& key, int Config::*p) {
    t[key] = {Field::Int,
              [p, key](Config& c, const std::string& v) {
                size_t used = 0;
                int parsed;
                try {
                  parsed = std::stoi(v, &used);
                } catch (const std::exception&) {
                  throw std::runtime_error("config: bad integer for '" + key +
                                           "': " + v);
                }
                if (used != v.size())
                  throw std::runtime_error("config: bad integer for '" + key +
                                           "': " + v);
                c.*p = parsed;
              },
              [p](const Config& c) { return std::to_string(c.*p); }};
  };
  auto add_double = [&](const std::string& key, double Config::*p) {
    t[key] = {Field::Double,
              [p, key](Config& c, const std::string& v) {
                size_t used = 0;
                double parsed;
                try {
                  parsed = std::stod(v, &used);
                } catch (const std::exception&) {
                  throw std::runtime_error("config: bad number for '" + key +
                                           "': " + v);
                }
                if (used != v.size())
                  throw std::runtime_error("config: bad number for '" + key +
                                           "': " + v);
                c.*p = parsed;
              },
              [p](const Config& c) {
                std::ostringstream os;
                os.precision(17);
                os << c.*p;
                return os.str();
              }};
  };
  auto add_string = [&](const std::string& key, std::string Config::*p) {
    t[key] = {Field::String,
              [p](Config& c, const std::string& v) { c.*p = v; },
              [p](const Config& c) { return c.*p; }};
  };
  auto add_u64 = [&](const std::string& key, uint64_t Config::*p) {
    t[key] = {Field::U64,
              [p, key](Config& c, const std::string& v) {
                size_t used = 0;
                unsigned long long parsed;
                try {
                  parsed = std::stoull(v, &used);
                } catch (const std::exception&) {
                  throw std::runtime_error("config: bad integer for '" + key +
                                           "': " + v);
                }
                if (used != v.size())
                  throw std::runtime_error("config: bad integer for '" + key +
                                           "': " + v);
                c.*p = parsed;
              },
              [p](const Config& c) { return std::to_string(c.*p); }};
  };

  add_int("n_necks", &Config::n_necks);
  add_int("sentence_dim", &Config::sentence_dim);
  add_int("neck_dim", &Config::neck_dim);
  add_double("lambda", &Config::lambda);
  add_double("alpha_w", &Config::alpha_w);
  add_double("beta_w", &Config::beta_w);
  add_int("max_query_len", &Config::max_query_len);
  add_int("language_epochs", &Config::language_epochs);
  add_double("lr_language", &Config::lr_language);
  add_int("n_clusters", &Config::n_clusters);
  add_int("kmeans_restarts", &Config::kmeans_restarts);
  add_int("kmeans_max_iters", &Config::kmeans_max_iters);
  add_string("center_mode", &Config::center_mode);
  add_int("joint_dim", &Config::joint_dim);
  add_int("attention_heads", &Config::attention_heads);
  add_double("theta", &Config::theta);
  add_double("tau1", &Config::tau1);
  add_double("tau2", &Config::tau2);
  add_double("tau3", &Config::tau3);
  add_double("alpha_v", &Config::alpha_v);
  add_double("beta_v", &Config::beta_v);
  add_int("sampled_centers", &Config::sampled_centers);
  add_int("videos_per_center", &Config::videos_per_center);
  add_double("sigma_ncut", &Config::sigma_ncut);
  add_int("video_epochs", &Config::video_epochs);
  add_double("lr_video", &Config::lr_video);
  add_int("iterations", &Config::iterations);
  add_double("infer_threshold", &Config::infer_threshold);
  add_int("top_n", &Config::top_n);
  add_u64("seed", &Config::seed);
  return t;
}

}  // namespace

void Config::validate() const {
  auto fail = [](const std::string& msg) { throw std::runtime_error("config: " + msg); };
  if (n_necks < 1) fail("n_necks must be >= 1, got " + std::to_string(n_necks));
  if (sentence_dim < 1) fail("sentence_dim must be >= 1");
  if (neck_dim < 1) fail("neck_dim must be >= 1");
  if (!(lambda > 0.0 && lambda <= 1.0))
    fail("lambda must be in (0, 1], got " + std::to_string(lambda));
  if (alpha_w < 0.0) fail("alpha_w must be >= 0");
  if (beta_w < 0.0) fail("beta_w must be >= 0");
  if (max_query_len < 1) fail("max_query_len must be >= 1");
  if (language_epochs < 0) fail("language_epochs must be >= 0");
  if (lr_language < 0.0) fail("lr_language must be >= 0");
  if (n_clusters < 2)
    fail("n_clusters must be >= 2, got " + std::to_string(n_clusters));
  if (kmeans_restarts < 1) fail("kmeans_restarts must be >= 1");
  if (kmeans_max_iters < 1) fail("kmeans_max_iters must be >= 1");
  if (center_mode != "center" && center_mode != "sample" &&
      center_mode != "random")
    fail("center_mode must be one of center|sample|random, got '" +
         center_mode + "'");
  if (joint_dim < 1) fail("joint_dim must be >= 1");
  if (attention_heads < 1) fail("attention_heads must be >= 1");
  if (joint_dim % attention_heads != 0)
    fail("joint_dim (" + std::to_string(joint_dim) +
         ") must be divisible by attention_heads (" +
         std::to_string(attention_heads) + ")");
  if (theta < 0.0) fail("theta must be >= 0");
  if (tau1 < 0.0) fail("tau1 must be >= 0");
  if (tau2 < 0.0) fail("tau2 must be >= 0");
  if (tau3 < 0.0) fail("tau3 must be >= 0");
  if (alpha_v < 0.0) fail("alpha_v must be >= 0");
  if (beta_v < 0.0) fail("beta_v must be >= 0");
  if (sampled_centers < 1) fail("sampled_centers must be >= 1");
  if (sampled_centers > n_clusters)
    fail("sampled_centers (" + std::to_string(sampled_centers) +
         ") cannot exceed n_clusters (" + std::to_string(n_clusters) + ")");
  if (videos_per_center < 1) fail("videos_per_center must be >= 1");
  if (sigma_ncut < 0.0) fail("sigma_ncut must be >= 0 (0 = auto)");
  if (video_epochs < 1) fail("video_epochs must be >= 1");
  if (lr_video < 0.0) fail("lr_video must be >= 0");
  if (iterations < 1) fail("iterations must be >= 1");
  if (!(infer_threshold > 0.0 && infer_threshold <= 1.0))
    fail("infer_threshold must be in (0, 1], got " +
         std::to_string(infer_threshold));
  if (top_n < 1) fail("top_n must be >= 1");
}

uint64_t Config::hash() const { return fnv1a64(to_text()); }

std::string Config::to_text() const {
  static const auto table = field_table();
  std::ostringstream os;
  for (const auto& [key, field] : table) {
    os << key << "=" << field.get(*this) << "\n";
  }
  return os.str();
}

Config Config::from_text(const std::string& text) {
  static const auto table = field_table();
  Config cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               " is not key=value: " + line);
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = table.find(key);
    if (it == table.end()) {
      throw std::runtime_error("config: unknown key '" + key + "' on line " +
                               std::to_string(lineno));
    }
    it->second.set(cfg, value);
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  Config cfg = from_text(read_text_file(path));
  cfg.validate();
  return cfg;
}

void Config::save(const std::string& path) const {
  write_text_file(path, to_text());
}

}  // namespace tvg
