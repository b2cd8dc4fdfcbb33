#include "tvg/checkpoint.hpp"

#include <stdexcept>

namespace tvg {

namespace {
constexpr const char* kFormatTag = "tvg-ckpt-v1";
}

void Checkpoint::set_meta(const Config& cfg, int iteration,
                          const std::string& rng_state) {
  bank.put_text("meta/format", kFormatTag);
  bank.put_text("meta/iteration", std::to_string(iteration));
  bank.put_text("meta/config", cfg.to_text());
  bank.put_text("meta/rng", rng_state);
}

Config Checkpoint::config() const {
  Config cfg = Config::from_text(bank.text("meta/config"));
  cfg.validate();
  return cfg;
}

int Checkpoint::iteration() const {
  return std::stoi(bank.text("meta/iteration"));
}

std::string Checkpoint::rng_state() const { return bank.text("meta/rng"); }

void Checkpoint::save(const std::string& path) const {
  if (!bank.has("meta/format")) {
    throw std::runtime_error("checkpoint: set_meta must run before save");
  }
  bank.save(path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  Checkpoint ckpt;
  ckpt.bank = Bank::load(path);
  if (!ckpt.bank.has("meta/format")) {
    throw std::runtime_error(path + ": not a checkpoint (no format record)");
  }
  const std::string& tag = ckpt.bank.text("meta/format");
  if (tag != kFormatTag) {
    throw std::runtime_error(path + ": checkpoint format '" + tag +
                             "' unsupported (expected '" + kFormatTag + "')");
  }
  return ckpt;
}

void save_params(Bank& bank, const std::vector<Param*>& params,
                 const std::string& prefix) {
  for (const Param* p : params) {
    bank.put(prefix + "/" + p->name, p->value, Dtype::f64);
  }
}

void load_params(const Bank& bank, const std::vector<Param*>& params,
                 const std::string& prefix) {
  for (Param* p : params) {
    const std::string key = prefix + "/" + p->name;
    if (!bank.has(key)) {
      throw std::runtime_error("checkpoint: missing tensor '" + key + "'");
    }
    const Eigen::MatrixXd& m = bank.matrix(key);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw std::runtime_error(
          "checkpoint: tensor '" + key + "' has shape " +
          std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
          ", parameter expects " + std::to_string(p->value.rows()) + "x" +
          std::to_string(p->value.cols()));
    }
    p->value = m;
    p->zero_grad();
  }
}

}  // namespace tvg
