#pragma once

#include <string>
#include <vector>

#include "tvg/autodiff.hpp"
#include "tvg/config.hpp"
#include "tvg/matrix_io.hpp"

namespace tvg {

// A checkpoint is a bank with a format tag plus metadata records:
//   meta/format     "tvg-ckpt-v1"
//   meta/iteration  outer iteration last completed
//   meta/config     full config text (restored runs must match)
//   meta/rng        serialized engine state for bit-exact resume
// Model tensors and optimizer moments live beside them by name.
class Checkpoint {
 public:
  Bank bank;

  void set_meta(const Config& cfg, int iteration, const std::string& rng_state);
  Config config() const;
  int iteration() const;
  std::string rng_state() const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

// Stores each param under prefix + "/" + name as f64 (byte exact).
void save_params(Bank& bank, const std::vector<Param*>& params,
                 const std::string& prefix);

// Restores values; throws when a tensor is missing or its shape differs.
void load_params(const Bank& bank, const std::vector<Param*>& params,
                 const std::string& prefix);

}  // namespace tvg
