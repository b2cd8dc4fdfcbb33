#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tvg/autodiff.hpp"

namespace tvg {

struct GradCheckOptions {
  double step = 1e-5;       // central-difference half step
  double tol = 1e-4;        // relative error bound
  // A coordinate sits on a kink (relu/max/clamp corner) when one-sided
  // differences disagree by more than this relative amount; it is skipped
  // rather than misreported.
  double kink_tol = 1e-3;
  int max_coords_per_param = 0;  // 0 = check every coordinate
  uint64_t sample_seed = 1;      // used only when sampling coordinates
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  long worst_row = -1;
  long worst_col = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int coords_checked = 0;
  int kinks_skipped = 0;

  bool ok(double tol) const { return max_rel_err <= tol; }
  std::string describe() const;
};

// build constructs the scalar loss inside a fresh graph, reading the
// current values of params (through Graph::leaf). The same callback serves
// the analytic pass (forward + backward) and every perturbed forward.
GradCheckReport check_gradients(const std::vector<Param*>& params,
                                const std::function<Var(Graph&)>& build,
                                const GradCheckOptions& opt = {});

}  // namespace tvg
