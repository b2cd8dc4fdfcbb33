#include "tvg/gradcheck.hpp"

#include <cmath>
#include <sstream>

#include "tvg/common.hpp"

namespace tvg {

std::string GradCheckReport::describe() const {
  std::ostringstream os;
  os.precision(6);
  os << "max rel err " << max_rel_err << " over " << coords_checked
     << " coords (" << kinks_skipped << " kinks skipped)";
  if (!worst_param.empty()) {
    os << "; worst " << worst_param << "(" << worst_row << "," << worst_col
       << ") analytic " << worst_analytic << " numeric " << worst_numeric;
  }
  return os.str();
}

GradCheckReport check_gradients(const std::vector<Param*>& params,
                                const std::function<Var(Graph&)>& build,
                                const GradCheckOptions& opt) {
  auto eval = [&]() {
    Graph g;
    Var loss = build(g);
    return g.scalar_value(loss);
  };

  // Analytic gradients once, with unperturbed values.
  for (Param* p : params) p->zero_grad();
  {
    Graph g;
    Var loss = build(g);
    g.backward(loss);
  }

  GradCheckReport rep;
  const double h = opt.step;
  Rng pick(opt.sample_seed);

  for (Param* p : params) {
    std::vector<std::pair<long, long>> coords;
    for (long r = 0; r < p->value.rows(); ++r)
      for (long c = 0; c < p->value.cols(); ++c) coords.emplace_back(r, c);
    if (opt.max_coords_per_param > 0 &&
        static_cast<int>(coords.size()) > opt.max_coords_per_param) {
      auto idx = pick.sample_without_replacement(
          coords.size(), static_cast<size_t>(opt.max_coords_per_param));
      std::vector<std::pair<long, long>> chosen;
      for (size_t i : idx) chosen.push_back(coords[i]);
      coords = std::move(chosen);
    }

    for (auto [r, c] : coords) {
      const double orig = p->value(r, c);
      p->value(r, c) = orig + h;
      const double fp = eval();
      p->value(r, c) = orig - h;
      const double fm = eval();
      p->value(r, c) = orig;
      const double f0 = eval();

      const double fwd = (fp - f0) / h;
      const double bwd = (f0 - fm) / h;
      const double disagree =
          std::abs(fwd - bwd) /
          std::max({1.0, std::abs(fwd), std::abs(bwd)});
      if (disagree > opt.kink_tol) {
        ++rep.kinks_skipped;
        continue;
      }

      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p->grad(r, c);
      const double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      ++rep.coords_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = p->name;
        rep.worst_row = r;
        rep.worst_col = c;
        rep.worst_analytic = analytic;
        rep.worst_numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace tvg
