#include "fairtrans/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fairtrans/rng.hpp"
#include "fairtrans/util.hpp"

namespace fairtrans {

double finite_diff_check(const LossBuilder& build_loss, ParameterSet& params, double epsilon,
                         uint64_t seed, size_t min_coords, const CoordFilter& include) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw std::invalid_argument(str_format("finite_diff_check: epsilon %.3g outside [1e-7,1e-3]",
                                           epsilon));
  }

  params.zero_grad();
  Tensor loss = build_loss();
  if (!std::isfinite(loss.value())) {
    throw std::runtime_error("finite_diff_check: loss is non-finite at the base point");
  }
  backward(loss);

  struct Coord {
    const std::string* name;
    Tensor tensor;  // handle sharing the parameter's storage
    size_t index;
    double analytic;
  };
  std::vector<Coord> coords;
  for (const auto& [name, t] : params.tensors()) {
    auto g = t.grad();
    for (size_t i = 0; i < t.size(); ++i) {
      if (include && !include(name, i)) continue;
      coords.push_back({&name, t, i, g.empty() ? 0.0 : g[i]});
    }
  }
  if (coords.empty()) {
    throw std::invalid_argument("finite_diff_check: no parameter coordinates to check");
  }

  Rng rng(tag_seed(seed, "finite_diff_check"));
  size_t n_check = std::min(coords.size(), std::max<size_t>(min_coords, 1));
  std::vector<size_t> picks = rng.sample_without_replacement(coords.size(), n_check);
  std::sort(picks.begin(), picks.end());

  double worst = 0.0;
  for (size_t pick : picks) {
    Coord& c = coords[pick];
    auto vals = c.tensor.values_mut();
    double saved = vals[c.index];

    vals[c.index] = saved + epsilon;
    double f_plus = build_loss().value();
    vals[c.index] = saved - epsilon;
    double f_minus = build_loss().value();
    vals[c.index] = saved;

    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw std::runtime_error(str_format("finite_diff_check: non-finite loss perturbing %s[%zu]",
                                          c.name->c_str(), c.index));
    }
    double numeric = (f_plus - f_minus) / (2.0 * epsilon);
    double denom = std::max({std::fabs(c.analytic), std::fabs(numeric), 1e-8});
    double rel = std::fabs(c.analytic - numeric) / denom;
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace fairtrans
