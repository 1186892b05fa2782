#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "fairtrans/params.hpp"

namespace fairtrans {

// Rebuilds the loss graph from the current parameter values. Must be
// deterministic: two calls without parameter edits return the same scalar.
using LossBuilder = std::function<Tensor()>;

// Optional coordinate filter; return false to exclude a coordinate (used to
// step around non-differentiable kinks such as the L1 one).
using CoordFilter = std::function<bool(const std::string& name, size_t index)>;

// Central-difference gradient verification. Backpropagates once for the
// analytic gradient, then compares (f(t+e)-f(t-e))/2e on a seeded random
// subsample of at least `min_coords` coordinates (all of them when fewer
// exist). Relative error uses denominator max(|analytic|, |numeric|, 1e-8);
// returns the worst error over the sample. A non-finite loss at a perturbed
// point raises std::runtime_error naming the coordinate.
double finite_diff_check(const LossBuilder& build_loss, ParameterSet& params, double epsilon,
                         uint64_t seed, size_t min_coords = 50, const CoordFilter& include = {});

}  // namespace fairtrans
