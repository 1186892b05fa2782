#include "fairtrans/params.hpp"

#include <cmath>
#include <stdexcept>

namespace fairtrans {

Tensor& ParameterSet::create(const std::string& name, std::vector<size_t> shape, double init_std,
                             Rng& rng) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = init_std * rng.normal();
  return adopt(name, Tensor::from_values(std::move(shape), std::move(v)));
}

Tensor& ParameterSet::create_zeros(const std::string& name, std::vector<size_t> shape) {
  return adopt(name, Tensor::zeros(std::move(shape)));
}

Tensor& ParameterSet::adopt(const std::string& name, Tensor t) {
  if (params_.count(name)) throw std::invalid_argument("parameter already exists: " + name);
  t.set_requires_grad(true);
  auto [it, ok] = params_.emplace(name, std::move(t));
  size_t n = it->second.size();
  state_.emplace(name, Moments{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  return it->second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("no such parameter: " + name);
  return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("no such parameter: " + name);
  return it->second;
}

bool ParameterSet::contains(const std::string& name) const { return params_.count(name) > 0; }

void ParameterSet::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

void ParameterSet::adam_step(double lr, double beta1, double beta2, double eps) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("adam_step: betas must lie in [0,1)");
  }
  ++steps_;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
  for (auto& [name, t] : params_) {
    Moments& mom = state_.at(name);
    auto vals = t.values_mut();
    auto g = t.grad();
    for (size_t i = 0; i < vals.size(); ++i) {
      double gi = g.empty() ? 0.0 : g[i];
      mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * gi;
      mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * gi * gi;
      double mhat = mom.m[i] / bc1;
      double vhat = mom.v[i] / bc2;
      vals[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

size_t ParameterSet::coord_count() const {
  size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

}  // namespace fairtrans
