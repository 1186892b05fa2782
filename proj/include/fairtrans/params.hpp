#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairtrans/rng.hpp"
#include "fairtrans/tensor.hpp"

namespace fairtrans {

// Named map of trainable leaf tensors plus per-parameter adaptive-moment
// state. Names are unique; iteration is in name order so every reduction
// and update walks parameters in a fixed sequence.
class ParameterSet {
 public:
  Tensor& create(const std::string& name, std::vector<size_t> shape, double init_std, Rng& rng);
  Tensor& create_zeros(const std::string& name, std::vector<size_t> shape);
  Tensor& adopt(const std::string& name, Tensor t);  // claims t as a trainable leaf

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  void zero_grad();

  // Standard bias-corrected adaptive-moment update. Gradients are left
  // untouched; callers reset them explicitly between accumulation windows.
  void adam_step(double lr, double beta1, double beta2, double eps = 1e-8);

  int64_t steps() const { return steps_; }
  size_t coord_count() const;
  const std::map<std::string, Tensor>& tensors() const { return params_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  std::map<std::string, Tensor> params_;
  std::map<std::string, Moments> state_;
  int64_t steps_ = 0;
};

}  // namespace fairtrans
