#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "musg/nn.hpp"

namespace musg {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update with decoupled weight decay. Parameters
// whose gradient was never touched are treated as having a zero gradient.
template <typename T>
void adam_step(std::vector<nn::Parameter<T>>& params, AdamState<T>& state, const AdamOptions& opt);

struct GradCheckOptions {
  double eps = 1e-5;
  // Coordinates per parameter above which a random subsample is checked.
  std::size_t max_coords_per_param = 0;  // 0 = check everything
  std::size_t subsample = 200;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0, numeric = 0.0;
  std::size_t coords_checked = 0;
};

// Central differences against reverse mode. `loss` must rebuild the graph
// from the current parameter values on every call and return a 1x1 Var.
GradCheckResult grad_check(const std::function<ad::Var<double>()>& loss,
                           std::vector<nn::Parameter<double>>& params, const GradCheckOptions& opt = {});

// Binary checkpoint: "MGCV", version byte, u32 record count, then per record
// u32 name length, name bytes, u32 rank, u32 dims, float32 values. All
// integers and floats little-endian.
template <typename T>
void save_checkpoint(const std::string& path, const nn::ParameterStore<T>& store);
// Names and shapes must match the store exactly.
template <typename T>
void load_checkpoint(const std::string& path, nn::ParameterStore<T>& store);

}  // namespace musg
