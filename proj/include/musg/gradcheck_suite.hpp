#pragma once

#include <string>
#include <vector>

#include "musg/optim.hpp"

namespace musg {

struct GradCheckItem {
  std::string name;
  GradCheckResult result;
};

// Every layer type on its own, one heterogeneous block, both task heads and
// the two-layer encoder in the four {plain, edge_forwarding} x
// {concat, multiply} configurations, all in 64-bit on a fixed small score.
std::vector<GradCheckItem> run_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& opt = {});

}  // namespace musg
