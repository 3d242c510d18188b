#pragma once

#include <cstddef>
#include <vector>

#include "emocause/params.hpp"

namespace emocause {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers aligned with a ParamStore's entry order.
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  explicit AdamState(const ParamStore& params, AdamConfig config = {});
};

// One bias-corrected Adam update from the gradients stored on `params`
// (entries without a gradient buffer count as zero). A non-finite gradient
// throws NumericError naming the parameter, before anything is modified.
void adam_step(ParamStore& params, AdamState& state, double lr);

// Scales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before scaling.
double clip_grad_norm(ParamStore& params, double max_norm);

}  // namespace emocause
