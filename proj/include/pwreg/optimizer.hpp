#pragma once

#include <cmath>
#include <stdexcept>

#include "pwreg/types.hpp"

namespace pwreg {

enum class StepDirection { ascend, descend };

struct AdamConfig {
  Scalar lr = 1e-4;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

struct AdamState {
  Vector m, v;  // first/second moment accumulators
  long step = 0;
};

/// Bias-corrected Adam update in the given direction. State accumulators are
/// allocated on first use; afterwards shapes must match.
inline void adam_step(AdamState& st, const AdamConfig& cfg, Vector& params,
                      const Vector& grad, StepDirection dir) {
  if (params.size() != grad.size())
    throw std::invalid_argument("adam_step: parameter/gradient shape mismatch");
  if (st.m.size() == 0) {
    st.m = Vector::Zero(params.size());
    st.v = Vector::Zero(params.size());
  }
  if (st.m.size() != params.size())
    throw std::invalid_argument("adam_step: state shape mismatch");
  ++st.step;
  st.m = cfg.beta1 * st.m + (1 - cfg.beta1) * grad;
  st.v = cfg.beta2 * st.v + (1 - cfg.beta2) * grad.cwiseProduct(grad);
  Scalar bc1 = 1 - std::pow(cfg.beta1, Scalar(st.step));
  Scalar bc2 = 1 - std::pow(cfg.beta2, Scalar(st.step));
  Vector update = (st.m / bc1).array() / ((st.v / bc2).array().sqrt() + cfg.eps);
  params += (dir == StepDirection::ascend ? cfg.lr : -cfg.lr) * update;
}

struct RmspropConfig {
  Scalar lr = 1e-4;
  Scalar decay = 0.99;
  Scalar eps = 1e-8;
};

struct RmspropState {
  Vector v;  // squared-gradient accumulator
};

inline void rmsprop_step(RmspropState& st, const RmspropConfig& cfg, Vector& params,
                         const Vector& grad, StepDirection dir) {
  if (params.size() != grad.size())
    throw std::invalid_argument("rmsprop_step: parameter/gradient shape mismatch");
  if (st.v.size() == 0) st.v = Vector::Zero(params.size());
  if (st.v.size() != params.size())
    throw std::invalid_argument("rmsprop_step: state shape mismatch");
  st.v = cfg.decay * st.v + (1 - cfg.decay) * grad.cwiseProduct(grad);
  Vector update = grad.array() / (st.v.array().sqrt() + cfg.eps);
  params += (dir == StepDirection::ascend ? cfg.lr : -cfg.lr) * update;
}

}  // namespace pwreg
