#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pwreg/potential.hpp"
#include "pwreg/transform.hpp"
#include "pwreg/types.hpp"

namespace pwreg {

struct RegistrationConfig {
  DualMode mode = DualMode::mass;
  Scalar mass_threshold = -1;      // m, required in mass mode
  Scalar distance_threshold = -1;  // h, required in distance mode
  int outer_steps = 2000;          // T
  int net_updates = 20;            // u, potential ascent steps per outer step
  Scalar lambda = 0.01;            // coherence strength
  Scalar rho = 2.0;                // kernel bandwidth
  Scalar sigma = 0.1;              // kernel regularizer
  int landmarks = 100;             // low-rank factor size, capped at source size
  Scalar kappa = 10.0;             // gradient penalty strength
  GpVariant gp = GpVariant::squared_max;
  TransformMode transform = TransformMode::drift_only;
  std::vector<int> widths = {128, 128, 128, 128};
  Scalar lr_net = 1e-4;
  Scalar lr_theta = 1e-4;
  Scalar h_init = -1;  // mass-mode clip-bound start; < 0 picks half the mean
                       // nearest-neighbor spacing of the reference set
  int batch = 0;       // per-outer-step uniform subsample cap, 0 = full sets
  int refine_steps = 0;
  int checkpoint_stride = 0;  // record theta every this many steps, 0 = none
  std::uint64_t seed = 0;

  void validate() const;
  Scalar threshold() const;
};

struct RegistrationRun {
  RegistrationConfig config;
  TransformParams theta;
  PotentialNet net;
  Vector loss_curve;    // training objective seen at each outer step
  Vector h_term_curve;  // recorded h*(m - m_beta) contribution per step
  Vector mse_curve;     // per-step MSE against truth; empty without truth
  Scalar initial_mse = -1;
  std::vector<std::pair<int, TransformParams>> checkpoints;
  Scalar seconds_potential = 0;
  Scalar seconds_transform = 0;
};

/// Registration-loop abort; additionally carries the last finite transform
/// for checkpoint dumps.
class RegistrationAbort : public NumericalAbort {
 public:
  RegistrationAbort(const std::string& what, int step_, TransformParams last)
      : NumericalAbort(what, step_), last_theta(std::move(last)) {}
  TransformParams last_theta;
};

/// Alternating adversarial loop: per outer step, transform the source, run
/// `net_updates` ascent steps on the potential, then descend the transform on
/// the data gradient plus the coherence gradient. Deterministic given seed.
RegistrationRun register_sets(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                              const RegistrationConfig& config,
                              const PointCloud* truth = nullptr);

/// Nearest-point polish: hard one-sided correspondence (nearest source point
/// per reference point, gated by the distance threshold or by keeping the m
/// closest reference points), squared-distance objective, `steps` descent
/// updates with the coherence term retained.
TransformParams refine_nearest(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                               const TransformParams& theta,
                               const RegistrationConfig& config, int steps);

/// Mean squared distance between positionally corresponding points.
Scalar mse(const PointCloud& aligned, const PointCloud& truth);

}  // namespace pwreg
