#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pwreg/types.hpp"

namespace pwreg {

/// Training state stopped being finite (exploding weights or clip bound).
/// Aborts carry the step so harnesses can report where the run broke.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(const std::string& what, int step_)
      : std::runtime_error(what), step(step_) {}
  int step;
};

/// Point-wise MLP potential with output activation max(-|y|, -h), so values
/// always lie in [-h, 0]. Four ReLU hidden layers; the raw input is
/// concatenated onto the fourth layer's input (skip connection).
struct PotentialNet {
  Matrix W1, W2, W3, W4, W5;  // W5 is 1 x w4
  Vector b1, b2, b3, b4;
  Scalar b5 = 0;
  Scalar h = 0;           // clip bound, kept >= 0
  bool h_learnable = true;

  Eigen::Index dim() const { return W1.cols(); }
};

/// Fan-in-scaled uniform init (+-sqrt(6/fan_in)), zero biases, clip bound h0.
/// The output layer is scaled down by 100 so the raw value starts inside the
/// clip band (a fully saturated net has zero gradient everywhere).
PotentialNet make_potential_net(Eigen::Index dim, const std::vector<int>& widths,
                                Scalar h0, bool h_learnable, std::uint64_t seed);

/// Trainable parameters as one flat vector (h last when learnable).
Vector pack(const PotentialNet& net);
void unpack(PotentialNet& net, const Vector& flat);
Eigen::Index param_count(const PotentialNet& net);

/// Potential values, one per point; each in [-h, 0].
Vector forward(const PotentialNet& net, const PointCloud& points);

/// Analytic d(potential)/d(point), n x d; zero rows at clip-saturated points.
Matrix input_gradients(const PotentialNet& net, const PointCloud& points);

/// Smallest distance of any pre-activation from its ReLU kink and of |y|
/// from the clip bound; gradient checks avoid configurations where this is
/// tiny, since subgradients are one-sided there.
Scalar kink_margin(const PotentialNet& net, const PointCloud& points);

enum class DualMode { mass, distance };
enum class GpVariant { squared_max, one_sided };

struct LossBreakdown {
  Scalar objective = 0;      // data + h_term - gp: the quantity being ascended
  Scalar data_alpha = 0;     // sum_i a_i f(x_i)
  Scalar data_beta = 0;      // sum_j b_j f(t_j)
  Scalar h_term = 0;         // h * (m - m_beta), mass mode only
  Scalar gp = 0;             // penalty value
  Scalar max_grad_norm = 0;  // max over both sets of ||grad_x f||
  Scalar dual_estimate = 0;  // mass: data + h_term; distance: data - h * m_beta
};

/// Eq-style training objective for the mass-type discrepancy:
///   sum a f(x) - sum b f(t) + h (m - m_beta) - kappa * max(max ||grad f||^2, 1).
LossBreakdown loss_mass(const PotentialNet& net, const DiscreteMeasure& alpha,
                        const DiscreteMeasure& beta_t, Scalar m, Scalar kappa,
                        GpVariant variant = GpVariant::squared_max);

/// Distance-type objective (h fixed): sum a f(x) - sum b f(t) - GP.
/// The reported dual estimate additionally subtracts h * m_beta.
LossBreakdown loss_distance(const PotentialNet& net, const DiscreteMeasure& alpha,
                            const DiscreteMeasure& beta_t, Scalar kappa,
                            GpVariant variant = GpVariant::squared_max);

/// Loss plus analytic gradient w.r.t. the packed parameters. The penalty term
/// differentiates through the argmax point only; ReLU masks are treated as
/// locally constant (almost-everywhere derivative).
std::pair<LossBreakdown, Vector> loss_gradients(const PotentialNet& net,
                                                const DiscreteMeasure& alpha,
                                                const DiscreteMeasure& beta_t,
                                                DualMode mode, Scalar m, Scalar kappa,
                                                GpVariant variant = GpVariant::squared_max);

struct DualTrainConfig {
  DualMode mode = DualMode::mass;
  Scalar threshold = 0;  // m (mass) or h (distance)
  int steps = 3000;
  std::vector<int> widths = {64, 64, 64, 64};
  Scalar lr = 1e-4;
  Scalar kappa = 10;
  GpVariant gp = GpVariant::squared_max;
  Scalar h_init = -1;  // mass mode; < 0 picks half the mean nn spacing of alpha
  std::uint64_t seed = 0;
};

struct DualEstimate {
  PotentialNet net;
  Vector curve;          // per-step dual estimate (no penalty, no h-term constants)
  Scalar value = 0;      // estimate at the final parameters
  Scalar tail_mean = 0;  // mean over the last tenth of the curve
};

/// Trains the potential on two fixed measures by full-batch gradient ascent,
/// yielding the KR estimate of the chosen discrepancy.
DualEstimate train_dual(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                        const DualTrainConfig& config);

}  // namespace pwreg
