#include "pwreg/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "pwreg/coherence.hpp"
#include "pwreg/optimizer.hpp"
#include "pwreg/rng.hpp"
#include "pwreg/synth.hpp"

namespace pwreg {

namespace {

using Clock = std::chrono::steady_clock;

Scalar seconds_since(Clock::time_point start) {
  return std::chrono::duration<Scalar>(Clock::now() - start).count();
}

DiscreteMeasure subset_measure(const PointCloud& cloud, const Vector& mass,
                               const std::vector<int>& idx) {
  DiscreteMeasure sub;
  sub.cloud.pts.resize(static_cast<Eigen::Index>(idx.size()), cloud.dim());
  sub.mass.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t s = 0; s < idx.size(); ++s) {
    sub.cloud.pts.row(static_cast<Eigen::Index>(s)) = cloud.pts.row(idx[s]);
    sub.mass[static_cast<Eigen::Index>(s)] = mass[idx[s]];
  }
  // Rescale so the subsample carries the full set's total mass; keeps the
  // thresholds m and m_beta meaningful under subsampling.
  sub.mass *= mass.sum() / sub.mass.sum();
  return sub;
}

std::vector<int> full_index(Eigen::Index n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = int(i);
  return idx;
}

}  // namespace

void RegistrationConfig::validate() const {
  if (net_updates < 1) throw std::invalid_argument("net update frequency must be >= 1");
  if (outer_steps < 1) throw std::invalid_argument("outer step count must be >= 1");
  if (mode == DualMode::mass) {
    if (mass_threshold < 0) throw std::invalid_argument("mass threshold required");
  } else {
    if (distance_threshold <= 0)
      throw std::invalid_argument("distance threshold required");
  }
  if (lambda < 0) throw std::invalid_argument("coherence strength must be >= 0");
  if (rho <= 0) throw std::invalid_argument("kernel bandwidth must be positive");
  if (sigma <= 0) throw std::invalid_argument("kernel regularizer must be positive");
  if (landmarks < 1) throw std::invalid_argument("landmark count must be >= 1");
  if (kappa < 0) throw std::invalid_argument("penalty strength must be >= 0");
  if (widths.size() != 4) throw std::invalid_argument("expected four hidden widths");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("hidden widths must be positive");
  if (lr_net <= 0 || lr_theta <= 0)
    throw std::invalid_argument("learning rates must be positive");
  if (batch < 0) throw std::invalid_argument("batch size must be >= 0");
  if (refine_steps < 0) throw std::invalid_argument("refinement steps must be >= 0");
  if (checkpoint_stride < 0)
    throw std::invalid_argument("checkpoint stride must be >= 0");
}

Scalar RegistrationConfig::threshold() const {
  return mode == DualMode::mass ? mass_threshold : distance_threshold;
}

RegistrationRun register_sets(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                              const RegistrationConfig& config, const PointCloud* truth) {
  config.validate();
  alpha.cloud.validate();
  beta.cloud.validate();
  if (alpha.cloud.dim() != beta.cloud.dim()) {
    throw std::invalid_argument("dimension mismatch");
  }
  const Eigen::Index q = alpha.cloud.size();
  const Eigen::Index r = beta.cloud.size();
  const Eigen::Index d = alpha.cloud.dim();
  if (truth != nullptr && truth->size() != r) {
    throw std::invalid_argument("truth size mismatch");
  }

  RegistrationRun run;
  run.config = config;

  Scalar h0 = config.distance_threshold;
  if (config.mode == DualMode::mass) {
    if (config.h_init >= 0) {
      h0 = config.h_init;
    } else if (alpha.cloud.size() > 1) {
      h0 = 0.5 * mean_nn_distance(alpha.cloud);
    } else {
      h0 = 0.5 * (beta.cloud.pts.rowwise() - alpha.cloud.pts.row(0))
                     .rowwise()
                     .norm()
                     .mean();
    }
  }
  run.net = make_potential_net(d, config.widths, h0,
                               config.mode == DualMode::mass, config.seed);
  Vector w = pack(run.net);
  AdamConfig net_cfg;
  net_cfg.lr = config.lr_net;
  AdamState net_state;

  run.theta = identity_transform(r, d);
  Vector theta_flat = pack(run.theta);
  RmspropConfig theta_cfg;
  theta_cfg.lr = config.lr_theta;
  RmspropState theta_state;

  const int k = std::min<int>(config.landmarks, int(r));
  const NystromFactor factor =
      build_nystrom(beta.cloud, config.rho, k, config.seed + 0x9E3779B9ull);

  CounterRng batch_rng(config.seed + 0xB5297A4Dull);
  const bool sub_a = config.batch > 0 && config.batch < int(q);
  const bool sub_b = config.batch > 0 && config.batch < int(r);

  run.loss_curve.resize(config.outer_steps);
  run.h_term_curve.resize(config.outer_steps);
  if (truth != nullptr) {
    run.mse_curve.resize(config.outer_steps);
    run.initial_mse = mse(apply(run.theta, beta.cloud), *truth);
  }

  const Scalar m = config.mass_threshold;
  const int h_warmup = std::max(1, config.outer_steps / 10);
  const Scalar lr_h =
      config.lr_net / std::max(alpha.total_mass(), beta.total_mass());
  for (int step = 0; step < config.outer_steps; ++step) {
    const PointCloud beta_t = apply(run.theta, beta.cloud);

    const std::vector<int> idx_a =
        sub_a ? batch_rng.sample_without_replacement(int(q), config.batch)
              : full_index(q);
    const std::vector<int> idx_b =
        sub_b ? batch_rng.sample_without_replacement(int(r), config.batch)
              : full_index(r);
    const DiscreteMeasure alpha_s = subset_measure(alpha.cloud, alpha.mass, idx_a);
    const DiscreteMeasure beta_s = subset_measure(beta_t, beta.mass, idx_b);

    auto potential_start = Clock::now();
    LossBreakdown last{};
    for (int i = 0; i < config.net_updates; ++i) {
      auto [breakdown, grad] = loss_gradients(run.net, alpha_s, beta_s, config.mode, m,
                                              config.kappa, config.gp);
      last = breakdown;
      // The bound h moves by plain mass-normalized steps, not Adam, and only
      // after a warmup: its gradient is a saturation balance that needs a
      // discriminating potential first and shrinks to zero at the right
      // bound, while normalized steps would keep full amplitude and can walk
      // the bound onto the absorbing zero clip.
      Scalar h_step = 0;
      if (run.net.h_learnable) {
        if (step >= h_warmup) h_step = lr_h * grad(grad.size() - 1);
        grad(grad.size() - 1) = 0;
      }
      adam_step(net_state, net_cfg, w, grad, StepDirection::ascend);
      if (run.net.h_learnable) {
        w(w.size() - 1) = std::max<Scalar>(0, w(w.size() - 1) + h_step);
      }
      unpack(run.net, w);
    }
    run.seconds_potential += seconds_since(potential_start);
    run.loss_curve[step] = last.objective;
    run.h_term_curve[step] = last.h_term;

    auto transform_start = Clock::now();
    const Matrix grads_at_sub = input_gradients(run.net, beta_s.cloud);
    Matrix upstream = Matrix::Zero(r, d);
    for (std::size_t s = 0; s < idx_b.size(); ++s) {
      upstream.row(idx_b[s]) =
          -beta_s.mass[static_cast<Eigen::Index>(s)] * grads_at_sub.row(int(s));
    }
    TransformGrads tg = backprop_to_params(beta.cloud, upstream);
    tg.dV += coherence_gradient(run.theta.V, factor, config.sigma, config.lambda);
    const Vector theta_grad = pack(tg, config.transform);
    rmsprop_step(theta_state, theta_cfg, theta_flat, theta_grad, StepDirection::descend);

    if (!std::isfinite(last.objective) || !theta_flat.allFinite() || !w.allFinite()) {
      throw RegistrationAbort(
          "registration aborted: non-finite state at step " + std::to_string(step + 1),
          step + 1, run.theta);
    }
    unpack(run.theta, theta_flat);
    run.seconds_transform += seconds_since(transform_start);

    if (truth != nullptr) {
      run.mse_curve[step] = mse(apply(run.theta, beta.cloud), *truth);
    }
    if (config.checkpoint_stride > 0 && (step + 1) % config.checkpoint_stride == 0) {
      run.checkpoints.emplace_back(step + 1, run.theta);
    }
  }

  if (config.refine_steps > 0) {
    run.theta = refine_nearest(alpha, beta, run.theta, config, config.refine_steps);
  }
  return run;
}

TransformParams refine_nearest(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                               const TransformParams& theta,
                               const RegistrationConfig& config, int steps) {
  config.validate();
  if (steps < 0) throw std::invalid_argument("refinement steps must be >= 0");
  const Eigen::Index q = alpha.cloud.size();
  const Eigen::Index r = beta.cloud.size();
  const Eigen::Index d = alpha.cloud.dim();

  const int k = std::min<int>(config.landmarks, int(r));
  const NystromFactor factor =
      build_nystrom(beta.cloud, config.rho, k, config.seed + 0x9E3779B9ull);

  TransformParams out = theta;
  Vector flat = pack(out);
  RmspropConfig cfg;
  cfg.lr = config.lr_theta;
  RmspropState state;

  for (int step = 0; step < steps; ++step) {
    const PointCloud beta_t = apply(out, beta.cloud);
    // Nearest transformed source point for every reference point.
    std::vector<Eigen::Index> nearest(static_cast<std::size_t>(q));
    Vector dist(q);
    for (Eigen::Index i = 0; i < q; ++i) {
      Eigen::Index j;
      dist[i] = (beta_t.pts.rowwise() - alpha.cloud.pts.row(i)).rowwise().norm().minCoeff(&j);
      nearest[static_cast<std::size_t>(i)] = j;
    }
    // Gate: distance mode keeps pairs within h; mass mode keeps the m closest
    // reference points.
    std::vector<bool> keep(static_cast<std::size_t>(q), false);
    if (config.mode == DualMode::distance) {
      for (Eigen::Index i = 0; i < q; ++i)
        keep[static_cast<std::size_t>(i)] = dist[i] <= config.distance_threshold;
    } else {
      const Eigen::Index count =
          std::min<Eigen::Index>(q, Eigen::Index(config.mass_threshold + 1e-9));
      std::vector<Eigen::Index> order(static_cast<std::size_t>(q));
      for (Eigen::Index i = 0; i < q; ++i) order[static_cast<std::size_t>(i)] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return dist[a] < dist[b]; });
      for (Eigen::Index s = 0; s < count; ++s)
        keep[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])] = true;
    }
    Matrix upstream = Matrix::Zero(r, d);
    for (Eigen::Index i = 0; i < q; ++i) {
      if (!keep[static_cast<std::size_t>(i)]) continue;
      const Eigen::Index j = nearest[static_cast<std::size_t>(i)];
      upstream.row(j) += 2.0 * (beta_t.pts.row(j) - alpha.cloud.pts.row(i));
    }
    TransformGrads tg = backprop_to_params(beta.cloud, upstream);
    tg.dV += coherence_gradient(out.V, factor, config.sigma, config.lambda);
    const Vector grad = pack(tg, config.transform);
    rmsprop_step(state, cfg, flat, grad, StepDirection::descend);
    unpack(out, flat);
  }
  return out;
}

Scalar mse(const PointCloud& aligned, const PointCloud& truth) {
  if (aligned.size() != truth.size() || aligned.dim() != truth.dim()) {
    throw std::invalid_argument("size mismatch");
  }
  return (aligned.pts - truth.pts).rowwise().squaredNorm().mean();
}

}  // namespace pwreg
