#include "pwreg/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pwreg/optimizer.hpp"
#include "pwreg/rng.hpp"
#include "pwreg/synth.hpp"

namespace pwreg {
namespace {

using Array = Eigen::ArrayXd;
using ArrayXX = Eigen::ArrayXXd;

Matrix init_layer(CounterRng& rng, Eigen::Index rows, Eigen::Index cols) {
  Scalar bound = std::sqrt(6.0 / Scalar(cols));
  return rng.uniform_matrix(rows, cols, -bound, bound);
}

struct ForwardPass {
  Matrix xc;                  // d x n, points as columns
  Matrix a1, a2, a3, a4;      // pre-activations
  Matrix z1, z2, z3, z4;      // ReLU outputs
  ArrayXX m1, m2, m3, m4;     // ReLU masks (0/1)
  RowVector yraw;             // 1 x n
  Vector f;                   // clipped outputs
  Array lprime;               // df/dy: -sign(y) where unsaturated, else 0
  Array dfdh;                 // df/dh: -1 where saturated, else 0
};

ForwardPass run_forward(const PotentialNet& net, const Matrix& pts_rows) {
  if (pts_rows.cols() != net.dim())
    throw std::invalid_argument("potential: point dimension does not match net input");
  ForwardPass p;
  const Eigen::Index n = pts_rows.rows();
  p.xc = pts_rows.transpose();
  p.a1 = (net.W1 * p.xc).colwise() + net.b1;
  p.m1 = (p.a1.array() > 0).cast<Scalar>();
  p.z1 = p.a1.cwiseMax(0.0);
  p.a2 = (net.W2 * p.z1).colwise() + net.b2;
  p.m2 = (p.a2.array() > 0).cast<Scalar>();
  p.z2 = p.a2.cwiseMax(0.0);
  p.a3 = (net.W3 * p.z2).colwise() + net.b3;
  p.m3 = (p.a3.array() > 0).cast<Scalar>();
  p.z3 = p.a3.cwiseMax(0.0);
  Matrix u(p.z3.rows() + p.xc.rows(), n);
  u.topRows(p.z3.rows()) = p.z3;
  u.bottomRows(p.xc.rows()) = p.xc;
  p.a4 = (net.W4 * u).colwise() + net.b4;
  p.m4 = (p.a4.array() > 0).cast<Scalar>();
  p.z4 = p.a4.cwiseMax(0.0);
  p.yraw = (net.W5 * p.z4).array() + net.b5;

  p.f.resize(n);
  p.lprime.resize(n);
  p.dfdh.resize(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Scalar y = p.yraw(c);
    Scalar ay = std::abs(y);
    if (ay >= net.h) {  // clip-saturated: f = -h
      p.f(c) = -net.h;
      p.lprime(c) = 0;
      p.dfdh(c) = -1;
    } else {
      p.f(c) = -ay;
      p.lprime(c) = y > 0 ? -1 : (y < 0 ? 1 : 0);
      p.dfdh(c) = 0;
    }
  }
  return p;
}

/// Per-point gradients dy/dx scaled by lprime, as d x n columns; also the
/// unscaled chain matrix Q when requested by the penalty backward pass.
struct InputGradPass {
  Matrix s4, vu, s3, s2, s1;  // masked chain intermediates (batched)
  Matrix q;                   // d x n, dy/dx per column
  Array norm2;                // ||grad f||^2 per point (0 where saturated)
};

InputGradPass run_input_gradients(const PotentialNet& net, const ForwardPass& p) {
  InputGradPass g;
  const Eigen::Index w3 = p.z3.rows(), d = p.xc.rows();
  g.s4 = (p.m4.colwise() * net.W5.transpose().col(0).array()).matrix();
  g.vu = net.W4.transpose() * g.s4;
  g.s3 = (g.vu.topRows(w3).array() * p.m3).matrix();
  g.s2 = ((net.W3.transpose() * g.s3).array() * p.m2).matrix();
  g.s1 = ((net.W2.transpose() * g.s2).array() * p.m1).matrix();
  g.q = net.W1.transpose() * g.s1 + g.vu.bottomRows(d);
  g.norm2 = g.q.colwise().squaredNorm().transpose().array() * (p.lprime * p.lprime);
  return g;
}

struct GpInfo {
  Scalar value = 0;         // penalty value per variant
  Scalar max_norm = 0;      // max ||grad f|| over points
  Eigen::Index argmax = -1;
  Scalar grad_scale = 0;    // squared_max: d(penalty)/d(||q||^2) at the argmax
  Array col_scale;          // one_sided: d(penalty)/d(||q||^2) per point
};

GpInfo penalty(const InputGradPass& g, Scalar kappa, GpVariant variant) {
  GpInfo info;
  Scalar best = 0;
  for (Eigen::Index c = 0; c < g.norm2.size(); ++c)
    if (g.norm2(c) > best) {
      best = g.norm2(c);
      info.argmax = c;
    }
  info.max_norm = std::sqrt(best);
  if (variant == GpVariant::squared_max) {
    // Penalty on the squared maximum gradient norm, floored at one: only the
    // steepest point is ever pushed back.
    info.value = kappa * std::max(best, 1.0);
    info.grad_scale = best > 1.0 ? kappa : 0.0;
  } else {
    // Mean squared hinge of the per-point gradient norms above one: every
    // violating point is pushed back in proportion to its excess, so the
    // bulk cannot ride just under a dithering maximum.
    const Scalar inv_n = 1.0 / Scalar(g.norm2.size());
    info.col_scale = Array::Zero(g.norm2.size());
    Scalar total = 0;
    for (Eigen::Index c = 0; c < g.norm2.size(); ++c) {
      if (g.norm2(c) > 1.0) {
        const Scalar norm = std::sqrt(g.norm2(c));
        const Scalar excess = norm - 1.0;
        total += excess * excess;
        info.col_scale(c) = kappa * inv_n * (1.0 - 1.0 / norm);
      }
    }
    info.value = kappa * inv_n * total;
  }
  return info;
}

struct Shapes {
  Eigen::Index n1, n2, n3, n4, n5;  // parameter counts per layer (weights+bias)
};

Shapes shapes_of(const PotentialNet& net) {
  return {net.W1.size() + net.b1.size(), net.W2.size() + net.b2.size(),
          net.W3.size() + net.b3.size(), net.W4.size() + net.b4.size(),
          net.W5.size() + 1};
}

}  // namespace

PotentialNet make_potential_net(Eigen::Index dim, const std::vector<int>& widths,
                                Scalar h0, bool h_learnable, std::uint64_t seed) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("potential: dim must be 1..3");
  if (widths.size() != 4) throw std::invalid_argument("potential: need 4 hidden widths");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("potential: widths must be positive");
  if (h0 < 0) throw std::invalid_argument("potential: initial clip bound must be >= 0");
  CounterRng rng(seed);
  PotentialNet net;
  net.W1 = init_layer(rng, widths[0], dim);
  net.W2 = init_layer(rng, widths[1], widths[0]);
  net.W3 = init_layer(rng, widths[2], widths[1]);
  net.W4 = init_layer(rng, widths[3], widths[2] + dim);
  // The output layer starts two orders smaller than fan-in scale so the raw
  // value lies inside the clip band even for tiny bounds; a net born saturated
  // everywhere has identically zero gradients and never trains.
  net.W5 = 0.01 * init_layer(rng, 1, widths[3]);
  net.b1 = Vector::Zero(widths[0]);
  net.b2 = Vector::Zero(widths[1]);
  net.b3 = Vector::Zero(widths[2]);
  net.b4 = Vector::Zero(widths[3]);
  net.b5 = 0;
  net.h = h0;
  net.h_learnable = h_learnable;
  return net;
}

Eigen::Index param_count(const PotentialNet& net) {
  Shapes s = shapes_of(net);
  return s.n1 + s.n2 + s.n3 + s.n4 + s.n5 + (net.h_learnable ? 1 : 0);
}

Vector pack(const PotentialNet& net) {
  Vector flat(param_count(net));
  Eigen::Index at = 0;
  auto put_mat = [&](const Matrix& m) {
    flat.segment(at, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    at += m.size();
  };
  auto put_vec = [&](const Vector& v) {
    flat.segment(at, v.size()) = v;
    at += v.size();
  };
  put_mat(net.W1); put_vec(net.b1);
  put_mat(net.W2); put_vec(net.b2);
  put_mat(net.W3); put_vec(net.b3);
  put_mat(net.W4); put_vec(net.b4);
  put_mat(net.W5); flat(at++) = net.b5;
  if (net.h_learnable) flat(at++) = net.h;
  return flat;
}

void unpack(PotentialNet& net, const Vector& flat) {
  if (flat.size() != param_count(net))
    throw std::invalid_argument("potential: packed parameter size mismatch");
  Eigen::Index at = 0;
  auto get_mat = [&](Matrix& m) {
    Eigen::Map<Vector>(m.data(), m.size()) = flat.segment(at, m.size());
    at += m.size();
  };
  auto get_vec = [&](Vector& v) {
    v = flat.segment(at, v.size());
    at += v.size();
  };
  get_mat(net.W1); get_vec(net.b1);
  get_mat(net.W2); get_vec(net.b2);
  get_mat(net.W3); get_vec(net.b3);
  get_mat(net.W4); get_vec(net.b4);
  get_mat(net.W5); net.b5 = flat(at++);
  if (net.h_learnable) net.h = std::max(flat(at++), 0.0);
}

Vector forward(const PotentialNet& net, const PointCloud& points) {
  return run_forward(net, points.pts).f;
}

Matrix input_gradients(const PotentialNet& net, const PointCloud& points) {
  ForwardPass p = run_forward(net, points.pts);
  InputGradPass g = run_input_gradients(net, p);
  return (g.q.array().rowwise() * p.lprime.transpose()).matrix().transpose();
}

Scalar kink_margin(const PotentialNet& net, const PointCloud& points) {
  ForwardPass p = run_forward(net, points.pts);
  Scalar m = std::numeric_limits<Scalar>::infinity();
  m = std::min(m, p.a1.array().abs().minCoeff());
  m = std::min(m, p.a2.array().abs().minCoeff());
  m = std::min(m, p.a3.array().abs().minCoeff());
  m = std::min(m, p.a4.array().abs().minCoeff());
  m = std::min(m, (p.yraw.array().abs() - net.h).abs().minCoeff());
  m = std::min(m, p.yraw.array().abs().minCoeff());  // |y| = 0 is the other kink
  return m;
}

namespace {

struct LossContext {
  Matrix union_pts;  // (q+r) x d
  Array coeff;       // +a_i then -b_j
  Eigen::Index n_alpha = 0;
  Scalar m_beta = 0;
};

LossContext build_context(const DiscreteMeasure& alpha, const DiscreteMeasure& beta_t) {
  if (alpha.cloud.dim() != beta_t.cloud.dim())
    throw std::invalid_argument("potential loss: measure dimensions differ");
  LossContext ctx;
  const Eigen::Index q = alpha.cloud.size(), r = beta_t.cloud.size();
  ctx.n_alpha = q;
  ctx.union_pts.resize(q + r, alpha.cloud.dim());
  ctx.union_pts.topRows(q) = alpha.cloud.pts;
  ctx.union_pts.bottomRows(r) = beta_t.cloud.pts;
  ctx.coeff.resize(q + r);
  ctx.coeff.head(q) = alpha.mass.array();
  ctx.coeff.tail(r) = -beta_t.mass.array();
  ctx.m_beta = beta_t.total_mass();
  return ctx;
}

LossBreakdown assemble(const PotentialNet& net, const LossContext& ctx,
                       const ForwardPass& p, const GpInfo& gp, DualMode mode, Scalar m) {
  LossBreakdown out;
  Array prod = ctx.coeff * p.f.array();
  out.data_alpha = prod.head(ctx.n_alpha).sum();
  out.data_beta = -prod.tail(ctx.coeff.size() - ctx.n_alpha).sum();
  Scalar data = out.data_alpha - out.data_beta;
  out.gp = gp.value;
  out.max_grad_norm = gp.max_norm;
  if (mode == DualMode::mass) {
    out.h_term = net.h * (m - ctx.m_beta);
    out.dual_estimate = data + out.h_term;
  } else {
    out.h_term = 0;
    out.dual_estimate = data - net.h * ctx.m_beta;
  }
  out.objective = data + out.h_term - out.gp;
  return out;
}

void check_mode(const PotentialNet& net, const DiscreteMeasure& alpha,
                const DiscreteMeasure& beta_t, DualMode mode, Scalar m) {
  if (mode == DualMode::mass) {
    Scalar cap = std::min(alpha.total_mass(), beta_t.total_mass());
    if (m < 0 || m > cap + 1e-9)
      throw std::invalid_argument("loss_mass: m must lie in [0, min(m_alpha, m_beta)]");
  } else if (net.h_learnable) {
    throw std::invalid_argument("loss_distance: requires a net with fixed h");
  }
}

}  // namespace

LossBreakdown loss_mass(const PotentialNet& net, const DiscreteMeasure& alpha,
                        const DiscreteMeasure& beta_t, Scalar m, Scalar kappa,
                        GpVariant variant) {
  check_mode(net, alpha, beta_t, DualMode::mass, m);
  LossContext ctx = build_context(alpha, beta_t);
  ForwardPass p = run_forward(net, ctx.union_pts);
  InputGradPass g = run_input_gradients(net, p);
  return assemble(net, ctx, p, penalty(g, kappa, variant), DualMode::mass, m);
}

LossBreakdown loss_distance(const PotentialNet& net, const DiscreteMeasure& alpha,
                            const DiscreteMeasure& beta_t, Scalar kappa,
                            GpVariant variant) {
  check_mode(net, alpha, beta_t, DualMode::distance, 0);
  LossContext ctx = build_context(alpha, beta_t);
  ForwardPass p = run_forward(net, ctx.union_pts);
  InputGradPass g = run_input_gradients(net, p);
  return assemble(net, ctx, p, penalty(g, kappa, variant), DualMode::distance, 0);
}

std::pair<LossBreakdown, Vector> loss_gradients(const PotentialNet& net,
                                                const DiscreteMeasure& alpha,
                                                const DiscreteMeasure& beta_t,
                                                DualMode mode, Scalar m, Scalar kappa,
                                                GpVariant variant) {
  check_mode(net, alpha, beta_t, mode, m);
  LossContext ctx = build_context(alpha, beta_t);
  ForwardPass p = run_forward(net, ctx.union_pts);
  InputGradPass g = run_input_gradients(net, p);
  GpInfo gp = penalty(g, kappa, variant);
  LossBreakdown loss = assemble(net, ctx, p, gp, mode, m);

  const Eigen::Index d = p.xc.rows(), w3 = p.z3.rows();
  PotentialNet grads = net;  // reuse shapes
  // Data term: adjoint on raw outputs is coeff * lprime per point.
  RowVector sadj = (ctx.coeff * p.lprime).matrix().transpose();
  Matrix u(w3 + d, p.xc.cols());
  u.topRows(w3) = p.z3;
  u.bottomRows(d) = p.xc;

  grads.W5 = sadj * p.z4.transpose();
  grads.b5 = sadj.sum();
  Matrix g4 = ((net.W5.transpose() * sadj).array() * p.m4).matrix();
  grads.W4 = g4 * u.transpose();
  grads.b4 = g4.rowwise().sum();
  Matrix gu = net.W4.transpose() * g4;
  Matrix g3 = (gu.topRows(w3).array() * p.m3).matrix();
  grads.W3 = g3 * p.z2.transpose();
  grads.b3 = g3.rowwise().sum();
  Matrix g2 = ((net.W3.transpose() * g3).array() * p.m2).matrix();
  grads.W2 = g2 * p.z1.transpose();
  grads.b2 = g2.rowwise().sum();
  Matrix g1 = ((net.W2.transpose() * g2).array() * p.m1).matrix();
  grads.W1 = g1 * p.xc.transpose();
  grads.b1 = g1.rowwise().sum();
  grads.h = (ctx.coeff * p.dfdh).sum() +
            (mode == DualMode::mass ? (m - ctx.m_beta) : 0.0);

  // Penalty term, ReLU masks frozen.  squared_max differentiates at the
  // argmax point only; one_sided batches the same second-order chain over
  // every violating point.
  if (variant == GpVariant::squared_max) {
    if (gp.grad_scale != 0 && gp.argmax >= 0 && p.lprime(gp.argmax) != 0) {
      const Eigen::Index c = gp.argmax;
      Vector m1 = p.m1.col(c).matrix(), m2 = p.m2.col(c).matrix(),
             m3 = p.m3.col(c).matrix(), m4 = p.m4.col(c).matrix();
      Vector s4 = g.s4.col(c), s3 = g.s3.col(c), s2 = g.s2.col(c), s1 = g.s1.col(c);
      Vector q = g.q.col(c);
      // objective subtracts the penalty
      Vector qbar = (-gp.grad_scale) * 2.0 * q;
      grads.W1 += s1 * qbar.transpose();
      Vector s1bar = net.W1 * qbar;
      Vector v2bar = m1.asDiagonal() * s1bar;
      grads.W2 += s2 * v2bar.transpose();
      Vector s2bar = net.W2 * v2bar;
      Vector v3bar = m2.asDiagonal() * s2bar;
      grads.W3 += s3 * v3bar.transpose();
      Vector s3bar = net.W3 * v3bar;
      Vector t3bar = m3.asDiagonal() * s3bar;
      Vector vubar(w3 + d);
      vubar.head(w3) = t3bar;
      vubar.tail(d) = qbar;
      grads.W4 += s4 * vubar.transpose();
      Vector s4bar = net.W4 * vubar;
      grads.W5 += (m4.asDiagonal() * s4bar).transpose();
    }
  } else if (gp.col_scale.size() > 0 && (gp.col_scale != 0).any()) {
    // objective subtracts the penalty; saturated points carry no norm
    RowVector wts =
        (-2.0 * gp.col_scale * (p.lprime * p.lprime)).matrix().transpose();
    Matrix qbar = g.q.array().rowwise() * wts.array();
    grads.W1 += g.s1 * qbar.transpose();
    Matrix s1bar = net.W1 * qbar;
    Matrix v2bar = (s1bar.array() * p.m1).matrix();
    grads.W2 += g.s2 * v2bar.transpose();
    Matrix s2bar = net.W2 * v2bar;
    Matrix v3bar = (s2bar.array() * p.m2).matrix();
    grads.W3 += g.s3 * v3bar.transpose();
    Matrix s3bar = net.W3 * v3bar;
    Matrix t3bar = (s3bar.array() * p.m3).matrix();
    Matrix vubar(w3 + d, qbar.cols());
    vubar.topRows(w3) = t3bar;
    vubar.bottomRows(d) = qbar;
    grads.W4 += g.s4 * vubar.transpose();
    Matrix s4bar = net.W4 * vubar;
    grads.W5 += (s4bar.array() * p.m4).matrix().rowwise().sum().transpose();
  }

  return {loss, pack(grads)};
}

DualEstimate train_dual(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                        const DualTrainConfig& config) {
  alpha.cloud.validate();
  beta.cloud.validate();
  if (alpha.cloud.dim() != beta.cloud.dim()) {
    throw std::invalid_argument("dimension mismatch");
  }
  if (config.steps < 1) throw std::invalid_argument("step count must be >= 1");
  if (config.mode == DualMode::distance && !(config.threshold > 0)) {
    throw std::invalid_argument("distance threshold required");
  }
  if (config.mode == DualMode::mass && config.threshold < 0) {
    throw std::invalid_argument("mass threshold required");
  }

  const bool learn_h = config.mode == DualMode::mass;
  Scalar h0 = config.threshold;
  if (learn_h) {
    if (config.h_init >= 0) {
      h0 = config.h_init;
    } else if (alpha.cloud.size() > 1) {
      h0 = 0.5 * mean_nn_distance(alpha.cloud);
    } else {
      // single-point reference has no neighbor spacing; use the mean cross
      // distance instead
      h0 = 0.5 * (beta.cloud.pts.rowwise() - alpha.cloud.pts.row(0))
                     .rowwise()
                     .norm()
                     .mean();
    }
  }
  DualEstimate est;
  est.net = make_potential_net(alpha.cloud.dim(), config.widths, h0, learn_h,
                               config.seed);
  Vector w = pack(est.net);
  AdamConfig opt_cfg;
  opt_cfg.lr = config.lr;
  AdamState opt_state;

  // The bound h gets two special treatments.  First, a warmup: until the net
  // can tell the two clouds apart the bound gradient is dominated by the
  // constant m - m_beta term, and released immediately it drags the bound to
  // the zero clip where every gradient vanishes.  Second, plain proportional
  // steps instead of Adam: the bound gradient is a mass balance that shrinks
  // to zero at the right bound, so scaling it by the total mass gives steps
  // that self-anneal, while Adam's normalized steps keep full amplitude and
  // random-walk the bound into the absorbing zero clip.
  const int h_warmup = learn_h ? std::max(200, config.steps / 10) : 0;
  const Scalar lr_h =
      learn_h ? config.lr / std::max(alpha.total_mass(), beta.total_mass()) : 0;
  est.curve.resize(config.steps);
  for (int step = 0; step < config.steps; ++step) {
    auto [breakdown, grad] = loss_gradients(est.net, alpha, beta, config.mode,
                                            config.threshold, config.kappa, config.gp);
    if (!std::isfinite(breakdown.objective)) {
      throw NumericalAbort("dual training: non-finite objective at step " +
                               std::to_string(step + 1),
                           step + 1);
    }
    est.curve[step] = breakdown.dual_estimate;
    // The ascent is full batch, so the only tail noise is the optimizer's own
    // step amplitude; dropping the rate for the final fifth settles the
    // estimate that tail_mean averages.
    const Scalar decay = step >= 4 * (config.steps / 5) ? 0.1 : 1.0;
    opt_cfg.lr = config.lr * decay;
    Scalar h_step = 0;
    if (learn_h) {
      if (step >= h_warmup) h_step = decay * lr_h * grad(grad.size() - 1);
      grad(grad.size() - 1) = 0;
    }
    adam_step(opt_state, opt_cfg, w, grad, StepDirection::ascend);
    if (learn_h) {
      w(w.size() - 1) = std::max<Scalar>(0, w(w.size() - 1) + h_step);
    }
    unpack(est.net, w);
  }
  const LossBreakdown final_eval =
      config.mode == DualMode::mass
          ? loss_mass(est.net, alpha, beta, config.threshold, config.kappa, config.gp)
          : loss_distance(est.net, alpha, beta, config.kappa, config.gp);
  est.value = final_eval.dual_estimate;
  est.tail_mean = est.curve.tail(std::max<Eigen::Index>(1, config.steps / 10)).mean();
  return est;
}

}  // namespace pwreg
