#include "bridgecat/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bridgecat {

ScheduleMode schedule_mode_from_string(const std::string& name) {
  if (name == "linear") return ScheduleMode::kLinear;
  if (name == "cosine") return ScheduleMode::kCosine;
  throw std::invalid_argument("unknown schedule mode: " + name);
}

std::string to_string(ScheduleMode mode) {
  return mode == ScheduleMode::kLinear ? "linear" : "cosine";
}

StepSelection step_selection_from_string(const std::string& name) {
  if (name == "linear") return StepSelection::kLinear;
  if (name == "cosine") return StepSelection::kCosine;
  throw std::invalid_argument("unknown step selection: " + name);
}

std::string to_string(StepSelection selection) {
  return selection == StepSelection::kLinear ? "linear" : "cosine";
}

double BridgeSchedule::conditional_variance(int t_from, int t_to) const {
  if (t_to < 0 || t_from > T || t_to >= t_from) {
    throw std::invalid_argument("conditional_variance requires 0 <= t_to < t_from <= T");
  }
  double denom = 1.0 - m[static_cast<std::size_t>(t_to)];
  if (denom <= 0.0) return 0.0;
  double ratio = (1.0 - m[static_cast<std::size_t>(t_from)]) / denom;
  double var = delta[static_cast<std::size_t>(t_from)] -
               delta[static_cast<std::size_t>(t_to)] * ratio * ratio;
  return std::max(var, 0.0);
}

BridgeSchedule make_schedule(int T, ScheduleMode mode, double s) {
  if (T < 2) throw std::invalid_argument("schedule requires T >= 2");
  if (s < 0.0) throw std::invalid_argument("noise scale s must be nonnegative");

  BridgeSchedule schedule;
  schedule.T = T;
  schedule.mode = mode;
  schedule.s = s;
  schedule.m.resize(static_cast<std::size_t>(T) + 1);
  schedule.delta.resize(static_cast<std::size_t>(T) + 1);
  schedule.delta_cond.assign(static_cast<std::size_t>(T) + 1, 0.0);

  for (int t = 0; t <= T; ++t) {
    double u = static_cast<double>(t) / static_cast<double>(T);
    double mt = (mode == ScheduleMode::kLinear) ? u : 0.5 * (1.0 - std::cos(M_PI * u));
    schedule.m[static_cast<std::size_t>(t)] = mt;
    schedule.delta[static_cast<std::size_t>(t)] = 2.0 * s * (mt - mt * mt);
  }
  schedule.m.front() = 0.0;
  schedule.m.back() = 1.0;
  schedule.delta.front() = 0.0;
  schedule.delta.back() = 0.0;
  for (int t = 1; t <= T; ++t) {
    schedule.delta_cond[static_cast<std::size_t>(t)] = schedule.conditional_variance(t, t - 1);
  }
  return schedule;
}

BridgeSchedule make_schedule_max_var(int T, ScheduleMode mode, double max_var) {
  return make_schedule(T, mode, 2.0 * max_var);
}

std::vector<int> sampling_timesteps(int T, const SamplerConfig& sampler) {
  const int steps = sampler.sample_steps;
  if (steps < 2) throw std::invalid_argument("sample_steps must be >= 2");
  if (steps > T) throw std::invalid_argument("sample_steps must not exceed T");
  std::vector<int> ts;
  ts.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = steps; k >= 0; --k) {
    double frac = static_cast<double>(k) / static_cast<double>(steps);
    double value = (sampler.step_selection == StepSelection::kLinear)
                       ? frac
                       : std::sin(0.5 * M_PI * frac);
    int t = static_cast<int>(std::llround(static_cast<double>(T) * value));
    if (ts.empty() || ts.back() != t) ts.push_back(t);
  }
  if (ts.front() != T || ts.back() != 0) {
    throw std::logic_error("timestep selection must span T..0");
  }
  return ts;
}

namespace {

void check_step(int t, int T) {
  if (t < 0 || t > T) {
    throw std::invalid_argument("timestep outside [0, T]");
  }
}

} // namespace

ForwardSample forward_sample(const StructurePair& pair, int t,
                             const BridgeSchedule& schedule, Rng& rng) {
  check_step(t, schedule.T);
  const Structure& relaxed = pair.relaxed;
  const Structure& initial = pair.initial;
  const Eigen::Index n = relaxed.size();
  const double mt = schedule.m[static_cast<std::size_t>(t)];
  const double sd = std::sqrt(schedule.delta[static_cast<std::size_t>(t)]);

  ForwardSample out;
  out.x_t.resize(n, 3);
  out.noise = Positions::Zero(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (relaxed.fixed[static_cast<std::size_t>(i)]) {
      out.x_t.row(i) = relaxed.positions.row(i);
      continue;
    }
    Vec3 bridge_disp = relaxed.lattice.mic_displacement(relaxed.positions.row(i),
                                                        initial.positions.row(i));
    Vec3 eps(rng.normal(), rng.normal(), rng.normal());
    out.noise.row(i) = eps.transpose();
    out.x_t.row(i) = relaxed.positions.row(i) + mt * bridge_disp.transpose() +
                     sd * eps.transpose();
  }
  out.x_t = relaxed.lattice.wrap(out.x_t);
  return out;
}

Positions training_target(const StructurePair& pair, int t, const Positions& noise,
                          const BridgeSchedule& schedule) {
  check_step(t, schedule.T);
  const Structure& relaxed = pair.relaxed;
  const Eigen::Index n = relaxed.size();
  if (noise.rows() != n) throw std::invalid_argument("noise shape mismatch");
  const double mt = schedule.m[static_cast<std::size_t>(t)];
  const double sd = std::sqrt(schedule.delta[static_cast<std::size_t>(t)]);

  Positions target = Positions::Zero(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (relaxed.fixed[static_cast<std::size_t>(i)]) continue;
    Vec3 bridge_disp = relaxed.lattice.mic_displacement(relaxed.positions.row(i),
                                                        pair.initial.positions.row(i));
    target.row(i) = mt * bridge_disp.transpose() + sd * noise.row(i);
  }
  return target;
}

Positions reverse_step(const Positions& x_t, int t_from, int t_to,
                       const Positions& eps_pred, const Structure& initial,
                       const BridgeSchedule& schedule, double eta, Rng& rng) {
  check_step(t_from, schedule.T);
  check_step(t_to, schedule.T);
  if (t_to >= t_from) throw std::invalid_argument("reverse_step requires t_to < t_from");
  const Eigen::Index n = initial.size();
  if (x_t.rows() != n || eps_pred.rows() != n) {
    throw std::invalid_argument("reverse_step shape mismatch");
  }
  const auto& lattice = initial.lattice;
  const double m_from = schedule.m[static_cast<std::size_t>(t_from)];
  const double m_to = schedule.m[static_cast<std::size_t>(t_to)];
  const double delta_from = schedule.delta[static_cast<std::size_t>(t_from)];
  const double delta_to = schedule.delta[static_cast<std::size_t>(t_to)];

  double sigma = 0.0;
  if (eta > 0.0 && delta_from > 0.0) {
    double cond = schedule.conditional_variance(t_from, t_to);
    sigma = eta * std::sqrt(cond * delta_to / delta_from);
  }
  double residual_coeff = 0.0;
  if (delta_from > 0.0) {
    residual_coeff = std::sqrt(std::max(delta_to - sigma * sigma, 0.0) / delta_from);
  }

  Positions out(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (initial.fixed[static_cast<std::size_t>(i)]) {
      out.row(i) = x_t.row(i);
      continue;
    }
    Vec3 x_hat = Vec3(x_t.row(i)) - Vec3(eps_pred.row(i));
    Vec3 endpoint_disp = lattice.mic_displacement(x_hat, initial.positions.row(i));
    Vec3 mean_from = x_hat + m_from * endpoint_disp;
    Vec3 residual = lattice.mic_displacement(mean_from, x_t.row(i));
    Vec3 mu = x_hat + m_to * endpoint_disp + residual_coeff * residual;
    if (sigma > 0.0) {
      mu += sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
    }
    out.row(i) = mu.transpose();
  }
  return lattice.wrap(out);
}

Structure generate(const Structure& initial, const DenoiserFn& denoiser,
                   const BridgeSchedule& schedule, const SamplerConfig& sampler) {
  Structure wrapped = wrap_into_cell(initial);
  std::vector<int> timesteps = sampling_timesteps(schedule.T, sampler);
  Rng rng(sampler.seed);

  Positions x = wrapped.positions;
  for (std::size_t k = 0; k + 1 < timesteps.size(); ++k) {
    const int t_from = timesteps[k];
    const int t_to = timesteps[k + 1];
    Positions eps = denoiser(wrapped, x, t_from);
    x = reverse_step(x, t_from, t_to, eps, wrapped, schedule, sampler.eta, rng);
  }

  Structure out = wrapped;
  out.positions = x;
  return out;
}

} // namespace bridgecat
