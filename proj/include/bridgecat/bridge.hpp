#pragma once

#include "bridgecat/geometry.hpp"
#include "bridgecat/random.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bridgecat {

enum class ScheduleMode { kLinear, kCosine };

ScheduleMode schedule_mode_from_string(const std::string& name);
std::string to_string(ScheduleMode mode);

/// Discretized Brownian-bridge noise schedule.
///
/// m_0 = 0, m_T = 1 and delta_t = 2 s (m_t - m_t^2), so the process is pinned
/// at both endpoints. delta_cond[t] is the conditional variance of step
/// t-1 -> t, delta_t - delta_{t-1} ((1-m_t)/(1-m_{t-1}))^2, clipped at zero.
struct BridgeSchedule {
  int T = 0;
  ScheduleMode mode = ScheduleMode::kLinear;
  double s = 0.0;                  // noise scale; max_t delta_t = s / 2
  std::vector<double> m;           // T+1 entries
  std::vector<double> delta;       // T+1 entries, Angstrom^2
  std::vector<double> delta_cond;  // T+1 entries; delta_cond[0] = 0

  /// Conditional variance of a skip step t_to -> t_from (t_to < t_from).
  double conditional_variance(int t_from, int t_to) const;
};

BridgeSchedule make_schedule(int T, ScheduleMode mode, double s);

/// Schedule from the `max_var` knob: s = 2 * max_var.
BridgeSchedule make_schedule_max_var(int T, ScheduleMode mode, double max_var);

enum class StepSelection { kLinear, kCosine };

StepSelection step_selection_from_string(const std::string& name);
std::string to_string(StepSelection selection);

struct SamplerConfig {
  int sample_steps = 20;
  double eta = 0.0; // 0 => deterministic ODE sampling
  StepSelection step_selection = StepSelection::kLinear;
  std::uint64_t seed = 0;
};

/// Decreasing timestep sequence from T to 0 with sample_steps transitions.
std::vector<int> sampling_timesteps(int T, const SamplerConfig& sampler);

struct ForwardSample {
  Positions x_t;    // wrapped
  Positions noise;  // standard-normal draws; zero rows for fixed atoms
};

/// Draws x_t = x + m_t * mic(y - x) + sqrt(delta_t) * eps on free atoms;
/// fixed atoms are copied unchanged and the result is wrapped.
ForwardSample forward_sample(const StructurePair& pair, int t,
                             const BridgeSchedule& schedule, Rng& rng);

/// The regression target m_t * mic(y - x) + sqrt(delta_t) * noise; zero on
/// fixed atoms. `noise` must be the draw used by forward_sample.
Positions training_target(const StructurePair& pair, int t, const Positions& noise,
                          const BridgeSchedule& schedule);

/// One reverse transition t_from -> t_to. eps_pred estimates the training
/// target at t_from; `initial` supplies the bridge endpoint y. Noise scale
/// sigma = eta * sqrt(delta_cond(t_from|t_to) * delta_{t_to} / delta_{t_from}).
Positions reverse_step(const Positions& x_t, int t_from, int t_to,
                       const Positions& eps_pred, const Structure& initial,
                       const BridgeSchedule& schedule, double eta, Rng& rng);

/// Denoiser callable: (structure, wrapped x_t, t) -> N x 3 eps prediction.
using DenoiserFn =
    std::function<Positions(const Structure&, const Positions&, int)>;

/// Full reverse trajectory from x_T = y down to t = 0.
Structure generate(const Structure& initial, const DenoiserFn& denoiser,
                   const BridgeSchedule& schedule, const SamplerConfig& sampler);

} // namespace bridgecat
