#include "bridgecat/bridge.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace bridgecat;
using namespace bridgecat::testing;

namespace {

/// Pair with boundary-crossing free-atom displacements and two fixed atoms.
StructurePair toy_pair(std::uint64_t seed = 1, int n_atoms = 6) {
  Rng rng(seed);
  Lattice lattice = cubic_lattice(8.0);
  Structure relaxed = random_structure(rng, n_atoms, lattice);
  relaxed.fixed[0] = true;
  relaxed.fixed[1] = true;
  relaxed.adsorbate[0] = false;
  relaxed.adsorbate[1] = false;

  Structure initial = relaxed;
  for (Eigen::Index i = 0; i < relaxed.size(); ++i) {
    if (relaxed.fixed[static_cast<std::size_t>(i)]) continue;
    Vec3 step(0.6 * rng.normal(), 0.6 * rng.normal(), 0.3 * rng.normal());
    initial.positions.row(i) += step.transpose();
  }
  // Push one free atom across the periodic boundary.
  initial.positions(2, 0) += 7.5;
  initial = wrap_into_cell(initial);
  StructurePair pair;
  pair.initial = initial;
  pair.relaxed = relaxed;
  pair.validate();
  return pair;
}

Positions exact_mean_target(const StructurePair& pair, int t, const BridgeSchedule& schedule) {
  Positions zero_noise = Positions::Zero(pair.relaxed.size(), 3);
  return training_target(pair, t, zero_noise, schedule);
}

} // namespace

TEST_CASE("linear schedule hits the documented values") {
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, 0.1);
  CHECK(schedule.m[50] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(schedule.m.front() == 0.0);
  CHECK(schedule.m.back() == 1.0);
  CHECK(schedule.delta.front() == 0.0);
  CHECK(schedule.delta.back() == 0.0);
  // delta is maximized at m = 1/2 with value s/2.
  double max_delta = 0.0;
  for (double d : schedule.delta) max_delta = std::max(max_delta, d);
  CHECK(schedule.delta[50] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(max_delta == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("max_var knob ties s = 2 * max_var") {
  BridgeSchedule schedule = make_schedule_max_var(100, ScheduleMode::kLinear, 0.05);
  CHECK(schedule.s == doctest::Approx(0.1).epsilon(1e-15));
  double max_delta = 0.0;
  for (double d : schedule.delta) max_delta = std::max(max_delta, d);
  CHECK(max_delta == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("cosine schedule is monotone with pinned endpoints") {
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kCosine, 0.1);
  CHECK(schedule.m.front() == 0.0);
  CHECK(schedule.m.back() == 1.0);
  CHECK(schedule.m[50] == doctest::Approx(0.5).epsilon(1e-12));
  for (int t = 1; t <= 100; ++t) {
    CHECK(schedule.m[static_cast<std::size_t>(t)] >
          schedule.m[static_cast<std::size_t>(t - 1)]);
    CHECK(schedule.delta_cond[static_cast<std::size_t>(t)] >= 0.0);
  }
}

TEST_CASE("schedule rejects bad arguments") {
  CHECK_THROWS_AS(make_schedule(1, ScheduleMode::kLinear, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(100, ScheduleMode::kLinear, -0.1), std::invalid_argument);
}

TEST_CASE("forward_sample endpoints are exact") {
  StructurePair pair = toy_pair();
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, 0.1);
  Rng rng(5);

  ForwardSample at_zero = forward_sample(pair, 0, schedule, rng);
  Positions wrapped_x = pair.relaxed.lattice.wrap(pair.relaxed.positions);
  CHECK((at_zero.x_t - wrapped_x).cwiseAbs().maxCoeff() < 1e-12);

  ForwardSample at_T = forward_sample(pair, 100, schedule, rng);
  for (Eigen::Index i = 0; i < pair.initial.size(); ++i) {
    double d = pair.initial.lattice.mic_distance(at_T.x_t.row(i),
                                                 pair.initial.positions.row(i));
    CHECK(d < 1e-12);
  }
}

TEST_CASE("forward_sample never moves fixed atoms") {
  StructurePair pair = toy_pair();
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, 0.1);
  Rng rng(9);
  for (int t : {0, 17, 50, 93, 100}) {
    ForwardSample sample = forward_sample(pair, t, schedule, rng);
    for (Eigen::Index i = 0; i < pair.relaxed.size(); ++i) {
      if (!pair.relaxed.fixed[static_cast<std::size_t>(i)]) continue;
      CHECK((sample.x_t.row(i) - pair.relaxed.positions.row(i)).norm() == 0.0);
      CHECK(sample.noise.row(i).norm() == 0.0);
    }
  }
}

TEST_CASE("forward_sample marginals match the bridge law") {
  StructurePair pair = toy_pair(2, 4);
  const int t = 50;
  const int n_draws = 20000;
  for (double s : {0.02, 0.1}) {
    BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, s);
    const double delta_t = schedule.delta[t];
    Positions mean_target = exact_mean_target(pair, t, schedule);

    Rng rng(77);
    // Deviation from the analytic mean, taken through the minimum image
    // because one atom sits at the boundary.
    Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(pair.relaxed.size(), 3);
    Eigen::ArrayXXd sum_sq = Eigen::ArrayXXd::Zero(pair.relaxed.size(), 3);
    for (int k = 0; k < n_draws; ++k) {
      ForwardSample sample = forward_sample(pair, t, schedule, rng);
      for (Eigen::Index i = 0; i < pair.relaxed.size(); ++i) {
        Vec3 mean_pos = Vec3(pair.relaxed.positions.row(i)) + Vec3(mean_target.row(i));
        Vec3 dev = pair.relaxed.lattice.mic_displacement(mean_pos, Vec3(sample.x_t.row(i)));
        sum.row(i) += dev.transpose().array();
        sum_sq.row(i) += dev.transpose().array().square();
      }
    }
    for (Eigen::Index i = 0; i < pair.relaxed.size(); ++i) {
      if (pair.relaxed.fixed[static_cast<std::size_t>(i)]) continue;
      for (int c = 0; c < 3; ++c) {
        double mean = sum(i, c) / n_draws;
        double var = sum_sq(i, c) / n_draws - mean * mean;
        CHECK(std::abs(mean) < 4.0 * std::sqrt(delta_t / n_draws));
        CHECK(var == doctest::Approx(delta_t).epsilon(0.08));
      }
    }
  }
}

TEST_CASE("training_target limits") {
  StructurePair pair = toy_pair();
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, 0.1);
  const Eigen::Index n = pair.relaxed.size();

  Positions noise = Positions::Zero(n, 3);
  CHECK(training_target(pair, 0, noise, schedule).cwiseAbs().maxCoeff() == 0.0);

  Positions target_T = training_target(pair, 100, noise, schedule);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pair.relaxed.fixed[static_cast<std::size_t>(i)]) {
      CHECK(target_T.row(i).norm() == 0.0);
      continue;
    }
    Vec3 expected = pair.relaxed.lattice.mic_displacement(pair.relaxed.positions.row(i),
                                                          pair.initial.positions.row(i));
    CHECK((target_T.row(i).transpose() - expected).norm() < 1e-12);
  }

  // Identity pair: target reduces to the noise term.
  StructurePair same;
  same.initial = pair.relaxed;
  same.relaxed = pair.relaxed;
  Rng rng(3);
  Positions eps(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) eps(i, c) = rng.normal();
  }
  int t = 37;
  Positions target = training_target(same, t, eps, schedule);
  double sd = std::sqrt(schedule.delta[static_cast<std::size_t>(t)]);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (same.relaxed.fixed[static_cast<std::size_t>(i)]) continue;
    CHECK((target.row(i) - sd * eps.row(i)).norm() < 1e-12);
  }
}

TEST_CASE("reverse_step recovers x from exact mean-path predictions") {
  StructurePair pair = toy_pair(4);
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, 0.1);
  Rng rng(1);

  // Zero-noise path: x_T = y; exact targets all the way down must land on x.
  Positions x = pair.initial.lattice.wrap(pair.initial.positions);
  for (int t = 100; t > 0; --t) {
    Positions eps = exact_mean_target(pair, t, schedule);
    x = reverse_step(x, t, t - 1, eps, pair.initial, schedule, 0.0, rng);
  }
  for (Eigen::Index i = 0; i < pair.relaxed.size(); ++i) {
    CHECK(pair.relaxed.lattice.mic_distance(x.row(i), pair.relaxed.positions.row(i)) < 1e-8);
  }
}

TEST_CASE("reverse_step with t_to = 0 returns the denoised estimate exactly") {
  StructurePair pair = toy_pair(6);
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, 0.1);
  Rng noise_rng(8);
  ForwardSample sample = forward_sample(pair, 5, schedule, noise_rng);
  Positions eps = Positions::Constant(pair.relaxed.size(), 3, 0.01);
  for (Eigen::Index i = 0; i < pair.relaxed.size(); ++i) {
    if (pair.relaxed.fixed[static_cast<std::size_t>(i)]) eps.row(i).setZero();
  }
  Rng rng(2);
  Positions out = reverse_step(sample.x_t, 5, 0, eps, pair.initial, schedule, 0.7, rng);
  Positions estimate = sample.x_t - eps;
  Positions expected = pair.initial.lattice.wrap(estimate);
  for (Eigen::Index i = 0; i < pair.relaxed.size(); ++i) {
    if (pair.relaxed.fixed[static_cast<std::size_t>(i)]) continue;
    CHECK((out.row(i) - expected.row(i)).norm() < 1e-12);
  }
}

TEST_CASE("reverse_step validates timesteps") {
  StructurePair pair = toy_pair();
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, 0.1);
  Positions eps = Positions::Zero(pair.relaxed.size(), 3);
  Rng rng(0);
  CHECK_THROWS_AS(reverse_step(pair.initial.positions, 101, 50, eps, pair.initial, schedule,
                               0.0, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(reverse_step(pair.initial.positions, 10, 10, eps, pair.initial, schedule,
                               0.0, rng),
                  std::invalid_argument);
}

TEST_CASE("sampling timesteps: linear spacing spans T..0, full when steps = T") {
  SamplerConfig sampler;
  sampler.sample_steps = 20;
  std::vector<int> ts = sampling_timesteps(100, sampler);
  CHECK(ts.front() == 100);
  CHECK(ts.back() == 0);
  CHECK(ts.size() == 21);
  for (std::size_t k = 1; k < ts.size(); ++k) CHECK(ts[k] < ts[k - 1]);

  sampler.sample_steps = 100;
  ts = sampling_timesteps(100, sampler);
  CHECK(ts.size() == 101);
  for (int k = 0; k <= 100; ++k) CHECK(ts[static_cast<std::size_t>(k)] == 100 - k);

  sampler.sample_steps = 1;
  CHECK_THROWS_AS(sampling_timesteps(100, sampler), std::invalid_argument);
  sampler.sample_steps = 101;
  CHECK_THROWS_AS(sampling_timesteps(100, sampler), std::invalid_argument);

  sampler.sample_steps = 20;
  sampler.step_selection = StepSelection::kCosine;
  ts = sampling_timesteps(100, sampler);
  CHECK(ts.front() == 100);
  CHECK(ts.back() == 0);
  for (std::size_t k = 1; k < ts.size(); ++k) CHECK(ts[k] < ts[k - 1]);
}

TEST_CASE("generate with a zero denoiser returns the initial structure") {
  StructurePair pair = toy_pair(12);
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, 0.1);
  DenoiserFn zero = [](const Structure& s, const Positions&, int) {
    return Positions::Zero(s.size(), 3);
  };
  SamplerConfig sampler;
  sampler.sample_steps = 20;
  Structure out = generate(pair.initial, zero, schedule, sampler);
  Positions wrapped = pair.initial.lattice.wrap(pair.initial.positions);
  CHECK((out.positions - wrapped).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("eta = 0 generation is deterministic; eta > 0 is seed-reproducible") {
  StructurePair pair = toy_pair(23);
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, 0.1);
  DenoiserFn drift = [&](const Structure& s, const Positions& x_t, int t) {
    // Structure-dependent but deterministic stand-in denoiser.
    Positions eps = 0.01 * x_t;
    eps.col(2).setConstant(0.001 * t);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s.fixed[static_cast<std::size_t>(i)]) eps.row(i).setZero();
    }
    return eps;
  };

  SamplerConfig sampler;
  sampler.sample_steps = 10;
  Structure a = generate(pair.initial, drift, schedule, sampler);
  Structure b = generate(pair.initial, drift, schedule, sampler);
  CHECK((a.positions - b.positions).cwiseAbs().maxCoeff() == 0.0);

  sampler.eta = 1.0;
  sampler.seed = 42;
  Structure c = generate(pair.initial, drift, schedule, sampler);
  Structure d = generate(pair.initial, drift, schedule, sampler);
  CHECK((c.positions - d.positions).cwiseAbs().maxCoeff() == 0.0);
  sampler.seed = 43;
  Structure e = generate(pair.initial, drift, schedule, sampler);
  CHECK((c.positions - e.positions).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("lattice translation commutes with the forward process") {
  StructurePair pair = toy_pair(31);
  BridgeSchedule schedule = make_schedule(100, ScheduleMode::kLinear, 0.1);
  const Vec3 shift = pair.relaxed.lattice.to_cart(Vec3(1.0, -2.0, 0.0));

  StructurePair moved = pair;
  moved.initial.positions.rowwise() += shift.transpose();
  moved.relaxed.positions.rowwise() += shift.transpose();

  Rng rng_a(123), rng_b(123);
  ForwardSample base = forward_sample(pair, 40, schedule, rng_a);
  ForwardSample shifted = forward_sample(moved, 40, schedule, rng_b);
  for (Eigen::Index i = 0; i < pair.relaxed.size(); ++i) {
    if (pair.relaxed.fixed[static_cast<std::size_t>(i)]) continue;
    double d = pair.relaxed.lattice.mic_distance(base.x_t.row(i), shifted.x_t.row(i));
    CHECK(d < 1e-9);
  }
}
