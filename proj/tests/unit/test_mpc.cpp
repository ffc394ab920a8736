#include <doctest.h>

#include <cmath>
#include <random>

#include <dropf/mpc.hpp>

#include "test_cases.hpp"

using namespace dropf;

namespace {

// single-bus toy: generator, battery with SOC band, same-step wind errors.
// battery state: x1 = bus injection (-u), x2 = state of charge.
// soc_quad > 0 adds a holding cost 0.5*soc_quad*(SOC - soc_ref)^2 per step;
// the band rows alone cannot pin the SOC because their tail terms cancel.
NetworkCase battery_toy(int T, double soc_lo, double soc_hi, double soc0,
                        double anchor, double battery_quad = 0.05,
                        double soc_quad = 0.0, double soc_ref = 1.0) {
  NetworkCase net;
  net.buses = {1};
  net.slack = 1;
  net.T = T;
  net.n_xi = 1;
  net.same_step_recourse = true;
  net.devices.push_back(testsupport::memoryless_gen("gen", 1, T, 1.0));

  ControllableDevice bat;
  bat.id = "bat";
  bat.bus = 1;
  bat.n = 2;
  bat.m = 1;
  bat.A_step = Matrix::Zero(2, 2);
  bat.A_step(1, 1) = 1.0;
  bat.B_step = Matrix(2, 1);
  bat.B_step << -1.0, 1.0;  // charging withdraws power and raises the SOC
  bat.x0 = Vector(2);
  bat.x0 << 0.0, soc0;
  bat.cost.f_x = Vector::Zero(2 * T);
  bat.cost.H_x = Matrix::Zero(2 * T, 2 * T);
  for (int t = 0; t < T; ++t) {
    bat.cost.H_x(2 * t + 1, 2 * t + 1) = soc_quad;
    bat.cost.f_x(2 * t + 1) = -soc_quad * soc_ref;
  }
  bat.cost.f_u = Vector::Zero(T);
  bat.cost.H_u = battery_quad * Matrix::Identity(T, T);
  bat.local.T_loc = Matrix::Zero(2 * T, 2 * T);
  bat.local.U_loc = Matrix::Zero(2 * T, T);
  bat.local.Z_loc = Matrix::Zero(2 * T, T);
  bat.local.w = Vector(2 * T);
  for (int t = 0; t < T; ++t) {
    bat.local.T_loc(t, 2 * t + 1) = 1.0;  // SOC <= hi
    bat.local.w(t) = soc_hi;
    bat.local.T_loc(T + t, 2 * t + 1) = -1.0;  // SOC >= lo
    bat.local.w(T + t) = -soc_lo;
  }
  net.devices.push_back(bat);
  net.injections.push_back(testsupport::wind("wind", 1, T, 1, anchor));
  return net;
}

// training rows constant across the window: every step sees the same error
Matrix window_constant_samples(std::mt19937_64& rng, int count, int T, double scale) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  Matrix samples(count, T);
  for (int i = 0; i < count; ++i) samples.row(i).setConstant(unif(rng));
  return samples;
}

}  // namespace

TEST_CASE("the initial state mirrors device x0 and nominal injections") {
  NetworkCase net = testsupport::two_gen_wind(0.6, 1.3, 2, true);
  MpcState state = initial_state(net);
  REQUIRE(state.x.size() == 2);
  CHECK(state.x[0](0) == doctest::Approx(0.0));
  REQUIRE(state.last_injection.size() == 1);
  CHECK(state.last_injection[0] == doctest::Approx(1.3));
}

TEST_CASE("zero-noise closed loop replays the step-0 plan") {
  std::mt19937_64 rng(17);
  MpcConfig config;
  config.base = testsupport::two_gen_wind(0.6, 1.0, 3, true);
  config.train = make_dataset(window_constant_samples(rng, 25, 3, 0.4));
  config.risk.rho = 1.0;
  config.risk.epsilon = 0.0;
  config.steps = 3;

  Vector zero_xi = Vector::Zero(1);
  auto [first_record, plan] = mpc_step(config, initial_state(config.base), 0, zero_xi);
  (void)first_record;
  REQUIRE(plan.status == SolveStatus::solved);

  MpcTrace trace = mpc_run(config);
  REQUIRE(trace.completed);
  REQUIRE(trace.steps.size() == 3);

  for (int t = 0; t < 3; ++t) {
    for (size_t j = 0; j < config.base.devices.size(); ++j) {
      // plan input at xi = 0 is the e-block for step t
      Vector planned = plan.policy.e[j].segment(t, 1);
      CHECK(trace.steps[t].u[j](0) ==
            doctest::Approx(planned(0)).epsilon(1e-6).scale(1.0 + std::abs(planned(0))));
    }
  }

  // cumulative realized stage cost equals the plan's deterministic cost
  HorizonModel model = validate_case(config.base);
  const double planned_cost = realized_cost(model, plan.policy, Vector::Zero(3));
  double cumulative = 0.0;
  for (const auto& rec : trace.steps) cumulative += rec.stage_cost;
  CHECK(cumulative ==
        doctest::Approx(planned_cost).epsilon(1e-6).scale(1.0 + std::abs(planned_cost)));
}

TEST_CASE("state recursion is exact against the applied inputs") {
  std::mt19937_64 rng(18);
  MpcConfig config;
  config.base = battery_toy(2, 0.0, 2.0, 1.0, 1.0);
  config.train = make_dataset(testsupport::random_samples(rng, 20, 2, 0.3));
  config.risk.rho = 2.0;
  config.steps = 5;
  config.disturbances = testsupport::random_samples(rng, 5, 1, 0.3);

  MpcTrace trace = mpc_run(config);
  REQUIRE(trace.completed);
  MpcState state = initial_state(config.base);
  for (const auto& rec : trace.steps) {
    for (size_t j = 0; j < config.base.devices.size(); ++j) {
      const auto& dev = config.base.devices[j];
      Vector expected = dev.A_step * state.x[j] + dev.B_step * rec.u[j];
      CHECK((rec.x[j] - expected).lpNorm<Eigen::Infinity>() == 0.0);
    }
    state.x = rec.x;
  }
}

TEST_CASE("a one-step window makes the loop a chain of single solves") {
  std::mt19937_64 rng(19);
  MpcConfig config;
  config.base = testsupport::two_gen_wind(0.6, 1.0, 1, true);
  config.train = make_dataset(testsupport::random_samples(rng, 15, 1, 0.4));
  config.risk.rho = 1.0;
  config.risk.epsilon = 0.02;
  config.steps = 4;
  config.disturbances = testsupport::random_samples(rng, 4, 1, 0.3);

  MpcTrace trace = mpc_run(config);
  REQUIRE(trace.completed);
  REQUIRE(trace.steps.size() == 4);

  MpcState state = initial_state(config.base);
  for (int t = 0; t < 4; ++t) {
    auto [record, sol] = mpc_step(config, state, t, config.disturbances.row(t).transpose());
    REQUIRE(record.status == SolveStatus::solved);
    CHECK(record.objective == trace.steps[t].objective);
    for (size_t j = 0; j < record.u.size(); ++j) {
      CHECK((record.u[j] - trace.steps[t].u[j]).lpNorm<Eigen::Infinity>() == 0.0);
    }
    state.x = record.x;
    for (size_t q = 0; q < state.last_injection.size(); ++q) {
      state.last_injection[q] = record.realized_injections(static_cast<int>(q));
    }
  }
}

TEST_CASE("traces are identical across repeated runs") {
  std::mt19937_64 rng(20);
  MpcConfig config;
  config.base = battery_toy(2, 0.0, 2.0, 0.8, 1.0);
  config.train = make_dataset(testsupport::random_samples(rng, 12, 2, 0.25));
  config.risk.rho = 3.0;
  config.steps = 6;
  config.disturbances = testsupport::random_samples(rng, 6, 1, 0.25);

  MpcTrace a = mpc_run(config);
  MpcTrace b = mpc_run(config);
  REQUIRE(a.completed);
  REQUIRE(b.completed);
  REQUIRE(a.steps.size() == b.steps.size());
  for (size_t t = 0; t < a.steps.size(); ++t) {
    CHECK(a.steps[t].objective == b.steps[t].objective);
    CHECK(a.steps[t].stage_cost == b.steps[t].stage_cost);
    for (size_t j = 0; j < a.steps[t].u.size(); ++j) {
      CHECK((a.steps[t].u[j] - b.steps[t].u[j]).lpNorm<Eigen::Infinity>() == 0.0);
    }
  }
}

TEST_CASE("persistence anchors follow the realized injections") {
  MpcConfig config;
  config.base = testsupport::two_gen_wind(5.0, 1.0, 1, true);
  std::mt19937_64 rng(21);
  config.train = make_dataset(testsupport::random_samples(rng, 10, 1, 0.3));
  config.risk.rho = 1.0;
  config.steps = 3;
  config.disturbances = Matrix(3, 1);
  config.disturbances << 0.5, -0.25, 0.0;

  MpcTrace trace = mpc_run(config);
  REQUIRE(trace.completed);
  // wind anchor: 1.0, then 1.5, then 1.25; realized adds the step's error
  CHECK(trace.steps[0].realized_injections(0) == doctest::Approx(1.5));
  CHECK(trace.steps[1].realized_injections(0) == doctest::Approx(1.25));
  CHECK(trace.steps[2].realized_injections(0) == doctest::Approx(1.25));
}

TEST_CASE("a custom forecast provider overrides persistence") {
  MpcConfig config;
  config.base = testsupport::two_gen_wind(5.0, 1.0, 1, true);
  std::mt19937_64 rng(22);
  config.train = make_dataset(testsupport::random_samples(rng, 10, 1, 0.3));
  config.risk.rho = 1.0;
  config.steps = 2;
  config.forecast = [](int step, const MpcState&, const NetworkCase& base) {
    auto out = base.injections;
    out[0].r = Vector::Constant(base.T, 2.0 + step);
    return out;
  };

  MpcTrace trace = mpc_run(config);
  REQUIRE(trace.completed);
  CHECK(trace.steps[0].realized_injections(0) == doctest::Approx(2.0));
  CHECK(trace.steps[1].realized_injections(0) == doctest::Approx(3.0));
}

TEST_CASE("a failing step truncates the trace with a diagnostic") {
  MpcConfig config;
  config.base = testsupport::two_gen_wind(5.0, 1.0, 1, false);  // unbalanceable
  std::mt19937_64 rng(23);
  config.train = make_dataset(testsupport::random_samples(rng, 10, 1, 0.3));
  config.steps = 3;

  MpcTrace trace = mpc_run(config);
  CHECK_FALSE(trace.completed);
  CHECK(trace.steps.empty());
  CHECK(trace.error.find("step 0") != std::string::npos);
}

TEST_CASE("config validation rejects malformed runs") {
  MpcConfig config;
  config.base = testsupport::two_gen_wind(5.0, 1.0, 1, true);
  std::mt19937_64 rng(24);
  config.train = make_dataset(testsupport::random_samples(rng, 10, 1, 0.3));

  SUBCASE("no steps") {
    config.steps = 0;
    CHECK_THROWS_AS(mpc_run(config), ParamError);
  }
  SUBCASE("disturbance width mismatch") {
    config.steps = 2;
    config.disturbances = Matrix::Zero(2, 3);
    CHECK_THROWS_AS(mpc_run(config), ParamError);
  }
  SUBCASE("too few disturbance rows") {
    config.steps = 4;
    config.disturbances = Matrix::Zero(2, 1);
    CHECK_THROWS_AS(mpc_run(config), ParamError);
  }
}

TEST_CASE("closed-loop SOC stays inside the band in most steps") {
  const double lo = 0.0, hi = 2.0;
  MpcConfig config;
  config.base = battery_toy(1, lo, hi, 1.0, 1.0, 0.05, 4.0);
  SynthConfig synth;
  synth.count = 150;
  synth.sigma = 0.25;
  synth.seed = 5;
  config.train = make_dataset(synth_errors(synth));
  config.risk.rho = 10.0;
  config.risk.alpha = 0.1;
  config.risk.epsilon = 0.0;
  config.steps = 200;
  SynthConfig noise;
  noise.count = 200;
  noise.sigma = 0.25;
  noise.seed = 6;
  config.disturbances = synth_errors(noise);

  MpcTrace trace = mpc_run(config);
  REQUIRE(trace.completed);
  int inside = 0;
  for (const auto& rec : trace.steps) {
    const double soc = rec.x[1](1);
    if (soc >= lo - 1e-9 && soc <= hi + 1e-9) ++inside;
  }
  CHECK(inside >= static_cast<int>(0.9 * config.steps));
}

TEST_CASE("receding windows complete wherever shrinking windows do") {
  std::mt19937_64 rng(26);
  Matrix train3 = testsupport::random_samples(rng, 15, 3, 0.3);

  for (double d : {-0.4, 0.0, 0.4}) {
    for (double d2 : {-0.4, 0.0, 0.4}) {
      for (double d3 : {-0.4, 0.0, 0.4}) {
        Matrix dist(3, 1);
        dist << d, d2, d3;

        // receding horizon: full 3-step window each step
        MpcConfig config;
        config.base = battery_toy(3, 0.0, 2.0, 1.0, 1.0);
        config.train = make_dataset(train3);
        config.risk.rho = 2.0;
        config.steps = 3;
        config.disturbances = dist;
        MpcTrace receding = mpc_run(config);

        // shrinking horizon: window length 3 - t, advanced by hand
        bool shrinking_ok = true;
        MpcState state = initial_state(config.base);
        double anchor = 1.0;
        for (int t = 0; t < 3 && shrinking_ok; ++t) {
          const int Tw = 3 - t;
          NetworkCase window = battery_toy(Tw, 0.0, 2.0, state.x[1](1), anchor);
          window.devices[1].x0 = state.x[1];
          try {
            HorizonModel model = validate_case(window);
            Dataset train = make_dataset(train3.leftCols(Tw));
            RiskConfig risk;
            risk.rho = 2.0;
            Solution sol = solve_opf(model, train, risk);
            if (sol.status != SolveStatus::solved) {
              shrinking_ok = false;
              break;
            }
            Vector xi_window = Vector::Zero(Tw);
            xi_window(0) = dist(t, 0);
            for (size_t j = 0; j < window.devices.size(); ++j) {
              Vector u = sol.policy.D[j] * xi_window + sol.policy.e[j];
              state.x[j] = window.devices[j].A_step * state.x[j] +
                           window.devices[j].B_step * u.head(1);
            }
            anchor += dist(t, 0);
          } catch (const std::exception&) {
            shrinking_ok = false;
          }
        }
        if (shrinking_ok) CHECK(receding.completed);
      }
    }
  }
}
