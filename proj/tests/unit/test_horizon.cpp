#include <doctest.h>

#include <random>

#include <dropf/horizon.hpp>

#include "test_cases.hpp"

using namespace dropf;
using testsupport::memoryless_gen;

namespace {

ControllableDevice dev_from(const Matrix& A, const Matrix& B) {
  ControllableDevice dev;
  dev.id = "d";
  dev.bus = 1;
  dev.n = static_cast<int>(A.rows());
  dev.m = static_cast<int>(B.cols());
  dev.A_step = A;
  dev.B_step = B;
  dev.x0 = Vector::Zero(A.rows());
  return dev;
}

}  // namespace

TEST_CASE("stacked dynamics of a scalar integrator") {
  auto dev = dev_from(Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  auto [A_stack, B_stack] = stack_dynamics(dev, 2);
  REQUIRE(A_stack.rows() == 2);
  REQUIRE(B_stack.rows() == 2);
  CHECK(A_stack(0, 0) == doctest::Approx(1.0));
  CHECK(A_stack(1, 0) == doctest::Approx(1.0));
  CHECK(B_stack(0, 0) == doctest::Approx(1.0));
  CHECK(B_stack(0, 1) == doctest::Approx(0.0));
  CHECK(B_stack(1, 0) == doctest::Approx(1.0));
  CHECK(B_stack(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("memoryless dynamics stack to a block identity") {
  auto dev = dev_from(Matrix::Zero(1, 1), Matrix::Ones(1, 1));
  auto [A_stack, B_stack] = stack_dynamics(dev, 3);
  CHECK(A_stack.isZero(0.0));
  CHECK(B_stack.isApprox(Matrix::Identity(3, 3)));
}

TEST_CASE("double-integrator input column propagates through the horizon") {
  Matrix A(2, 2);
  A << 1, 1, 0, 1;
  Matrix B(2, 1);
  B << 0, 1;
  auto dev = dev_from(A, B);
  auto [A_stack, B_stack] = stack_dynamics(dev, 3);
  REQUIRE(B_stack.rows() == 6);
  REQUIRE(B_stack.cols() == 3);
  Vector col0(6);
  col0 << 0, 1, 1, 1, 2, 1;
  CHECK((B_stack.col(0) - col0).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
  // strict upper blocks stay zero
  CHECK(B_stack.block(0, 1, 2, 2).isZero(0.0));
  CHECK(B_stack.block(2, 2, 2, 1).isZero(0.0));
}

TEST_CASE("stacked dynamics reproduce step-by-step simulation") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> pick_n(1, 8);
  std::uniform_int_distribution<int> pick_T(1, 10);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = pick_n(rng);
    const int m = pick_n(rng);
    const int T = pick_T(rng);
    Matrix A(n, n), B(n, m);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) A(i, j) = 0.5 * unif(rng);
      for (int j = 0; j < m; ++j) B(i, j) = unif(rng);
    }
    auto dev = dev_from(A, B);
    auto [A_stack, B_stack] = stack_dynamics(dev, T);

    Vector x0(n), u(m * T);
    for (int i = 0; i < n; ++i) x0(i) = unif(rng);
    for (int i = 0; i < m * T; ++i) u(i) = unif(rng);

    Vector x = x0;
    Vector expected(n * T);
    for (int t = 0; t < T; ++t) {
      x = A * x + B * u.segment(t * m, m);
      expected.segment(t * n, n) = x;
    }
    Vector actual = A_stack * x0 + B_stack * u;
    CHECK((actual - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("two-bus transfer factor") {
  NetworkCase net = testsupport::two_gen_wind(10.0, 0.0);
  Matrix ptdf = build_ptdf(net);
  REQUIRE(ptdf.rows() == 1);
  REQUIRE(ptdf.cols() == 2);
  CHECK(ptdf(0, 0) == doctest::Approx(0.0));
  CHECK(ptdf(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("three-bus ring splits an injection by path susceptance") {
  NetworkCase net = testsupport::ring3();
  Matrix ptdf = build_ptdf(net);
  REQUIRE(ptdf.rows() == 3);
  CHECK(ptdf(0, 1) == doctest::Approx(-2.0 / 3.0));
  CHECK(ptdf(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(ptdf(2, 1) == doctest::Approx(-1.0 / 3.0));
}

TEST_CASE("injection at the slack bus moves no flow") {
  NetworkCase net = testsupport::ring3();
  Matrix ptdf = build_ptdf(net);
  CHECK(ptdf.col(0).isZero(0.0));
}

TEST_CASE("transfer factors agree with a direct DC solve on random networks") {
  std::mt19937_64 rng(137);
  std::uniform_int_distribution<int> pick_buses(2, 10);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 25; ++trial) {
    const int nb = pick_buses(rng);
    NetworkCase net;
    for (int b = 1; b <= nb; ++b) net.buses.push_back(b);
    net.slack = 1 + static_cast<int>(rng() % nb);
    for (int b = 2; b <= nb; ++b) net.lines.push_back({b - 1, b, unif(rng), 10.0, -1.0});
    for (int extra = 0; extra < nb / 2; ++extra) {
      int f = 1 + static_cast<int>(rng() % nb);
      int t = 1 + static_cast<int>(rng() % nb);
      if (f == t) continue;
      net.lines.push_back({f, t, unif(rng), 10.0, -1.0});
    }
    net.devices.push_back(memoryless_gen("g1", 1, 1, 1.0));
    net.T = 1;
    net.n_xi = 1;
    (void)coin;

    Matrix ptdf = build_ptdf(net);

    // independent dense DC solve: B_red theta_red = p_red, f = b (th_f - th_t)
    const int L = static_cast<int>(net.lines.size());
    const int slack_idx = net.slack - 1;
    Matrix B_full = Matrix::Zero(nb, nb);
    for (const auto& ln : net.lines) {
      const int f = ln.from - 1;
      const int t = ln.to - 1;
      const double b = 1.0 / ln.x_pu;
      B_full(f, f) += b;
      B_full(t, t) += b;
      B_full(f, t) -= b;
      B_full(t, f) -= b;
    }
    std::vector<int> keep;
    for (int b = 0; b < nb; ++b) {
      if (b != slack_idx) keep.push_back(b);
    }
    Matrix B_red(nb - 1, nb - 1);
    for (int i = 0; i < nb - 1; ++i) {
      for (int j = 0; j < nb - 1; ++j) B_red(i, j) = B_full(keep[i], keep[j]);
    }
    for (int inject = 0; inject < nb; ++inject) {
      Vector p = Vector::Zero(nb);
      p(inject) += 1.0;
      p(slack_idx) -= 1.0;
      Vector p_red(nb - 1);
      for (int i = 0; i < nb - 1; ++i) p_red(i) = p(keep[i]);
      Vector th_red = B_red.fullPivLu().solve(p_red);
      Vector theta = Vector::Zero(nb);
      for (int i = 0; i < nb - 1; ++i) theta(keep[i]) = th_red(i);
      for (int l = 0; l < L; ++l) {
        const auto& ln = net.lines[l];
        const double flow = (theta(ln.from - 1) - theta(ln.to - 1)) / ln.x_pu;
        CHECK(ptdf(l, inject) == doctest::Approx(flow).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("line mapping mirrors flows into both directed rows") {
  NetworkCase net = testsupport::ring3();
  net.T = 2;
  Matrix ptdf = build_ptdf(net);
  Matrix gamma = line_mapping(ptdf, 1, 2);  // bus index 1 = bus id 2
  HorizonModel model;
  model.T = 2;
  model.n_lines = 3;
  REQUIRE(gamma.rows() == 12);
  REQUIRE(gamma.cols() == 2);
  for (int l = 0; l < 3; ++l) {
    for (int t = 0; t < 2; ++t) {
      const double fwd = gamma(model.flow_row(l, 0, t), t);
      const double rev = gamma(model.flow_row(l, 1, t), t);
      CHECK(fwd == doctest::Approx(ptdf(l, 1)));
      CHECK(rev == doctest::Approx(-ptdf(l, 1)));
      // time steps decouple
      CHECK(gamma(model.flow_row(l, 0, t), 1 - t) == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("case validation builds a coherent model") {
  NetworkCase net = testsupport::two_gen_wind(5.0, 1.0, 2);
  net.monitored_lines = {"1-2"};
  HorizonModel model = validate_case(net);
  CHECK(model.T == 2);
  CHECK(model.n_lines == 1);
  CHECK(model.n_buses == 2);
  CHECK(model.devices.size() == 2);
  CHECK(model.injections.size() == 1);
  CHECK(model.p_bar.size() == 4);
  CHECK(model.p_bar.minCoeff() == doctest::Approx(5.0));
  REQUIRE(model.monitored.size() == 1);
  CHECK(model.monitored[0] == 0);
  // cached products match the stacked matrices
  const auto& dh = model.devices[0];
  CHECK(dh.CB.isApprox(dh.C_sel * dh.B_stack));
}

TEST_CASE("asymmetric reverse limit lands on the reversed rows") {
  NetworkCase net = testsupport::two_gen_wind(5.0, 1.0);
  net.lines[0].limit_rev_mw = 2.0;
  HorizonModel model = validate_case(net);
  CHECK(model.p_bar(model.flow_row(0, 0, 0)) == doctest::Approx(5.0));
  CHECK(model.p_bar(model.flow_row(0, 1, 0)) == doctest::Approx(2.0));
}

TEST_CASE("an empty monitored list watches every line") {
  NetworkCase net = testsupport::ring3();
  HorizonModel model = validate_case(net);
  CHECK(model.monitored.size() == 3);
}

TEST_CASE("validation failures name the offending element") {
  SUBCASE("negative reactance") {
    NetworkCase net = testsupport::two_gen_wind(5.0, 1.0);
    net.lines[0].x_pu = -0.1;
    CHECK_THROWS_WITH_AS(validate_case(net), doctest::Contains("1-2"), ValidationError);
  }
  SUBCASE("indefinite input cost") {
    NetworkCase net = testsupport::single_bus(1, 1, true);
    net.devices[0].cost.H_u(0, 0) = -1.0;
    CHECK_THROWS_WITH_AS(validate_case(net), doctest::Contains("g1"), ValidationError);
  }
  SUBCASE("disconnected bus") {
    NetworkCase net = testsupport::two_gen_wind(5.0, 1.0);
    net.buses.push_back(7);
    CHECK_THROWS_WITH_AS(validate_case(net), doctest::Contains("7"), ValidationError);
  }
  SUBCASE("duplicate bus id") {
    NetworkCase net = testsupport::ring3();
    net.buses.push_back(2);
    CHECK_THROWS_AS(validate_case(net), ValidationError);
  }
  SUBCASE("unknown monitored line") {
    NetworkCase net = testsupport::ring3();
    net.monitored_lines = {"4-5"};
    CHECK_THROWS_WITH_AS(validate_case(net), doctest::Contains("4-5"), ValidationError);
  }
  SUBCASE("device on a missing bus") {
    NetworkCase net = testsupport::single_bus(1, 1, true);
    net.devices[0].bus = 9;
    CHECK_THROWS_AS(validate_case(net), ValidationError);
  }
  SUBCASE("horizon must be positive") {
    NetworkCase net = testsupport::single_bus(1, 1, true);
    net.T = 0;
    CHECK_THROWS_AS(validate_case(net), ValidationError);
  }
  SUBCASE("injection error map must span the horizon") {
    NetworkCase net = testsupport::two_gen_wind(5.0, 1.0, 2);
    net.injections[0].G = Matrix::Zero(1, 1);
    CHECK_THROWS_WITH_AS(validate_case(net), doctest::Contains("wind"), ValidationError);
  }
}
