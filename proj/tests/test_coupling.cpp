#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mfnet/coupling.hpp"
#include "mfnet/error.hpp"

using namespace mfnet;
using mfnet::testing::e1_spec;
using mfnet::testing::with_lambda;

namespace {

std::size_t idx(const WordSpace& s, const QueueWord& x) { return *s.index_of(x); }

CoupledState random_coupled(Philox4x32& rng, const WordSpace& space, int max_len) {
  const std::size_t n = space.size();
  CoupledState c = CoupledState::zero(n);
  double total = 0.0;
  for (std::size_t y = 0; y < n; ++y) {
    if (static_cast<int>(space.length(y)) > max_len) continue;
    c.white[y] = rng.uniform01() < 0.3 ? rng.uniform01() : 0.0;
    total += c.white[y];
    for (std::size_t z = 0; z < n; ++z) {
      if (y == z || static_cast<int>(space.length(z)) > max_len) continue;
      const double r = rng.uniform01() < 0.05 ? rng.uniform01() : 0.0;
      c.red_at(y, z) = r;
      total += r;
    }
  }
  for (double& w : c.white) w /= total;
  for (double& r : c.red) r /= total;
  return c;
}

}  // namespace

TEST_CASE("coupled_flows") {
  const auto net = validate_spec(e1_spec(4));
  const WordSpace space(2, 4, net.discipline());
  const std::size_t n = space.size();

  SUBCASE("without red pairs they are the plain flows of W") {
    const auto mu = MeasureState::point_mass(space, QueueWord{1, 2});
    CoupledState c = CoupledState::zero(n);
    c.white = mu.weights;
    const auto f = coupled_flows(c, net, space);
    const auto plain = compute_flows(mu, net.lambda_at(0.0), net, space);
    CHECK(f.u_white == plain.u);
    CHECK(f.v_white == plain.w);
    CHECK(f.v_first == std::vector<double>{0.0, 0.0});
    CHECK(f.v_second == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("a single red pair") {
    CoupledState c = CoupledState::zero(n);
    c.red_at(idx(space, QueueWord{1}), 0) = 1.0;
    const auto f = coupled_flows(c, net, space);
    CHECK(f.u_first[0] == doctest::Approx(1.0));
    CHECK(f.u_first[1] == 0.0);
    CHECK(f.v_first[0] == 0.0);
    CHECK(f.v_first[1] == doctest::Approx(0.5));
    CHECK(f.u_second == std::vector<double>{0.0, 0.0});
    CHECK(f.v_total[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("coupled_rhs") {
  const auto net = validate_spec(e1_spec(4));
  const WordSpace space(2, 4, net.discipline());
  const std::size_t n = space.size();
  const auto lambda = net.lambda_at(0.0);

  SUBCASE("without red pairs it is the master equation on W") {
    Philox4x32 rng(8);
    MeasureState mu;
    mu.weights.assign(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += mu.weights[i] = rng.uniform01();
    for (double& w : mu.weights) w /= total;
    CoupledState c = CoupledState::zero(n);
    c.white = mu.weights;
    const auto d = coupled_rhs(c, lambda, net, space);
    const auto plain = master_rhs(mu, compute_flows(mu, lambda, net, space).v, space);
    for (std::size_t i = 0; i < n; ++i) CHECK(d.d_white[i] == doctest::Approx(plain.d[i]).epsilon(1e-12));
    for (double r : d.d_red) CHECK(r == 0.0);
    CHECK(d.leak_flux == doctest::Approx(plain.leak_flux));
  }
  SUBCASE("half white empty, half red ((1), empty)") {
    CoupledState c = CoupledState::zero(n);
    c.white[0] = 0.5;
    const std::size_t one = idx(space, QueueWord{1});
    c.red_at(one, 0) = 0.5;
    const auto d = coupled_rhs(c, lambda, net, space);
    // Loss 0.5 (Σλ + Σv') = 0.5 · 0.35, gain 0.5 from the red pair emptying.
    CHECK(d.d_white[0] == doctest::Approx(0.325));
    // White ∅ receiving a first-side class-2 arrival becomes red ((2), ∅).
    CHECK(d.d_red[idx(space, QueueWord{2}) * n + 0] == doctest::Approx(0.5 * 0.25));
  }
  SUBCASE("property: mass balance and no red mass at (empty, empty)") {
    Philox4x32 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
      const auto c = random_coupled(rng, space, 4);
      const auto d = coupled_rhs(c, lambda, net, space);
      double s = d.leak_flux;
      for (double x : d.d_white) s += x;
      for (double x : d.d_red) s += x;
      CHECK(std::abs(s) < 1e-12);
      CHECK(d.d_red[0] == 0.0);
    }
  }
}

TEST_CASE("marginal derivatives are the two master equations") {
  // Support below K keeps every transition inside the space, so nothing leaks.
  const auto net = validate_spec(e1_spec(4));
  const WordSpace space(2, 4, net.discipline());
  const auto lambda = net.lambda_at(0.0);
  Philox4x32 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_coupled(rng, space, 3);
    const auto d = coupled_rhs(c, lambda, net, space);
    CoupledState dc = CoupledState::zero(space.size());
    dc.white = d.d_white;
    dc.red = d.d_red;
    const auto [da, db] = marginals(dc);
    const auto [ma, mb] = marginals(c);
    const auto ea = master_rhs(ma, compute_flows(ma, lambda, net, space).v, space);
    const auto eb = master_rhs(mb, compute_flows(mb, lambda, net, space).v, space);
    CHECK(d.leak_flux == 0.0);
    for (std::size_t x = 0; x < space.size(); ++x) {
      CHECK(std::abs(da.weights[x] - ea.d[x]) < 1e-12);
      CHECK(std::abs(db.weights[x] - eb.d[x]) < 1e-12);
    }
  }
}

TEST_CASE("greedy_coupling and marginals") {
  const auto net = validate_spec(e1_spec(3));
  const WordSpace space(2, 3, net.discipline());
  const std::size_t n = space.size();
  const std::size_t one = idx(space, QueueWord{1});
  const std::size_t two = idx(space, QueueWord{2});

  SUBCASE("point masses") {
    const auto c = greedy_coupling(MeasureState::point_mass(space, QueueWord{1}), MeasureState::empty_queue(space));
    CHECK(c.white_mass() == 0.0);
    CHECK(c.red_at(one, 0) == 1.0);
    const auto same = greedy_coupling(MeasureState::empty_queue(space), MeasureState::empty_queue(space));
    CHECK(same.white[0] == 1.0);
    CHECK(same.red_mass() == 0.0);
  }
  SUBCASE("overlap first, then northwest corner") {
    MeasureState a = MeasureState::empty_queue(space);
    a.weights[0] = 0.5;
    a.weights[one] = 0.5;
    MeasureState b = MeasureState::empty_queue(space);
    b.weights[0] = 0.7;
    b.weights[two] = 0.3;
    const auto c = greedy_coupling(a, b);
    CHECK(c.white[0] == doctest::Approx(0.5));
    CHECK(c.red_at(one, 0) == doctest::Approx(0.2));
    CHECK(c.red_at(one, two) == doctest::Approx(0.3));
    CHECK(c.red_mass() == doctest::Approx(tv_distance(a, b)));
    const auto [ma, mb] = marginals(c);
    CHECK(sup_distance(ma, a) < 1e-15);
    CHECK(sup_distance(mb, b) < 1e-15);
  }
  SUBCASE("marginals attribute the leak to both sides") {
    CoupledState c = CoupledState::zero(n);
    c.white[0] = 0.25;
    c.red_at(one, two) = 0.5;
    c.leaked_mass = 0.25;
    const auto [ma, mb] = marginals(c);
    CHECK(ma.weights[0] == 0.25);
    CHECK(ma.weights[one] == 0.5);
    CHECK(mb.weights[two] == 0.5);
    CHECK(ma.leaked_mass == 0.25);
    CHECK(mb.leaked_mass == 0.25);
  }
  SUBCASE("unequal masses are rejected") {
    MeasureState a = MeasureState::empty_queue(space);
    MeasureState b = MeasureState::empty_queue(space);
    b.weights[0] = 0.9;
    b.leaked_mass = 0.1;
    try {
      greedy_coupling(a, b);
      FAIL("expected InvalidArgument");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidArgument);
    }
  }
  SUBCASE("red remaining services") {
    CoupledState c = CoupledState::zero(n);
    c.red_at(one, two) = 0.5;
    // h = (1.5, 1)
    CHECK(red_remaining_services(c, net, space) == doctest::Approx(0.5 * 2.5));
  }
}

TEST_CASE("integrate_coupled") {
  SolverConfig cfg;
  cfg.dt = 0.01;
  cfg.output_stride = 10;

  SUBCASE("single red pair that just drains") {
    const auto net = validate_spec(with_lambda(e1_spec(3), {0.0, 0.0}));
    const WordSpace space(2, 3, net.discipline());
    cfg.K = 3;
    cfg.t_end = 3.0;
    CoupledState c = CoupledState::zero(space.size());
    c.red_at(idx(space, QueueWord{2}), 0) = 1.0;
    const auto tr = integrate_coupled(c, cfg, net);
    for (const auto& s : tr.samples) {
      CHECK(std::abs(s.red_mass - std::exp(-s.time)) < 1e-8);
      // trapezoid error ≤ dt²/12 · t · max|r''|
      CHECK(std::abs(s.red_integral - (1.0 - std::exp(-s.time))) <= cfg.dt * cfg.dt / 12 * s.time + 1e-12);
    }
  }
  SUBCASE("identical starts stay white") {
    const auto net = validate_spec(e1_spec(5));
    const WordSpace space(2, 5, net.discipline());
    cfg.K = 5;
    cfg.t_end = 10.0;
    const auto mu = MeasureState::point_mass(space, QueueWord{1, 2});
    const auto tr = integrate_coupled(greedy_coupling(mu, mu), cfg, net);
    for (const auto& s : tr.samples) {
      CHECK(s.red_mass == 0.0);
      CHECK(s.tv_actual == 0.0);
    }
    REQUIRE(tr.red_below_threshold_time.has_value());
    CHECK(*tr.red_below_threshold_time == 0.0);
  }
  SUBCASE("TV stays under the red mass and the red mass drains") {
    const auto net = validate_spec(e1_spec(6));
    const WordSpace space(2, 6, net.discipline());
    cfg.K = 6;
    cfg.t_end = 20.0;
    cfg.output_stride = 100;
    cfg.record_weights = true;
    const auto a = MeasureState::point_mass(space, QueueWord{1, 1, 1});
    const auto b = MeasureState::empty_queue(space);
    const auto tr = integrate_coupled(greedy_coupling(a, b), cfg, net);
    for (const auto& s : tr.samples) {
      CHECK(s.tv_actual == doctest::Approx(tv_distance(*s.first, *s.second)));
      CHECK(s.tv_actual <= s.red_mass + 1e-12);
      CHECK(std::abs(s.white_mass + s.red_mass + s.leaked - 1.0) < 1e-9);
    }
    CHECK(tr.final_state.red_at(0, 0) == 0.0);
    CHECK(tr.samples.back().red_mass < tr.samples.front().red_mass);
  }
}
