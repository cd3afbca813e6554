#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "golden.hpp"
#include "peatsim/wireless.hpp"

using namespace peatsim;
using namespace peatsim::wireless;

TEST_CASE("noise density converts from dBm") {
  CHECK(dbm_to_watts(-174.0) == doctest::Approx(3.981071705534985e-21).epsilon(1e-12));
  CHECK(ChannelParams{}.noise_psd == doctest::Approx(dbm_to_watts(-174.0)).epsilon(1e-12));
  CHECK(dbm_to_watts(30.0) == doctest::Approx(1.0));
}

TEST_CASE("shannon rate special cases") {
  CHECK(shannon_rate(1e9, 0.0, 1e-9, 1e-20) == 0.0);
  // SNR = gP/(Bσ²) = 1 gives r = B
  CHECK(shannon_rate(2e6, 1.0, 2e-6, 1e-12) == doctest::Approx(2e6).epsilon(1e-12));
  // SNR = 1023 gives 10 bits/s/Hz
  const double sigma = 1e-9 * 1.0 / (1e9 * 1023.0);
  CHECK(shannon_rate(1e9, 1.0, 1e-9, sigma) == doctest::Approx(1e10).epsilon(1e-12));
  CHECK_THROWS_AS(shannon_rate(0.0, 1.0, 1.0, 1.0), DomainError);
}

TEST_CASE("shannon rate is monotone in power, gain and bandwidth") {
  Rng rng(11);
  std::uniform_real_distribution<double> lg(-12.0, -6.0), lp(-2.0, 1.2), lb(6.0, 10.5);
  const double sigma = ChannelParams{}.noise_psd;
  for (int i = 0; i < 2000; ++i) {
    const double g = std::pow(10.0, lg(rng)), p = std::pow(10.0, lp(rng)), b = std::pow(10.0, lb(rng));
    const double r = shannon_rate(b, p, g, sigma);
    CHECK(shannon_rate(b, p * 1.5, g, sigma) > r);
    CHECK(shannon_rate(b, p, g * 1.5, sigma) > r);
    CHECK(shannon_rate(b * 1.5, p, g, sigma) > r);
  }
}

TEST_CASE("transmission delay indicators") {
  CHECK(transmission_delay(true, true, 2.63e9, 1e10) == doctest::Approx(2.104).epsilon(1e-12));
  CHECK(transmission_delay(true, false, 2.63e9, 1e10) == 0.0);
  CHECK(transmission_delay(false, true, 2.63e9, 1e10) == 0.0);
  CHECK(transmission_delay(false, false, 2.63e9, 0.0) == 0.0);
  CHECK(transmission_delay(true, false, 2.63e9, 0.0) == 0.0);
  CHECK_THROWS_AS(transmission_delay(true, true, 2.63e9, 0.0), InfeasibleRateError);
  // zero exactly when not selected or not changed
  for (bool u : {false, true}) {
    for (bool chi : {false, true}) {
      CHECK((transmission_delay(u, chi, 1e9, 1e9) == 0.0) == (!u || !chi));
    }
  }
}

TEST_CASE("channel gain") {
  ChannelParams p;
  p.rician_k = std::numeric_limits<double>::infinity();
  Rng rng(3);
  CHECK(channel_gain(1.0, p, rng) == doctest::Approx(1e-4).epsilon(1e-12));
  // below the reference distance the gain is clamped
  CHECK(channel_gain(0.1, p, rng) == channel_gain(1.0, p, rng));

  p.pathloss_exponent = 4.0;
  CHECK(channel_gain(10.0, p, rng) / channel_gain(20.0, p, rng) == doctest::Approx(16.0).epsilon(1e-12));

  p.pathloss_exponent = 3.5;
  Rng a(1), b(99);
  CHECK(channel_gain(37.0, p, a) == channel_gain(37.0, p, b));
}

TEST_CASE("rician power has unit mean") {
  Rng rng(2024);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += rician_power(3.0, rng);
  CHECK(std::abs(sum / n - 1.0) < 0.02);
  CHECK(rician_power(std::numeric_limits<double>::infinity(), rng) == 1.0);
}

TEST_CASE("budget allocation") {
  const std::vector<int> sel5{0, 1, 2, 3, 4};
  const std::vector<int> eq5{2, 2, 2, 2, 2};
  for (double b : allocate_budget(eq5, sel5, 20e9)) CHECK(b == doctest::Approx(4e9));

  // levels are indexed by device id
  const std::vector<int> sel3{4, 1, 7};
  std::vector<int> lv(10, 1);
  lv[4] = 2;
  const auto p = allocate_budget(lv, sel3, 15.0);
  CHECK(p.size() == 10);
  CHECK(p[4] == doctest::Approx(7.5));
  CHECK(p[1] == doctest::Approx(3.75));
  CHECK(p[7] == doctest::Approx(3.75));
  CHECK(p[0] == 0.0);

  const std::vector<int> one{3};
  const std::vector<int> lv1(5, 4);
  CHECK(allocate_budget(lv1, one, 15.0)[3] == 15.0);

  CHECK_THROWS_AS(allocate_budget(lv1, std::vector<int>{}, 1.0), AllocationError);
  CHECK_THROWS_AS(allocate_budget(std::vector<int>{0, 0}, std::vector<int>{1}, 1.0), AllocationError);
  CHECK_THROWS_AS(allocate_budget(lv1, std::vector<int>{9}, 1.0), AllocationError);
}

TEST_CASE("allocations sum to the budget exactly and are zero off the selection") {
  Rng rng(5);
  ChannelParams params;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 10;
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    const int k = 1 + static_cast<int>(rng() % n);
    std::vector<int> sel(ids.begin(), ids.begin() + k);
    std::vector<int> lb(n), lp(n);
    for (int i = 0; i < n; ++i) {
      lb[i] = 1 + static_cast<int>(rng() % 4);
      lp[i] = 1 + static_cast<int>(rng() % 4);
    }
    params.bandwidth_budget = 7e9 + 13e9 * std::uniform_real_distribution<double>()(rng);
    const auto a = allocate_budgets(lb, lp, sel, params);
    REQUIRE(a.bandwidth.size() == static_cast<std::size_t>(n));
    double sb = 0.0, sp = 0.0;
    for (int d : sel) {
      sb += a.bandwidth[d];
      sp += a.power[d];
    }
    for (int d = 0; d < n; ++d) {
      CHECK(a.bandwidth[d] >= 0.0);
      CHECK(a.power[d] >= 0.0);
      const bool chosen = std::find(sel.begin(), sel.end(), d) != sel.end();
      if (!chosen) {
        CHECK(a.bandwidth[d] == 0.0);
        CHECK(a.power[d] == 0.0);
      }
    }
    CHECK(sb == params.bandwidth_budget);
    CHECK(sp == params.power_budget);
    // device order too
    CHECK(std::accumulate(a.bandwidth.begin(), a.bandwidth.end(), 0.0) == params.bandwidth_budget);
    CHECK(std::accumulate(a.power.begin(), a.power.end(), 0.0) == params.power_budget);
  }
}

TEST_CASE("mobility stays inside the disc") {
  MobilityModel m;
  Rng rng(9);
  for (int dev = 0; dev < 20; ++dev) {
    auto pos = sample_in_disc(m.area_radius, rng);
    auto st = init_mobility(pos, m, rng);
    for (int t = 0; t < 300; ++t) {
      const auto next = step_mobility(pos, st, m, rng);
      CHECK(next.norm() <= m.area_radius + 1e-9);
      const double moved = std::hypot(next.x - pos.x, next.y - pos.y);
      CHECK(moved <= m.speed_max * m.round_duration + 1e-9);
      pos = next;
    }
  }
}

TEST_CASE("zero speed leaves positions unchanged") {
  MobilityModel m;
  m.speed_min = m.speed_max = 0.0;
  Rng rng(1);
  sim::Vec2 pos{12.5, -40.0};
  auto st = init_mobility(pos, m, rng);
  for (int t = 0; t < 50; ++t) {
    const auto next = step_mobility(pos, st, m, rng);
    CHECK(next == pos);
  }
}

TEST_CASE("seed 42 mobility trace matches the golden file") {
  MobilityModel m;
  auto trace = [&] {
    Rng rng(42);
    auto pos = sample_in_disc(m.area_radius, rng);
    auto st = init_mobility(pos, m, rng);
    std::ostringstream out;
    out.precision(17);
    for (int t = 0; t < 50; ++t) {
      out << t << ' ' << pos.x << ' ' << pos.y << '\n';
      pos = step_mobility(pos, st, m, rng);
    }
    return out.str();
  };
  const auto first = trace();
  CHECK(first == trace());
  golden::check("mobility_seed42.txt", first);
}
