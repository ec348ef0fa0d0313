#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "ipsg/core.hpp"

using namespace ipsg;

namespace {

Schedule make(ScheduleKind kind, double alpha, double beta = 0.0) {
  Schedule s;
  s.kind = kind;
  s.alpha = alpha;
  s.beta = beta;
  return s;
}

}  // namespace

TEST_SUITE("schedule") {
  TEST_CASE("fixed horizon step is alpha over sqrt(K)") {
    auto s = make(ScheduleKind::FixedHorizon, 5e-5);
    s.horizon = 400;
    CHECK(alpha_at(s, 7) == doctest::Approx(2.5e-6).epsilon(1e-15));
    CHECK_THROWS_AS(alpha_at(s, 401), ScheduleExhausted);
    CHECK_THROWS_AS(beta_at(s, 401), ScheduleExhausted);
    CHECK_NOTHROW(alpha_at(s, 400));
  }

  TEST_CASE("diminishing rules at k = 1") {
    CHECK(alpha_at(make(ScheduleKind::DiminishingSqrtK, 1.0), 1) == 1.0);
    auto s = make(ScheduleKind::DiminishingShifted, 1.0);
    s.shift = 4;
    CHECK(alpha_at(s, 1) == 0.5);
  }

  TEST_CASE("constant pair inertia") {
    const auto s = make(ScheduleKind::ConstantPair, 5e-5, 0.9);
    for (std::int64_t k : {1, 2, 100, 100000}) CHECK(beta_at(s, k) == 0.9);
  }

  TEST_CASE("varying rule saturates at the cap") {
    auto s = make(ScheduleKind::DiminishingSqrtK, 5e-5, 2.0);
    s.beta_cap = 0.9;
    s.epoch_based = true;
    // e_k = 15 so the formula index is 16 and 2/16^(1/4) = 1.
    const std::int64_t m = 1000, b = 100;
    const std::int64_t k = 15 * m / b + 1;
    REQUIRE(epoch_of(k, b, m) == 15);
    CHECK(step_params(s, k, b, m).beta == 0.9);
    CHECK(beta_at(s, 16) == 0.9);
    CHECK(beta_at(s, 10000) == doctest::Approx(0.2));
  }

  TEST_CASE("momentum coupled with constant steps keeps beta") {
    auto s = make(ScheduleKind::MomentumCoupled, 0.1, 0.5);
    s.coupled_base = ScheduleKind::ConstantPair;
    for (std::int64_t k = 1; k < 50; ++k) CHECK(beta_at(s, k) == 0.5);
  }

  TEST_CASE("momentum coupled identity beta_k alpha_{k-1} = beta alpha_k") {
    for (auto base : {ScheduleKind::DiminishingSqrtK,
                      ScheduleKind::DiminishingShifted,
                      ScheduleKind::ConstantPair}) {
      auto s = make(ScheduleKind::MomentumCoupled, 0.3, 0.7);
      s.coupled_base = base;
      s.shift = 3;
      CHECK(beta_at(s, 1) == 0.7);
      for (std::int64_t k = 2; k <= 500; ++k)
        CHECK(beta_at(s, k) * alpha_at(s, k - 1) ==
              doctest::Approx(s.beta * alpha_at(s, k)).epsilon(1e-15));
    }
  }

  TEST_CASE("every rule is nonincreasing in k") {
    std::vector<Schedule> all;
    for (auto kind :
         {ScheduleKind::FixedHorizon, ScheduleKind::DiminishingSqrtK,
          ScheduleKind::DiminishingShifted, ScheduleKind::ConstantPair}) {
      auto s = make(kind, 0.7, 0.5);
      s.horizon = 300;
      s.shift = 5;
      all.push_back(s);
      auto c = make(ScheduleKind::MomentumCoupled, 0.7, 0.5);
      c.coupled_base = kind;
      c.horizon = 300;
      c.shift = 5;
      all.push_back(c);
    }
    for (const auto& s : all) {
      double prev = alpha_at(s, 1);
      for (std::int64_t k = 2; k <= 300; ++k) {
        const double a = alpha_at(s, k);
        CHECK(a > 0.0);
        CHECK(a <= prev);
        prev = a;
      }
    }
  }

  TEST_CASE("beta stays in [0, 1)") {
    auto s = make(ScheduleKind::DiminishingShifted, 1.0, 5.0);
    s.shift = 1;
    s.beta_cap = 0.95;
    for (std::int64_t k = 1; k < 2000; ++k) {
      const double b = beta_at(s, k);
      CHECK(b >= 0.0);
      CHECK(b < 1.0);
    }
  }

  TEST_CASE("validation") {
    CHECK_THROWS_AS(make(ScheduleKind::ConstantPair, 0.0).validate(),
                    std::invalid_argument);
    auto s = make(ScheduleKind::ConstantPair, 1.0, 0.5);
    s.beta_cap = 1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    auto f = make(ScheduleKind::FixedHorizon, 1.0);
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);  // K missing
    auto sh = make(ScheduleKind::DiminishingShifted, 1.0);
    sh.shift = 0;
    CHECK_THROWS_AS(sh.validate(), std::invalid_argument);
    auto one = make(ScheduleKind::ConstantPair, 1.0, 1.0);
    CHECK_THROWS_AS(one.validate(), std::invalid_argument);
    CHECK_NOTHROW(one.validate(true));
    CHECK_THROWS_AS(alpha_at(s, 0), std::invalid_argument);
  }

  TEST_CASE("epoch based schedules hold steps within an epoch") {
    auto s = make(ScheduleKind::DiminishingSqrtK, 5e-5, 2.0);
    s.epoch_based = true;
    const std::int64_t m = 2000, b = 100;
    for (std::int64_t k = 1; k <= 20; ++k)
      CHECK(step_params(s, k, b, m).alpha == 5e-5);
    CHECK(step_params(s, 21, b, m).alpha == 5e-5 / std::sqrt(2.0));
  }
}

TEST_SUITE("epoch") {
  TEST_CASE("examples") {
    CHECK(epoch_of(1, 100, 50000) == 0);
    CHECK(epoch_of(501, 100, 50000) == 1);
    CHECK(epoch_of(500, 100, 50000) == 0);
    CHECK_THROWS_AS(epoch_of(0, 1, 1), std::invalid_argument);
  }

  TEST_CASE("nondecreasing, one step every m/b iterations") {
    const std::int64_t m = 1200, b = 40;
    std::int64_t prev = epoch_of(1, b, m);
    CHECK(prev == 0);
    std::int64_t last_change = 1;
    for (std::int64_t k = 2; k <= 5000; ++k) {
      const auto e = epoch_of(k, b, m);
      CHECK(e >= prev);
      CHECK(e - prev <= 1);
      if (e != prev) {
        CHECK(k - last_change == m / b);
        last_change = k;
      }
      prev = e;
    }
  }
}

TEST_SUITE("config") {
  TEST_CASE("enum names round trip and errors name the options") {
    for (auto k : {ScheduleKind::FixedHorizon, ScheduleKind::MomentumCoupled})
      CHECK(schedule_kind_from_string(to_string(k)) == k);
    for (auto m : {RunMode::Sequential, RunMode::SyncParallel,
                   RunMode::AsyncParallel})
      CHECK(run_mode_from_string(to_string(m)) == m);
    try {
      run_mode_from_string("parallel");
      FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("async_parallel") != std::string::npos);
    }
  }

  TEST_CASE("delay model validation") {
    CHECK_NOTHROW(DelayModel::uniform(4).validate());
    CHECK_NOTHROW(DelayModel::distribution({0.25, 0.75}).validate());
    CHECK_THROWS(DelayModel::distribution({0.5, 0.4}).validate());
    CHECK_THROWS(DelayModel::distribution({1.5, -0.5}).validate());
    DelayModel bad = DelayModel::none();
    bad.tau = 2;
    CHECK_THROWS(bad.validate());
  }

  TEST_CASE("run config cross checks") {
    RunConfig c;
    c.schedule.alpha = 0.1;
    c.iterations = 10;
    CHECK_NOTHROW(c.validate());
    c.mode = RunMode::AsyncParallel;
    CHECK_THROWS(c.validate());  // workers = 0
    c.workers = 2;
    CHECK_NOTHROW(c.validate());
    c.delay = DelayModel::fixed(3);
    CHECK_THROWS(c.validate());
    c.mode = RunMode::Sequential;
    CHECK_NOTHROW(c.validate());
    c.delay = DelayModel::observed();
    CHECK_THROWS(c.validate());
  }

  TEST_CASE("delay stats") {
    const auto s = DelayStats::from_delays({0, 2, 2, 5}, 3);
    CHECK(s.min == 0);
    CHECK(s.max == 5);
    CHECK(s.mean == 2.25);
    CHECK(s.histogram.at(2) == 2);
    CHECK(s.discarded == 3);
  }

  TEST_CASE("iterate starts with x_prev = x_curr") {
    Iterate it(Vector{1.0, -2.0});
    CHECK(it.k == 1);
    CHECK(it.x_prev == it.x_curr);
  }
}
