#include <doctest.h>

#include <cmath>

#include "cad/dte.hpp"
#include "cad/error.hpp"

using namespace cad;

TEST_CASE("ramp values") {
  ThresholdSchedule s;
  s.beta = 250.0;
  CHECK(ramp(s, 0.0) == 0.0);
  CHECK(ramp(s, 250.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  CHECK(ramp(s, 2500.0) == doctest::Approx(0.9999546).epsilon(1e-7));
  try {
    ramp(s, -1.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidIteration);
  }
}

TEST_CASE("thresholds with the default bounds") {
  ThresholdSchedule s;  // 0.01, 0.75, 1, 16
  s.beta = 1000.0;
  auto start = thresholds_at(s, 0.0);
  CHECK(start.c_threshold == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(start.r_threshold == 1);

  auto mid = thresholds_at(s, 1000.0);
  CHECK(mid.c_threshold == doctest::Approx(0.01 + 0.74 * (1.0 - std::exp(-1.0))).epsilon(1e-12));
  CHECK(mid.c_threshold == doctest::Approx(0.47777).epsilon(1e-5));
  CHECK(mid.r_threshold == 10);

  auto late = thresholds_at(s, 1e6);
  CHECK(late.c_threshold == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(late.c_threshold <= 0.75);
  CHECK(late.r_threshold == 16);
}

TEST_CASE("size cap rounds half up") {
  ThresholdSchedule s{0.0, 1.0, 1, 2, 1.0};
  // psi = 0.5 exactly at t = beta·ln 2 gives r = 1.5 → 2.
  CHECK(thresholds_at(s, std::log(2.0) * 1.0000001).r_threshold == 2);
  CHECK(thresholds_at(s, std::log(2.0) * 0.99).r_threshold == 1);
}

TEST_CASE("property: thresholds never decrease and stay in bounds") {
  ThresholdSchedule s;
  s.beta = 137.0;
  Thresholds prev = thresholds_at(s, 0.0);
  double prev_psi = 0.0;
  for (int t = 1; t <= 1370; ++t) {
    const double psi = ramp(s, t);
    CHECK(psi > prev_psi);
    CHECK(psi < 1.0);
    const auto cur = thresholds_at(s, t);
    CHECK(cur.c_threshold >= prev.c_threshold);
    CHECK(cur.r_threshold >= prev.r_threshold);
    CHECK(cur.c_threshold >= s.c_min);
    CHECK(cur.c_threshold < s.c_max);
    CHECK(cur.r_threshold >= s.r_min);
    CHECK(cur.r_threshold <= s.r_max);
    prev = cur;
    prev_psi = psi;
  }
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS((ThresholdSchedule{0.5, 0.4, 1, 16, 10.0}.validate()), Error);
  CHECK_THROWS_AS((ThresholdSchedule{0.0, 0.4, 0, 16, 10.0}.validate()), Error);
  CHECK_THROWS_AS((ThresholdSchedule{0.0, 0.4, 4, 3, 10.0}.validate()), Error);
  CHECK_THROWS_AS((ThresholdSchedule{0.0, 0.4, 1, 16, 0.0}.validate()), Error);
  CHECK_NOTHROW(ThresholdSchedule{}.validate());
  CHECK(default_beta(300) == 60.0);
  CHECK(1.0 - std::exp(-300.0 / default_beta(300)) == doctest::Approx(0.993262).epsilon(1e-6));
}
