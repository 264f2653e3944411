#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "dphaser/bench.hpp"

using namespace dphaser;

// The acceptance sweep uses n up to 1024 with 100 seeds; these are smaller
// smoke checks of the same bounds so ctest stays fast.

TEST_CASE("aggregation depth stays within 4*log2(n)") {
  auto rows = bench_depth({16, 64, 256}, 20, 0.5);
  for (const auto& r : rows) {
    CAPTURE(r.n);
    CHECK(r.value <= r.bound);
    CHECK(r.value > 0);
  }
}

TEST_CASE("insert message count stays within 3*log2(n) + 6") {
  auto rows = bench_insert({16, 64, 256}, 20, 0.5);
  for (const auto& r : rows) {
    CAPTURE(r.n);
    CAPTURE(r.value);
    CHECK(r.value <= r.bound);
    CHECK(r.value >= 4);  // LINK + ATTACHED + 2 ACKs at minimum
  }
}

TEST_CASE("delete message count stays within 2*mean_height + 2") {
  auto rows = bench_delete({16, 64, 256}, 20, 0.5);
  for (const auto& r : rows) {
    CAPTURE(r.n);
    CAPTURE(r.value);
    CHECK(r.value <= r.bound);
    CHECK(r.value >= 2);  // one UNLINK/ACK pair at minimum
  }
}

TEST_CASE("promotion cost is monotone and near a*log2(C)+b") {
  auto rows = bench_promote({4, 16, 64}, 20, 0.5);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].value <= rows[1].value);
  CHECK(rows[1].value <= rows[2].value);
  std::vector<std::pair<int, double>> pts;
  for (const auto& r : rows) pts.push_back({r.c, r.value});
  auto [a, b] = fit_log2(pts);
  CHECK(a > 0);  // grows with C
  for (const auto& r : rows) {
    double predicted = a * std::log2(double(r.c)) + b;
    CHECK(std::abs(predicted - r.value) <= 0.25 * r.value + 1.0);
  }
}

TEST_CASE("csv output carries the documented schema") {
  auto rows = bench_depth({16}, 2, 0.5);
  std::string csv = bench_csv(rows);
  CHECK(csv.rfind("kind,n,c,p,seeds,metric,value,bound\n", 0) == 0);
  CHECK(csv.find("depth,16,0,0.5,2,avg_depth,") != std::string::npos);
}
