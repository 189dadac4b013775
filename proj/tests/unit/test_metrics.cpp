#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oostraj/error.hpp"
#include "oostraj/metrics.hpp"
#include "scenes.hpp"

using namespace oostraj;
using geometry::PixelPoint;
using metrics::Distance;

namespace {

std::vector<PixelPoint> random_track(Rng& rng, int n) {
  std::vector<PixelPoint> out;
  for (int i = 0; i < n; ++i) out.push_back({rng.uniform(0, 640), rng.uniform(0, 480)});
  return out;
}

}  // namespace

TEST_CASE("mse_t") {
  Rng rng(1);
  const auto a = random_track(rng, 12);
  const auto b = random_track(rng, 12);
  CHECK(metrics::mse_t(a, a) == 0.0);
  CHECK(metrics::mse_t(a, b) == metrics::mse_t(b, a));
  CHECK(metrics::mse_t(a, b) > 0.0);

  SUBCASE("3-4-5 offset") {
    auto shifted = a;
    for (auto& p : shifted) {
      p.u += 3.0;
      p.v += 4.0;
    }
    CHECK(metrics::mse_t(shifted, a) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(metrics::mse_t(shifted, a, Distance::Squared) == doctest::Approx(25.0).epsilon(1e-12));
  }
  SUBCASE("translation covariance") {
    auto sa = a, sb = b;
    for (auto* v : {&sa, &sb})
      for (auto& p : *v) {
        p.u -= 17.25;
        p.v += 8.5;
      }
    CHECK(metrics::mse_t(sa, sb) == doctest::Approx(metrics::mse_t(a, b)).epsilon(1e-12));
  }
  SUBCASE("single point") {
    const std::vector<PixelPoint> p{{1, 2}}, q{{4, 6}};
    CHECK(metrics::mse_t(p, q) == 5.0);
  }
  SUBCASE("errors") {
    try {
      metrics::mse_t(a, std::span(b).first(5));
      FAIL("expected LengthMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::LengthMismatch);
    }
    try {
      metrics::mse_t({}, {});
      FAIL("expected EmptyTrajectory");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EmptyTrajectory);
    }
  }
  CHECK(metrics::parse_distance("squared") == Distance::Squared);
  CHECK_THROWS_AS(metrics::parse_distance("manhattan"), Error);
}

TEST_CASE("evaluate") {
  const auto scenes = testing::scenes(testing::small_sim(6, 5, 2.0), 40, 6);
  SUBCASE("perfect method scores zero") {
    const auto row = metrics::evaluate("oracle", metrics::ground_truth, scenes);
    CHECK(row.mse_d == 0.0);
    CHECK(row.mse_p == 0.0);
    CHECK(row.sum == 0.0);
    CHECK(row.scenes == 6);
  }
  SUBCASE("single scene reduces to mse_t") {
    const auto shifted = [](const sim::Scene& s) {
      auto p = metrics::ground_truth(s);
      for (auto& q : p.denoised) q.u += 3.0;
      for (auto& q : p.future) q.v -= 7.0;
      return p;
    };
    const auto row = metrics::evaluate("shift", shifted, {scenes[2]});
    CHECK(row.mse_d == doctest::Approx(3.0));
    CHECK(row.mse_p == doctest::Approx(7.0));
    CHECK(row.per_scene.size() == 1);
    CHECK(row.per_scene[0].seed == scenes[2].seed);
  }
  SUBCASE("independent of scene order, sum = D + P") {
    const auto noisy = [](const sim::Scene& s) {
      auto p = metrics::ground_truth(s);
      Rng rng(s.seed);
      for (auto* v : {&p.denoised, &p.future})
        for (auto& q : *v) q.u += rng.normal(0, 5);
      return p;
    };
    auto reversed = scenes;
    std::reverse(reversed.begin(), reversed.end());
    const auto a = metrics::evaluate("n", noisy, scenes);
    const auto b = metrics::evaluate("n", noisy, reversed);
    CHECK(a.sum == b.sum);
    CHECK(a.sum == a.mse_d + a.mse_p);
  }
  SUBCASE("failures name the scene") {
    const auto bad = [](const sim::Scene& s) {
      auto p = metrics::ground_truth(s);
      if (s.seed == 43) p.future.pop_back();
      return p;
    };
    try {
      metrics::evaluate("bad", bad, scenes);
      FAIL("expected LengthMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::LengthMismatch);
      CHECK(std::string(e.what()).find("scene 43") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(metrics::evaluate("x", metrics::ground_truth, {}), Error);
}

TEST_CASE("reports") {
  metrics::Report r;
  r.title = "Noisy benchmark";
  r.split = "test";
  r.config_hash = "abc123";
  r.seeds = {0, 1, 2};
  for (const char* m : {"ours", "lstm_direct", "lstm_two_stage", "lstm_plus_vpd"}) {
    metrics::EvalRow row;
    row.method = m;
    row.mse_d = 0.1 + 13.42 * (1 + row.method.size() % 3);
    row.mse_p = 1.0 / 3.0 + 13.83;
    row.sum = row.mse_d + row.mse_p;
    row.scenes = 16;
    row.params = 1234;
    r.rows.push_back(row);
  }

  SUBCASE("csv keeps SUM = D + P after printing") {
    std::istringstream in(metrics::to_csv(r));
    std::string line;
    int data = 0;
    while (std::getline(in, line)) {
      if (line.starts_with("#") || line.starts_with("method")) continue;
      std::vector<std::string> cols;
      std::stringstream ls(line);
      for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
      REQUIRE(cols.size() == 7);
      CHECK(std::abs(std::stod(cols[4]) - std::stod(cols[5]) - std::stod(cols[6])) <= 1e-9);
      ++data;
    }
    CHECK(data == 4);
    CHECK(metrics::to_csv(r).find("seeds=0 1 2") != std::string::npos);
  }
  SUBCASE("markdown has the composition grid") {
    const auto md = metrics::to_markdown(r);
    CHECK(md.find("| Method | SUM | MSE-D | MSE-P | Params |") != std::string::npos);
    CHECK(md.find("+ 2 Stage SUM") != std::string::npos);
    CHECK(md.find("| lstm |") != std::string::npos);
    CHECK(md.find("| transformer |") != std::string::npos);
  }
  SUBCASE("files") {
    const auto dir = std::filesystem::temp_directory_path() / "oostraj_test_reports";
    std::filesystem::create_directories(dir);
    metrics::write_report(dir / "table", r);
    CHECK(std::filesystem::exists(dir / "table.csv"));
    CHECK(std::filesystem::exists(dir / "table.md"));
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(metrics::write_report(dir / "missing" / "table", r), Error);
  }
}
