#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "specsim/acceptance.hpp"
#include "specsim/cost.hpp"

using namespace specsim;
using namespace specsim::acceptance;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "specsim_test_acceptance";
  fs::create_directories(dir);
  return dir / name;
}

// Stationary distribution by Gaussian elimination on (P^T - I) pi = 0, sum = 1.
std::vector<double> solve_stationary(const std::vector<std::vector<double>>& p) {
  const std::size_t k = p.size();
  std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) a[i][j] = p[j][i] - (i == j ? 1.0 : 0.0);
  for (std::size_t j = 0; j < k; ++j) a[k - 1][j] = 1.0;
  a[k - 1][k] = 1.0;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= k; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> pi(k);
  for (std::size_t i = 0; i < k; ++i) pi[i] = a[i][k] / a[i][i];
  return pi;
}

}  // namespace

TEST_CASE("degenerate Bernoulli") {
  IidProcess always(1.0, 0.5, 10.0, false, 1);
  IidProcess never(0.0, 0.5, 10.0, false, 1);
  for (int i = 0; i < 1000; ++i) {
    CHECK(always.next_verdict().accepted);
    CHECK_FALSE(never.next_verdict().accepted);
  }
}

TEST_CASE("iid acceptance rate within the binomial 4-sigma band") {
  IidProcess p(0.7, 0.5, 10.0, false, 12345);
  const int n = 1000000;
  int accepted = 0;
  for (int i = 0; i < n; ++i) accepted += p.next_verdict().accepted;
  CHECK(std::abs(static_cast<double>(accepted) / n - 0.7) <= 0.002);
}

TEST_CASE("confidence distribution has the configured mean") {
  std::mt19937_64 rng = make_engine(3);
  const int n = 200000;
  for (double mu : {0.3, 0.6, 0.85}) {
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = sample_confidence(rng, mu, 10.0);
      REQUIRE(x >= 0.0);
      REQUIRE(x <= 1.0);
      sum += x;
      sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    // Beta(k mu, k (1 - mu)) variance is mu (1 - mu) / (k + 1).
    CHECK(mean == doctest::Approx(mu).epsilon(0.01));
    CHECK(var == doctest::Approx(mu * (1 - mu) / 11.0).epsilon(0.03));
  }
  CHECK(sample_confidence(rng, 0.0, 10.0) == 0.0);
  CHECK(sample_confidence(rng, 1.0, 10.0) == 1.0);
}

TEST_CASE("correlated mode accepts with the sampled confidence") {
  IidProcess p(0.99, 0.3, 10.0, true, 8);
  const int n = 400000;
  int accepted = 0;
  int low_accepted = 0;
  int low = 0;
  for (int i = 0; i < n; ++i) {
    const Verdict v = p.next_verdict();
    accepted += v.accepted;
    if (v.confidence < 0.2) {
      ++low;
      low_accepted += v.accepted;
    }
  }
  CHECK(static_cast<double>(accepted) / n == doctest::Approx(0.3).epsilon(0.02));
  CHECK(static_cast<double>(low_accepted) / low < 0.2);
}

TEST_CASE("seeded determinism") {
  for (const AcceptanceSpec& spec : {AcceptanceSpec{}, default_regime_spec()}) {
    auto a = make_process(spec, 77);
    auto b = make_process(spec, 77);
    auto c = make_process(spec, 78);
    bool differs = false;
    for (int step = 0; step < 500; ++step) {
      a->begin_step();
      b->begin_step();
      c->begin_step();
      for (int i = 0; i < 4; ++i) {
        const Verdict va = a->next_verdict();
        CHECK(va == b->next_verdict());
        differs |= !(va == c->next_verdict());
      }
    }
    CHECK(differs);
  }
}

TEST_CASE("power-iteration stationary distribution matches a linear solve") {
  const std::vector<std::vector<double>> p = {{0.8, 0.15, 0.05}, {0.1, 0.7, 0.2}, {0.3, 0.3, 0.4}};
  const auto pi = stationary_distribution(p);
  const auto expected = solve_stationary(p);
  for (std::size_t i = 0; i < 3; ++i) CHECK(pi[i] == doctest::Approx(expected[i]).epsilon(1e-10));
}

TEST_CASE("regime occupancy passes a chi-square test against the stationary law") {
  const std::vector<std::vector<double>> p = {{0.8, 0.15, 0.05}, {0.1, 0.7, 0.2}, {0.3, 0.3, 0.4}};
  RegimeProcess process({{"easy", 0.9, 0.85}, {"moderate", 0.6, 0.6}, {"difficult", 0.2, 0.3}}, p, 10.0,
                        false, 2024);
  const int steps = 100000;
  std::vector<double> counts(3, 0.0);
  for (int i = 0; i < steps; ++i) {
    process.begin_step();
    counts[process.current_regime()] += 1.0;
  }
  const auto pi = solve_stationary(p);
  // Successive regimes are correlated; scale the statistic by the chain's
  // integrated autocorrelation, bounded here by (1 + lambda) / (1 - lambda)
  // with |lambda| the second-largest eigenvalue modulus (0.630 for this P).
  double chi2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double e = pi[i] * steps;
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
  }
  const double inflation = (1.0 + 0.631) / (1.0 - 0.631);
  // 99.9% quantile of chi-square with 2 degrees of freedom is 13.82.
  CHECK(chi2 / inflation < 13.82);
}

TEST_CASE("regime switches once per step, not per token") {
  AcceptanceSpec spec = default_regime_spec();
  spec.regimes = {{"accept", 1.0, 0.5}, {"reject", 0.0, 0.5}};
  spec.transition = {{0.5, 0.5}, {0.5, 0.5}};
  auto process = make_process(spec, 4);
  for (int step = 0; step < 2000; ++step) {
    process->begin_step();
    const bool first = process->next_verdict().accepted;
    for (int i = 0; i < 7; ++i) CHECK(process->next_verdict().accepted == first);
  }
}

TEST_CASE("iid leading-run law agrees with the exact expectation") {
  for (double alpha : {0.3, 0.8}) {
    for (int gamma : {1, 5}) {
      IidProcess p(alpha, 0.5, 10.0, false, 1000 + gamma);
      const int steps = 100000;
      double sum = 0.0;
      double sq = 0.0;
      for (int s = 0; s < steps; ++s) {
        p.begin_step();
        int run = 0;
        bool broken = false;
        for (int i = 0; i < gamma; ++i) {
          const bool ok = p.next_verdict().accepted;
          if (!broken && ok) ++run;
          else broken = true;
        }
        sum += run + 1;
        sq += (run + 1.0) * (run + 1.0);
      }
      const double mean = sum / steps;
      const double se = std::sqrt((sq / steps - mean * mean) / steps);
      CHECK(std::abs(mean - cost::exact_expected_accepted(alpha, gamma)) <= 4.0 * se);
    }
  }
}

TEST_CASE("replay returns the recorded pairs verbatim then stops") {
  std::vector<TraceRecord> records = {
      {0, {true, true, false}, {0.9, 0.8, 0.1}},
      {1, {false}, {0.2}},
      {2, {}, {}},
  };
  ReplayProcess p(records);
  for (const auto& r : records) {
    REQUIRE(p.begin_step());
    for (std::size_t i = 0; i < r.accepts.size(); ++i) {
      const Verdict v = p.next_verdict();
      CHECK(v.accepted == r.accepts[i]);
      CHECK(v.confidence == r.confidences[i]);
    }
    // Past the recorded window: rejected.
    CHECK(p.next_verdict() == Verdict{false, 0.0});
  }
  CHECK_FALSE(p.begin_step());
  CHECK(p.steps_replayed() == 3);
}

TEST_CASE("trace files") {
  SUBCASE("well-formed two-line file") {
    std::ofstream(scratch("two.jsonl")) << R"({"step": 0, "accepts": [true, false], "confidences": [0.9, 0.3]})"
                                        << "\n"
                                        << R"({"step": 1, "accepts": [], "confidences": []})" << "\n";
    const auto records = load_trace(scratch("two.jsonl"));
    REQUIRE(records.size() == 2);
    CHECK(records[0].accepts == std::vector<bool>{true, false});
    CHECK(records[0].confidences == std::vector<double>{0.9, 0.3});
    CHECK(records[1].step_index == 1);
  }
  SUBCASE("length mismatch names the line") {
    std::ofstream(scratch("mismatch.jsonl"))
        << R"({"step": 0, "accepts": [true], "confidences": [0.9]})" << "\n"
        << R"({"step": 1, "accepts": [true, true, false], "confidences": [0.9, 0.3]})" << "\n";
    try {
      load_trace(scratch("mismatch.jsonl"));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field().find("line 2") != std::string::npos);
      CHECK(e.message().find("length mismatch") != std::string::npos);
    }
  }
  SUBCASE("malformed JSON names the line") {
    std::ofstream(scratch("broken.jsonl")) << "\n{\"step\": 0, \"accepts\": [tru\n";
    CHECK_THROWS_WITH_AS(load_trace(scratch("broken.jsonl")), doctest::Contains("line 2"), ConfigError);
  }
  SUBCASE("out-of-range confidence") {
    std::istringstream in(R"({"step": 0, "accepts": [true], "confidences": [1.5]})");
    CHECK_THROWS_AS(read_trace(in), ConfigError);
  }
  SUBCASE("empty file gives no records") {
    std::ofstream(scratch("empty.jsonl")).close();
    CHECK(load_trace(scratch("empty.jsonl")).empty());
  }
  SUBCASE("missing file is an I/O error") {
    CHECK_THROWS_AS(load_trace(scratch("nope.jsonl")), IoError);
  }
  SUBCASE("write then read is lossless") {
    IidProcess p(0.6, 0.55, 10.0, true, 9);
    std::vector<TraceRecord> records;
    for (int s = 0; s < 200; ++s) {
      TraceRecord r{s, {}, {}};
      for (int i = 0; i < s % 7; ++i) {
        const Verdict v = p.next_verdict();
        r.accepts.push_back(v.accepted);
        r.confidences.push_back(v.confidence);
      }
      records.push_back(r);
    }
    write_trace(scratch("roundtrip.jsonl"), records);
    CHECK(load_trace(scratch("roundtrip.jsonl")) == records);
  }
  SUBCASE("the committed example validates") {
    const auto records = load_trace(fs::path(SPECSIM_SOURCE_DIR) / "docs" / "trace_example.jsonl");
    CHECK(records.size() >= 3);
  }
}

TEST_CASE("invalid regime specs") {
  AcceptanceSpec spec = default_regime_spec();
  spec.transition[0] = {0.5, 0.4, 0.05};
  CHECK_THROWS_AS(make_process(spec, 1), ConfigError);
  spec.regimes.clear();
  spec.transition.clear();
  CHECK_THROWS_AS(make_process(spec, 1), ConfigError);
}
