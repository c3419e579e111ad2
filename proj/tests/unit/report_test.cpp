// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <json.hpp>

#include "wsibench/csv.hpp"
#include "wsibench/error.hpp"
#include "wsibench/report.hpp"
#include "wsibench/rng.hpp"

namespace wsibench {
namespace {

template <class F>
void expect_kind(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

NdsResult hand_result() {
  Eigen::MatrixXd a(2, 2);
  a << 0.8, 0.6, 0.7, 0.5;
  auto grid = make_grid(a, {"e1", "e2"});
  grid.task = "t1";
  return nds_exact(grid);
}

TEST(Report, MeanStdFormat) {
  EXPECT_EQ(format_mean_std(0.0, 0.0), "0.000 ± 0.000");
  EXPECT_EQ(format_mean_std(0.12349, 0.0306), "0.123 ± 0.031");
}

TEST(Report, SingleExtractorIsOneRowOfZeros) {
  Eigen::MatrixXd a(1, 3);
  a << 0.7, 0.8, 0.9;
  auto grid = make_grid(a, {"only"});
  grid.task = "t";
  const auto r = report_nds({nds_exact(grid)});
  EXPECT_EQ(r.human, "| extractor | t |\n| --- | ---: |\n| only | **0.000 ± 0.000** |\n");
  const auto t = csv::parse(r.csv);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].second[2], "0");
}

TEST(Report, HandDerivedGridRendersRowMeans) {
  // Trial gaps {0, 0, 0.1, 0} and {0.1, 0.3, 0, 0.1}: population stds 0.0433 and 0.1090.
  const auto r = report_nds({hand_result()});
  EXPECT_NE(r.human.find("| e1 | **0.025 ± 0.043** |"), std::string::npos) << r.human;
  EXPECT_NE(r.human.find("| e2 | 0.125 ± 0.109 |"), std::string::npos) << r.human;
  const auto t = csv::parse(r.csv);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_NEAR(csv::parse_double(t.rows[0].second[2], 0), 0.025, 1e-15);
  EXPECT_NEAR(csv::parse_double(t.rows[1].second[2], 0), 0.125, 1e-15);
}

TEST(Report, MachineOutputIsFullPrecision) {
  const auto res = hand_result();
  const auto r = report_nds({res});
  const auto t = csv::parse(r.csv);
  EXPECT_EQ(csv::parse_double(t.rows[1].second[3], 0), res.per_extractor[1].stddev);
  const auto j = nlohmann::json::parse(r.json);
  EXPECT_EQ(j["cells"][1]["std"].get<double>(), res.per_extractor[1].stddev);
}

TEST(Report, AverageColumnAndQualifiedLabels) {
  auto a = hand_result(), b = hand_result();
  b.model = ModelKind::MeanPool;
  const auto r = report_nds({a, b});
  const auto j = nlohmann::json::parse(r.json);
  EXPECT_EQ(j["columns"].size(), 3u);
  EXPECT_EQ(j["columns"][2], "Average");
  EXPECT_NE(j["columns"][0].get<std::string>(), j["columns"][1].get<std::string>());
  EXPECT_TRUE(j["cells"][4].contains("across_task_std"));
}

TEST(Report, BoldMatchesCsvArgminOnRandomTables) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<NdsResult> results;
    const int tasks = 1 + static_cast<int>(rng.below(4));
    const int f = 1 + static_cast<int>(rng.below(5)), s = 1 + static_cast<int>(rng.below(4));
    std::vector<std::string> names;
    for (int i = 0; i < f; ++i) names.push_back("x" + std::to_string(i));
    for (int k = 0; k < tasks; ++k) {
      Eigen::MatrixXd a(f, s);
      for (int i = 0; i < f; ++i)
        for (int j = 0; j < s; ++j) a(i, j) = rng.uniform();
      auto g = make_grid(a, names);
      g.task = "task" + std::to_string(k);
      results.push_back(nds_exact(g));
    }
    const auto r = report_nds(results);
    const auto t = csv::parse(r.csv);
    std::map<std::string, double> minima;
    for (const auto& [line, row] : t.rows) {
      const double m = csv::parse_double(row[2], line);
      auto [it, fresh] = minima.emplace(row[0], m);
      if (!fresh) it->second = std::min(it->second, m);
    }
    for (const auto& [line, row] : t.rows) {
      const bool is_min = csv::parse_double(row[2], line) == minima[row[0]];
      EXPECT_EQ(row[5], is_min ? "1" : "0");
    }
    // Bold cells per column in the human table.
    std::size_t bold = 0, expected = 0;
    for (std::size_t p = r.human.find("**"); p != std::string::npos; p = r.human.find("**", p + 2)) ++bold;
    for (const auto& [line, row] : t.rows) expected += row[5] == "1";
    EXPECT_EQ(bold, 2 * expected);
  }
}

TEST(Report, EmptyInputsRaise) {
  expect_kind(ErrorKind::EmptyReport, [] { report_nds({}); });
  expect_kind(ErrorKind::EmptyReport, [] { report_task_average({}); });
  expect_kind(ErrorKind::EmptyReport, [] { report_bootstrap({}); });
  expect_kind(ErrorKind::EmptyReport, [] { report_latent({}); });
}

TEST(Report, BootstrapAndLatentTables) {
  BootstrapDistribution d;
  d.extractor = "e";
  d.condition_a = "none";
  d.condition_b = "all";
  d.pairs = 1;
  d.resamples = 4;
  d.differences = {0.1, -0.1, 0.2, 0.0};
  d.summary = summarize(d.differences);
  const auto r = report_bootstrap({d});
  EXPECT_NE(r.human.find("| e | none - all | 0.050 ± 0.112 |"), std::string::npos) << r.human;
  const auto j = nlohmann::json::parse(r.json);
  EXPECT_EQ(j[0]["differences"].get<std::vector<double>>(), d.differences);

  DisplacementSummary s;
  s.variants.push_back({"flip_h", distance_stats(std::vector<double>{0.1, 0.3}), std::nullopt, 2, 0});
  s.dispersion = 0.5;
  const auto l = report_latent(s);
  EXPECT_NE(l.human.find("| flip_h | 2 | 0.200 |"), std::string::npos) << l.human;
  EXPECT_NE(l.human.find("dispersion: 0.500"), std::string::npos);
}

}  // namespace
}  // namespace wsibench
