// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/report.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>

#include "wsibench/csv.hpp"
#include "wsibench/error.hpp"

namespace wsibench {

namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string markdown(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (const auto& c : cells) s += " " + c + " |";
    return s + "\n";
  };
  std::string out = line(header) + "|";
  for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

struct Cell {
  double mean = 0.0;
  double stddev = 0.0;
  std::optional<double> across_task_std;
};

// Extractor-by-column grid of mean/std cells with per-column bold minima.
struct MeanStdTable {
  std::vector<std::string> columns;
  std::vector<std::string> extractors;
  std::map<std::pair<std::size_t, std::string>, Cell> cells;  // (column, extractor)

  Report render() const {
    std::vector<std::vector<std::string>> rows;
    std::map<std::size_t, double> minima;
    for (const auto& [key, cell] : cells) {
      auto [it, fresh] = minima.emplace(key.first, cell.mean);
      if (!fresh) it->second = std::min(it->second, cell.mean);
    }
    for (const auto& e : extractors) {
      std::vector<std::string> row{e};
      for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto it = cells.find({c, e});
        if (it == cells.end()) {
          row.emplace_back("");
          continue;
        }
        const std::string text = format_mean_std(it->second.mean, it->second.stddev);
        row.push_back(it->second.mean == minima.at(c) ? "**" + text + "**" : text);
      }
      rows.push_back(std::move(row));
    }
    std::vector<std::string> header{"extractor"};
    header.insert(header.end(), columns.begin(), columns.end());

    Report r;
    r.human = markdown(header, rows);
    r.csv = "column,extractor,mean,std,across_task_std,is_column_min\n";
    nlohmann::ordered_json j;
    j["columns"] = columns;
    j["extractors"] = extractors;
    auto& arr = j["cells"] = nlohmann::json::array();
    for (std::size_t c = 0; c < columns.size(); ++c)
      for (const auto& e : extractors) {
        const auto it = cells.find({c, e});
        if (it == cells.end()) continue;
        const Cell& cell = it->second;
        const bool is_min = cell.mean == minima.at(c);
        r.csv += csv::join({columns[c], e, csv::format_double(cell.mean), csv::format_double(cell.stddev),
                            cell.across_task_std ? csv::format_double(*cell.across_task_std) : "",
                            is_min ? "1" : "0"}) +
                 "\n";
        nlohmann::ordered_json o{{"column", columns[c]}, {"extractor", e}, {"mean", cell.mean}, {"std", cell.stddev}};
        if (cell.across_task_std) o["across_task_std"] = *cell.across_task_std;
        o["is_column_min"] = is_min;
        arr.push_back(std::move(o));
      }
    r.json = j.dump(2) + "\n";
    return r;
  }
};

void add_average(MeanStdTable& t, const TaskAverage& avg) {
  t.columns.emplace_back("Average");
  const std::size_t c = t.columns.size() - 1;
  for (const auto& s : avg.per_extractor) {
    if (std::find(t.extractors.begin(), t.extractors.end(), s.extractor) == t.extractors.end())
      t.extractors.push_back(s.extractor);
    t.cells[{c, s.extractor}] = {s.mean_of_means, s.pooled_std, s.across_task_std};
  }
}

nlohmann::ordered_json spread_json(const SpreadSummary& s) {
  return {{"p2_5", s.p2_5}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"p97_5", s.p97_5}, {"mean", s.mean}};
}

}  // namespace

std::string format_mean_std(double mean, double stddev) { return fixed3(mean) + " ± " + fixed3(stddev); }

Report report_nds(const std::vector<NdsResult>& results) {
  if (results.empty()) fail(ErrorKind::EmptyReport, "no NDS results to report");
  std::map<std::string, int> task_uses;
  for (const auto& r : results) ++task_uses[r.task];
  MeanStdTable t;
  for (const auto& r : results) {
    std::string label = r.task;
    if (task_uses[r.task] > 1)
      label += " (" + std::string(to_string(r.model)) + ", " + std::string(to_string(r.augmentation)) + ", " +
               std::string(to_string(r.magnification)) + ")";
    t.columns.push_back(label);
    if (r.per_extractor.empty()) fail(ErrorKind::EmptyReport, "NDS result for " + r.task + " has no rows");
    for (const auto& s : r.per_extractor) {
      if (std::find(t.extractors.begin(), t.extractors.end(), s.extractor) == t.extractors.end())
        t.extractors.push_back(s.extractor);
      t.cells[{t.columns.size() - 1, s.extractor}] = {s.mean, s.stddev, std::nullopt};
    }
  }
  if (results.size() > 1) add_average(t, task_average(results));
  return t.render();
}

Report report_task_average(const TaskAverage& average) {
  if (average.per_extractor.empty()) fail(ErrorKind::EmptyReport, "task average has no rows");
  MeanStdTable t;
  add_average(t, average);
  return t.render();
}

Report report_bootstrap(const std::vector<BootstrapDistribution>& distributions) {
  if (distributions.empty()) fail(ErrorKind::EmptyReport, "no bootstrap distributions to report");
  std::vector<std::vector<std::string>> rows;
  Report r;
  r.csv = "extractor,comparison,pairs,resamples,n,mean,std,p2_5,q1,median,q3,p97_5\n";
  nlohmann::ordered_json j = nlohmann::json::array();
  for (const auto& d : distributions) {
    if (d.differences.empty()) fail(ErrorKind::EmptyReport, "bootstrap distribution for " + d.extractor + " is empty");
    WelfordAccumulator acc;
    for (double x : d.differences) acc.push(x);
    const SpreadSummary& s = d.summary;
    const std::string comparison = d.condition_a + " - " + d.condition_b;
    rows.push_back({d.extractor, comparison, format_mean_std(acc.mean(), acc.stddev()), fixed3(s.median),
                    "[" + fixed3(s.q1) + ", " + fixed3(s.q3) + "]", "[" + fixed3(s.p2_5) + ", " + fixed3(s.p97_5) + "]"});
    r.csv += csv::join({d.extractor, comparison, std::to_string(d.pairs), std::to_string(d.resamples),
                        std::to_string(d.differences.size()), csv::format_double(acc.mean()),
                        csv::format_double(acc.stddev()), csv::format_double(s.p2_5), csv::format_double(s.q1),
                        csv::format_double(s.median), csv::format_double(s.q3), csv::format_double(s.p97_5)}) +
             "\n";
    nlohmann::ordered_json o;
    o["extractor"] = d.extractor;
    o["condition_a"] = d.condition_a;
    o["condition_b"] = d.condition_b;
    o["pairs"] = d.pairs;
    o["resamples"] = d.resamples;
    o["std"] = acc.stddev();
    o["summary"] = spread_json(s);
    o["differences"] = d.differences;
    j.push_back(std::move(o));
  }
  r.human = markdown({"extractor", "comparison", "mean ± std", "median", "box [q1, q3]", "whiskers [p2.5, p97.5]"}, rows);
  r.json = j.dump(2) + "\n";
  return r;
}

Report report_latent(const DisplacementSummary& summary) {
  if (summary.variants.empty() && summary.same_class.n == 0 && summary.cross_class.n == 0)
    fail(ErrorKind::EmptyReport, "latent summary holds no distances");
  std::vector<std::vector<std::string>> rows;
  Report r;
  r.csv = "series,n,p2_5,q1,median,q3,p97_5,mean,normalised_median\n";
  auto add = [&](const std::string& name, const DistanceStats& st, std::optional<double> norm_median) {
    const auto& s = st.spread;
    rows.push_back({name, std::to_string(st.n), fixed3(s.median), "[" + fixed3(s.q1) + ", " + fixed3(s.q3) + "]",
                    "[" + fixed3(s.p2_5) + ", " + fixed3(s.p97_5) + "]", norm_median ? fixed3(*norm_median) : ""});
    r.csv += csv::join({name, std::to_string(st.n), csv::format_double(s.p2_5), csv::format_double(s.q1),
                        csv::format_double(s.median), csv::format_double(s.q3), csv::format_double(s.p97_5),
                        csv::format_double(s.mean), norm_median ? csv::format_double(*norm_median) : ""}) +
             "\n";
  };
  for (const auto& v : summary.variants)
    add(v.variant, v.raw, v.normalised ? std::optional(v.normalised->spread.median) : std::nullopt);
  add("same_class_random", summary.same_class, std::nullopt);
  add("cross_class_random", summary.cross_class, std::nullopt);
  r.human = markdown({"series", "n", "median", "box [q1, q3]", "whiskers [p2.5, p97.5]", "median / dispersion"}, rows) +
            "\ndispersion: " + fixed3(summary.dispersion) + "\n";
  r.json = summary_json(summary);
  return r;
}

}  // namespace wsibench
