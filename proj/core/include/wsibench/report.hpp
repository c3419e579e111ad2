// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "wsibench/bootstrap.hpp"
#include "wsibench/latent.hpp"
#include "wsibench/nds.hpp"

namespace wsibench {

// Rendered output: a markdown table for people, CSV and JSON at full
// precision for machines.
struct Report {
  std::string human;
  std::string csv;
  std::string json;
};

// "mean ± std" at 3 decimals.
std::string format_mean_std(double mean, double stddev);

// Rows are extractors, one column per result plus "Average" when there are
// two or more. The lowest mean in each column is wrapped in **bold**. Column
// labels are task names, qualified by model/augmentation/magnification when a
// task name repeats. Throws EmptyReport on no results.
Report report_nds(const std::vector<NdsResult>& results);
Report report_task_average(const TaskAverage& average);
Report report_bootstrap(const std::vector<BootstrapDistribution>& distributions);
Report report_latent(const DisplacementSummary& summary);

}  // namespace wsibench
