#pragma once

// Cross-run comparison tables and static SVG figures built from run
// directories written by train / evaluate_run.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pcdgan/eval.hpp"

namespace pcdgan::app {

struct RunSummary {
  std::string run_dir;
  std::string run_id;
  std::string model;
  int example_id = 0;
  std::uint64_t seed = 0;
  eval::MetricStats label_error, likelihood, diversity;
  std::size_t modes_covered = 0;
};

// Reads <run_dir>/summary.json. Throws LoadError when it is missing.
RunSummary read_summary(const std::string& run_dir);

// Seed aggregate for one (example, model) pair. Means and stds are taken over
// the per-run means.
struct GroupSummary {
  int example_id = 0;
  std::string model;
  std::size_t runs = 0;
  eval::MetricStats label_error, likelihood, diversity;
  double modes_covered = 0.0;
};

std::vector<GroupSummary> group_summaries(const std::vector<RunSummary>& runs);

// Writes one row per run followed by one row per (example, model) group.
std::vector<GroupSummary> compare(const std::vector<std::string>& run_dirs,
                                  const std::string& out_csv);

// Writes scatter_<run>.svg for every run with samples_c0.4.csv, and one
// metric_<name>.svg per metric with a mean +- std band for each run's eval.csv.
// Returns the written paths. Missing inputs raise LoadError.
std::vector<std::string> emit_plots(const std::vector<std::string>& run_dirs,
                                    const std::string& out_dir);

}  // namespace pcdgan::app
