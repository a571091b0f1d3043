#pragma once

// Evaluation metrics for conditional generators on the 2-D benchmarks and the
// condition-sweep protocol that aggregates them.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcdgan/nn.hpp"
#include "pcdgan/rng.hpp"
#include "pcdgan/synthetic.hpp"

namespace pcdgan::eval {

// Mean |c_i - p_i| in normalized label space.
double label_error(std::span<const double> conditions, std::span<const double> predicted);
// Same, with one condition shared by every prediction.
double label_error(double condition, std::span<const double> predicted);

struct KdeConfig {
  std::size_t grid_points = 20;  // log-spaced bandwidths
  double h_min = 1e-3;
  double h_max = 1.0;
  std::size_t folds = 5;
};

struct LikelihoodResult {
  double density = 0.0;
  double bandwidth = 0.0;
  bool degenerate = false;  // all labels identical, bandwidth floored
};

// Gaussian KDE of `labels` evaluated at `condition`. The bandwidth maximizes
// the k-fold cross-validated mean held-out log likelihood over the grid.
// Labels are sorted and dealt into folds by a fixed shuffle, so the result
// does not depend on their order.
LikelihoodResult likelihood_score(double condition, std::span<const double> labels,
                                  const KdeConfig& cfg = {});

// Density of a Gaussian KDE with bandwidth h at x.
double kde_density(double x, std::span<const double> labels, double h);

struct DiversityResult {
  double score = 0.0;
  std::size_t degenerate_subsets = 0;
};

// Mean log det of the RBF similarity matrix over n_subsets random subsets
// (without replacement) of `points` ([N, dim] row-major). Subsets whose
// matrix is numerically singular get 1e-10 added to the diagonal (raised
// tenfold until the factorization succeeds) and are counted.
DiversityResult diversity_score(std::span<const double> points, std::size_t dim, double bandwidth,
                                std::size_t subset_size, std::size_t n_subsets, Rng& rng);

struct ProtocolConfig {
  std::size_t n_conditions = 10;
  double condition_lo = 0.05;
  double condition_hi = 0.95;
  std::size_t n_samples = 1000;
  std::size_t repeats = 3;
  std::size_t subset_size = 10;
  std::size_t n_subsets = 1000;
  double diversity_bandwidth = 1.0;
  KdeConfig kde;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  // 100 conditions, 10 repeats.
  static ProtocolConfig full();
  std::vector<double> conditions() const;
};

struct EvalCell {
  std::size_t repeat = 0;
  std::size_t condition_index = 0;
  double condition = 0.0;
  double label_error = 0.0;
  double likelihood = 0.0;
  double kde_bandwidth = 0.0;
  bool kde_degenerate = false;
  double diversity = 0.0;
  std::size_t degenerate_subsets = 0;
};

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;
};

MetricStats stats(std::span<const double> values);

struct ConditionAggregate {
  double condition = 0.0;
  MetricStats label_error, likelihood, diversity;
};

struct EvalReport {
  std::string run_id;
  std::string model_tag;
  std::uint64_t seed = 0;
  std::vector<double> conditions;
  std::vector<EvalCell> cells;  // repeat-major, then condition
  std::vector<ConditionAggregate> per_condition;
  MetricStats label_error, likelihood, diversity;  // over all cells
  bool failed = false;
  std::string diagnostics;
};

// n designs G(z, c) with z ~ N(0, I). Gradients are not recorded.
std::vector<double> generate_designs(const nn::Generator& G, double condition, std::size_t n,
                                     Rng& rng);
// Normalized exact labels of [N, 2] designs.
std::vector<double> predict_labels(std::span<const double> designs,
                                   const synthetic::Dataset2D& ds);

// Runs the sweep. Cell (r, c) uses Rng::derive(seed, {c, r}), so results are
// independent of thread scheduling.
EvalReport evaluate(const nn::Generator& G, const synthetic::Dataset2D& ds,
                    const ProtocolConfig& protocol);

// One row per condition x repeat.
void write_report_csv(const std::string& path, const EvalReport& report);

}  // namespace pcdgan::eval
