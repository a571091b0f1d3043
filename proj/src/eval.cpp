#include "pcdgan/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numbers>
#include <numeric>
#include <thread>

#include "pcdgan/dpp.hpp"
#include "pcdgan/error.hpp"

namespace pcdgan::eval {

double label_error(std::span<const double> conditions, std::span<const double> predicted) {
  if (conditions.size() != predicted.size()) {
    throw ContractViolation(fmt::format("label_error: {} conditions vs {} predictions",
                                        conditions.size(), predicted.size()));
  }
  if (predicted.empty()) throw ContractViolation("label_error: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) total += std::abs(conditions[i] - predicted[i]);
  return total / static_cast<double>(predicted.size());
}

double label_error(double condition, std::span<const double> predicted) {
  if (predicted.empty()) throw ContractViolation("label_error: empty input");
  double total = 0.0;
  for (double p : predicted) total += std::abs(condition - p);
  return total / static_cast<double>(predicted.size());
}

namespace {

const double kLogNorm = 0.5 * std::log(2.0 * std::numbers::pi);
constexpr std::uint64_t kFoldSeed = 0x6b6465;

// log of the KDE density of `train` at x, via log-sum-exp.
double log_kde(double x, std::span<const double> train, double h) {
  double max_e = -std::numeric_limits<double>::infinity();
  const double inv2h2 = 1.0 / (2.0 * h * h);
  for (double t : train) max_e = std::max(max_e, -(x - t) * (x - t) * inv2h2);
  double acc = 0.0;
  for (double t : train) acc += std::exp(-(x - t) * (x - t) * inv2h2 - max_e);
  return max_e + std::log(acc) - std::log(static_cast<double>(train.size())) - std::log(h) -
         kLogNorm;
}

}  // namespace

double kde_density(double x, std::span<const double> labels, double h) {
  if (labels.empty()) throw ContractViolation("kde_density: no labels");
  const double inv2h2 = 1.0 / (2.0 * h * h);
  double acc = 0.0;
  for (double t : labels) acc += std::exp(-(x - t) * (x - t) * inv2h2);
  return acc / (static_cast<double>(labels.size()) * h * std::sqrt(2.0 * std::numbers::pi));
}

LikelihoodResult likelihood_score(double condition, std::span<const double> labels,
                                  const KdeConfig& cfg) {
  if (labels.empty()) throw ContractViolation("likelihood_score: no labels");
  if (cfg.grid_points == 0 || cfg.folds < 2 || !(cfg.h_min > 0.0) || cfg.h_max < cfg.h_min) {
    throw ContractViolation("likelihood_score: invalid bandwidth grid");
  }
  std::vector<double> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());

  LikelihoodResult result;
  if (sorted.front() == sorted.back() || sorted.size() < cfg.folds) {
    result.degenerate = sorted.front() == sorted.back();
    result.bandwidth = cfg.h_min;
    result.density = kde_density(condition, sorted, result.bandwidth);
    return result;
  }

  // Fold of sorted position i is slot[i]: a fixed shuffle of round-robin
  // slots, so folds do not interleave neighbours yet ignore the input order.
  std::vector<std::size_t> slot(sorted.size());
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] = i % cfg.folds;
  Rng fold_rng(kFoldSeed);
  for (std::size_t i = slot.size(); i-- > 1;) std::swap(slot[i], slot[fold_rng.index(i + 1)]);
  std::vector<std::vector<double>> train(cfg.folds), held(cfg.folds);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t f = 0; f < cfg.folds; ++f) {
      (slot[i] == f ? held[f] : train[f]).push_back(sorted[i]);
    }
  }

  double best_score = -std::numeric_limits<double>::infinity();
  double best_h = cfg.h_min;
  const double log_lo = std::log(cfg.h_min), log_hi = std::log(cfg.h_max);
  for (std::size_t g = 0; g < cfg.grid_points; ++g) {
    const double frac = cfg.grid_points == 1 ? 0.0 : static_cast<double>(g) / (cfg.grid_points - 1);
    const double h = std::exp(log_lo + frac * (log_hi - log_lo));
    double score = 0.0;
    for (std::size_t f = 0; f < cfg.folds; ++f) {
      double fold_sum = 0.0;
      for (double x : held[f]) fold_sum += log_kde(x, train[f], h);
      score += fold_sum / static_cast<double>(held[f].size());
    }
    score /= static_cast<double>(cfg.folds);
    if (score > best_score) {
      best_score = score;
      best_h = h;
    }
  }
  result.bandwidth = best_h;
  result.density = kde_density(condition, sorted, best_h);
  return result;
}

DiversityResult diversity_score(std::span<const double> points, std::size_t dim, double bandwidth,
                                std::size_t subset_size, std::size_t n_subsets, Rng& rng) {
  if (dim == 0 || points.size() % dim != 0) {
    throw ContractViolation("diversity_score: points are not a [N, dim] array");
  }
  const std::size_t n = points.size() / dim;
  if (subset_size == 0 || n < subset_size) {
    throw ContractViolation(
        fmt::format("diversity_score: {} samples for subsets of {}", n, subset_size));
  }
  if (n_subsets == 0) throw ContractViolation("diversity_score: n_subsets must be positive");
  const double inv_h2 = 1.0 / (bandwidth * bandwidth);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<double> K(subset_size * subset_size);

  DiversityResult out;
  double total = 0.0;
  for (std::size_t s = 0; s < n_subsets; ++s) {
    // Partial Fisher-Yates: the first subset_size entries form a uniform subset.
    for (std::size_t i = 0; i < subset_size; ++i) std::swap(perm[i], perm[i + rng.index(n - i)]);
    for (std::size_t i = 0; i < subset_size; ++i) {
      K[i * subset_size + i] = 1.0;
      for (std::size_t j = i + 1; j < subset_size; ++j) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
          const double diff = points[perm[i] * dim + c] - points[perm[j] * dim + c];
          d2 += diff * diff;
        }
        K[i * subset_size + j] = K[j * subset_size + i] = std::exp(-0.5 * d2 * inv_h2);
      }
    }
    auto chol = dpp::cholesky(K, subset_size);
    if (!chol) {
      ++out.degenerate_subsets;
      double added = 0.0;
      for (double jitter = 1e-10; !chol; jitter *= 10.0) {
        for (std::size_t i = 0; i < subset_size; ++i) K[i * subset_size + i] += jitter - added;
        added = jitter;
        chol = dpp::cholesky(K, subset_size);
      }
    }
    double logdet = 0.0;
    for (std::size_t i = 0; i < subset_size; ++i) {
      logdet += 2.0 * std::log((*chol)[i * subset_size + i]);
    }
    total += logdet;
  }
  out.score = total / static_cast<double>(n_subsets);
  return out;
}

ProtocolConfig ProtocolConfig::full() {
  ProtocolConfig p;
  p.n_conditions = 100;
  p.repeats = 10;
  return p;
}

std::vector<double> ProtocolConfig::conditions() const {
  std::vector<double> out(n_conditions);
  for (std::size_t i = 0; i < n_conditions; ++i) {
    out[i] = n_conditions == 1
                 ? condition_lo
                 : condition_lo + (condition_hi - condition_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_conditions - 1);
  }
  return out;
}

MetricStats stats(std::span<const double> values) {
  MetricStats s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

std::vector<double> generate_designs(const nn::Generator& G, double condition, std::size_t n,
                                     Rng& rng) {
  ad::NoGradGuard no_grad;
  std::vector<double> z(n * G.noise_dim());
  for (double& v : z) v = rng.normal();
  const ad::Tensor x = G.forward(ad::Tensor::constant({n, G.noise_dim()}, std::move(z)),
                                 ad::Tensor::full({n}, condition));
  return {x.values().begin(), x.values().end()};
}

std::vector<double> predict_labels(std::span<const double> designs,
                                   const synthetic::Dataset2D& ds) {
  std::vector<double> out(designs.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = synthetic::normalize_label(
        synthetic::quality_value(designs[2 * i], designs[2 * i + 1]), ds);
  }
  return out;
}

EvalReport evaluate(const nn::Generator& G, const synthetic::Dataset2D& ds,
                    const ProtocolConfig& protocol) {
  EvalReport report;
  report.seed = protocol.seed;
  report.conditions = protocol.conditions();
  for (double c : report.conditions) {
    if (c < 0.05 - 1e-12 || c > 0.95 + 1e-12) {
      throw ContractViolation(fmt::format("evaluate: condition {} outside [0.05, 0.95]", c));
    }
  }
  const std::size_t n_cond = report.conditions.size();
  const std::size_t n_cells = n_cond * protocol.repeats;
  report.cells.resize(n_cells);
  std::vector<std::string> errors(n_cells);

  auto run_cell = [&](std::size_t k) {
    EvalCell& cell = report.cells[k];
    cell.repeat = k / n_cond;
    cell.condition_index = k % n_cond;
    cell.condition = report.conditions[cell.condition_index];
    try {
      Rng rng = Rng::derive(protocol.seed, {cell.condition_index, cell.repeat});
      const auto designs = generate_designs(G, cell.condition, protocol.n_samples, rng);
      for (double v : designs) {
        if (!std::isfinite(v)) throw NumericError("evaluate", "non-finite generated design");
      }
      const auto labels = predict_labels(designs, ds);
      cell.label_error = label_error(cell.condition, labels);
      const LikelihoodResult lik = likelihood_score(cell.condition, labels, protocol.kde);
      cell.likelihood = lik.density;
      cell.kde_bandwidth = lik.bandwidth;
      cell.kde_degenerate = lik.degenerate;
      const DiversityResult div =
          diversity_score(designs, 2, protocol.diversity_bandwidth, protocol.subset_size,
                          protocol.n_subsets, rng);
      cell.diversity = div.score;
      cell.degenerate_subsets = div.degenerate_subsets;
    } catch (const std::exception& e) {
      errors[k] = fmt::format("condition {} repeat {}: {}", cell.condition, cell.repeat, e.what());
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(protocol.threads, n_cells));
  if (threads == 1) {
    for (std::size_t k = 0; k < n_cells; ++k) run_cell(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < n_cells; k = next++) run_cell(k);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (const auto& e : errors) {
    if (!e.empty()) {
      report.failed = true;
      report.diagnostics += e + "\n";
    }
  }

  std::vector<double> le, lk, dv;
  for (const auto& c : report.cells) {
    le.push_back(c.label_error);
    lk.push_back(c.likelihood);
    dv.push_back(c.diversity);
  }
  report.label_error = stats(le);
  report.likelihood = stats(lk);
  report.diversity = stats(dv);
  for (std::size_t ci = 0; ci < n_cond; ++ci) {
    std::vector<double> a, b, c;
    for (const auto& cell : report.cells) {
      if (cell.condition_index != ci) continue;
      a.push_back(cell.label_error);
      b.push_back(cell.likelihood);
      c.push_back(cell.diversity);
    }
    report.per_condition.push_back({report.conditions[ci], stats(a), stats(b), stats(c)});
  }
  return report;
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("report: cannot open " + path + " for writing");
  out << "repeat,condition_index,condition,label_error,likelihood,kde_bandwidth,kde_degenerate,"
         "diversity,degenerate_subsets\n";
  for (const auto& c : report.cells) {
    out << fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g},{},{:.9g},{}\n", c.repeat,
                       c.condition_index, c.condition, c.label_error, c.likelihood,
                       c.kde_bandwidth, c.kde_degenerate ? 1 : 0, c.diversity,
                       c.degenerate_subsets);
  }
}

}  // namespace pcdgan::eval
