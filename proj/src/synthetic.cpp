#include "pcdgan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pcdgan/error.hpp"
#include "pcdgan/rng.hpp"

namespace pcdgan::synthetic {

std::array<double, 2> mode_center(int k) {
  const double angle = 2.0 * std::numbers::pi * k / kModes;
  return {kModeRadius * std::cos(angle), kModeRadius * std::sin(angle)};
}

ad::Tensor quality(const ad::Tensor& X) {
  if (X.rank() != 2 || X.cols() != 2) {
    throw ContractViolation("quality: expects [B,2] designs, got " + ad::shape_str(X.shape()));
  }
  const double coeff = -1.0 / (2.0 * kModeSigma * kModeSigma);
  ad::Tensor total;
  for (int k = 0; k < kModes; ++k) {
    const auto mu = mode_center(k);
    const ad::Tensor diff = ad::sub(X, ad::Tensor::constant({2}, {mu[0], mu[1]}));
    const ad::Tensor bump = ad::exp(ad::scale(ad::sum_rows(ad::square(diff)), coeff));
    total = total.defined() ? ad::add(total, bump) : bump;
  }
  return total;
}

double quality_value(double x1, double x2) {
  const double coeff = -1.0 / (2.0 * kModeSigma * kModeSigma);
  double q = 0.0;
  for (int k = 0; k < kModes; ++k) {
    const auto mu = mode_center(k);
    const double dx = x1 - mu[0], dy = x2 - mu[1];
    q += std::exp(coeff * (dx * dx + dy * dy));
  }
  return q;
}

Dataset2D generate_dataset(int example_id, std::size_t n, std::uint64_t seed) {
  if (example_id != 1 && example_id != 2) {
    throw ContractViolation(fmt::format("generate_dataset: unknown example id {}", example_id));
  }
  if (n == 0) throw ContractViolation("generate_dataset: n must be at least 1");
  Rng rng(seed);
  Dataset2D ds;
  ds.example_id = example_id;
  ds.seed = seed;
  ds.points.reserve(2 * n);
  const std::size_t n_square = example_id == 1 ? n : (n + 1) / 2;
  for (std::size_t i = 0; i < n_square; ++i) {
    ds.points.push_back(rng.uniform(-kHalfWidth, kHalfWidth));
    ds.points.push_back(rng.uniform(-kHalfWidth, kHalfWidth));
  }
  const auto center = mode_center(1);
  for (std::size_t i = n_square; i < n; ++i) {
    const double r = kDiskRadius * std::sqrt(rng.uniform());
    const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
    ds.points.push_back(center[0] + r * std::cos(t));
    ds.points.push_back(center[1] + r * std::sin(t));
  }
  ds.labels_raw.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels_raw[i] = quality_value(ds.x(i), ds.y(i));
  const auto [lo, hi] = std::minmax_element(ds.labels_raw.begin(), ds.labels_raw.end());
  ds.label_min = *lo;
  ds.label_max = *hi;
  if (!(ds.label_max > ds.label_min)) {
    // A single point has no spread; keep the affine map well defined.
    ds.label_max = ds.label_min + 1.0;
  }
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = normalize_label(ds.labels_raw[i], ds);
  return ds;
}

double normalize_label(double raw, const Dataset2D& ds) {
  if (!(ds.label_max > ds.label_min)) throw ContractViolation("normalize_label: degenerate range");
  return (raw - ds.label_min) / (ds.label_max - ds.label_min);
}

double denormalize_label(double normalized, const Dataset2D& ds) {
  if (!(ds.label_max > ds.label_min)) {
    throw ContractViolation("denormalize_label: degenerate range");
  }
  return ds.label_min + normalized * (ds.label_max - ds.label_min);
}

void save_dataset_csv(const std::string& path, const Dataset2D& ds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("dataset: cannot open " + path + " for writing");
  out << fmt::format("# example_id={} seed={} sigma_q={:.9g} label_min={:.17g} label_max={:.17g}\n",
                     ds.example_id, ds.seed, kModeSigma, ds.label_min, ds.label_max);
  out << "x1,x2,label_raw,label_norm\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", ds.x(i), ds.y(i), ds.labels_raw[i],
                       ds.labels[i]);
  }
}

Dataset2D load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("dataset: file not found: " + path);
  Dataset2D ds;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw LoadError("dataset: missing metadata line in " + path);
  }
  std::istringstream meta(line.substr(2));
  std::string kv;
  while (meta >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "example_id") ds.example_id = std::stoi(value);
    if (key == "seed") ds.seed = std::stoull(value);
    if (key == "label_min") ds.label_min = std::stod(value);
    if (key == "label_max") ds.label_max = std::stod(value);
  }
  std::getline(in, line);  // column header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double v[4];
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3]) != 4) {
      throw LoadError("dataset: malformed row: " + line);
    }
    ds.points.push_back(v[0]);
    ds.points.push_back(v[1]);
    ds.labels_raw.push_back(v[2]);
    ds.labels.push_back(v[3]);
  }
  return ds;
}

}  // namespace pcdgan::synthetic
