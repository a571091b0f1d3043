#pragma once

// The two 2-D benchmarks: designs in the plane whose performance label is an
// un-normalized mixture of six Gaussian bumps placed on a circle.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pcdgan/autodiff.hpp"

namespace pcdgan::synthetic {

inline constexpr int kModes = 6;
inline constexpr double kModeRadius = 0.4;
inline constexpr double kModeSigma = 0.1;
inline constexpr double kHalfWidth = 0.6;   // data square is [-0.6, 0.6]^2
inline constexpr double kDiskRadius = 0.2;  // example 2 cluster around mode 2
inline constexpr std::size_t kDefaultSize = 10000;

// Center of mode k (0-based; mode 0 sits at angle 0).
std::array<double, 2> mode_center(int k);

// q(x) = sum_k exp(-|x - mu_k|^2 / (2 sigma^2)) for X of shape [B, 2] -> [B].
ad::Tensor quality(const ad::Tensor& X);
double quality_value(double x1, double x2);

struct Dataset2D {
  int example_id = 1;
  std::uint64_t seed = 0;
  std::vector<double> points;  // N x 2, row-major
  std::vector<double> labels_raw;
  std::vector<double> labels;  // min-max normalized to [0, 1]
  double label_min = 0.0;
  double label_max = 1.0;

  std::size_t size() const { return labels.size(); }
  double x(std::size_t i) const { return points[2 * i]; }
  double y(std::size_t i) const { return points[2 * i + 1]; }
};

// Example 1: n points uniform on the square. Example 2: ceil(n/2) points on
// the square and floor(n/2) area-uniform on the disk of radius 0.2 about mode 2
// (index 1). Throws ContractViolation for other ids or n == 0.
Dataset2D generate_dataset(int example_id, std::size_t n = kDefaultSize, std::uint64_t seed = 0);

double normalize_label(double raw, const Dataset2D& ds);
double denormalize_label(double normalized, const Dataset2D& ds);

// CSV with a leading '#' metadata line (example_id, seed, sigma_q and the
// normalization constants) followed by x1,x2,label_raw,label_norm rows.
void save_dataset_csv(const std::string& path, const Dataset2D& ds);
Dataset2D load_dataset_csv(const std::string& path);

}  // namespace pcdgan::synthetic
