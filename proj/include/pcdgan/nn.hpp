#pragma once

// Small fully connected networks for the 2-D benchmarks and the Adam optimizer
// with a staircase learning-rate schedule.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pcdgan/autodiff.hpp"
#include "pcdgan/rng.hpp"

namespace pcdgan::nn {

struct Parameter {
  std::string name;
  ad::Tensor tensor;
};

enum class Activation { kLinear, kRelu, kLeakyRelu, kTanh, kSigmoid };

std::string to_string(Activation a);

// Dense layer y = x W + b, W stored [in, out].
struct Linear {
  ad::Tensor weight;
  ad::Tensor bias;
};

class Mlp {
 public:
  // dims = {in, hidden..., out}. Hidden layers get He-uniform weights, the
  // final layer gets U(-final_scale, final_scale) weights. All biases start at 0.
  Mlp(std::string name, std::vector<std::size_t> dims, Activation hidden, Activation output,
      Rng& rng, double leaky_slope = 0.2, double final_scale = 0.01);

  ad::Tensor forward(const ad::Tensor& x) const;

  std::vector<Parameter> parameters() const;
  const std::vector<std::size_t>& dims() const { return dims_; }
  // Canonical text describing layer sizes and activations.
  std::string architecture() const;

 private:
  std::string name_;
  std::vector<std::size_t> dims_;
  std::vector<Linear> layers_;
  Activation hidden_;
  Activation output_;
  double leaky_slope_;
};

struct NetworkConfig {
  std::size_t noise_dim = 5;
  std::size_t design_dim = 2;
  std::vector<std::size_t> hidden = {128, 128, 128};
  double leaky_slope = 0.2;
};

// G(z, y): input [z || y], linear output.
class Generator {
 public:
  Generator(const NetworkConfig& cfg, Rng& rng);

  // z: [B, noise_dim], y: [B] labels in [0, 1]. Returns [B, design_dim].
  ad::Tensor forward(const ad::Tensor& z, const ad::Tensor& y) const;

  std::size_t noise_dim() const { return noise_dim_; }
  std::vector<Parameter> parameters() const { return mlp_.parameters(); }
  std::string architecture() const { return mlp_.architecture(); }

 private:
  std::size_t noise_dim_;
  std::size_t design_dim_;
  Mlp mlp_;
};

// D(x, y): input [x || y], sigmoid output.
class Discriminator {
 public:
  Discriminator(const NetworkConfig& cfg, Rng& rng);

  // x: [B, design_dim], y: [B]. Returns [B] probabilities.
  ad::Tensor forward(const ad::Tensor& x, const ad::Tensor& y) const;

  std::vector<Parameter> parameters() const { return mlp_.parameters(); }
  std::string architecture() const { return mlp_.architecture(); }

 private:
  std::size_t design_dim_;
  Mlp mlp_;
};

// Labels fed to G or D must be in [0, 1].
void check_labels(const ad::Tensor& y, std::size_t batch, const char* who);

struct AdamConfig {
  double base_lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_factor = 0.8;
  std::int64_t decay_every = 5000;
};

class Adam {
 public:
  Adam(std::vector<Parameter> params, AdamConfig cfg);

  // base_lr * decay_factor^floor(t / decay_every) for the current step count.
  double effective_lr() const;
  static double effective_lr(const AdamConfig& cfg, std::int64_t t);

  // Bias-corrected Adam update at effective_lr(); increments t and zeroes the
  // gradients. Throws NumericError naming the parameter on a non-finite grad.
  void step();
  void zero_grad();

  std::int64_t t() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Parameter>& params() const { return params_; }

 private:
  std::vector<Parameter> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t t_ = 0;
};

}  // namespace pcdgan::nn
