#include "pcdgan/nn.hpp"

#include <cmath>
#include <fmt/format.h>

#include "pcdgan/error.hpp"

namespace pcdgan::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kLinear:
      return "linear";
    case Activation::kRelu:
      return "relu";
    case Activation::kLeakyRelu:
      return "leaky_relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "?";
}

namespace {

ad::Tensor activate(const ad::Tensor& x, Activation a, double slope) {
  switch (a) {
    case Activation::kLinear:
      return x;
    case Activation::kRelu:
      return ad::relu(x);
    case Activation::kLeakyRelu:
      return ad::leaky_relu(x, slope);
    case Activation::kTanh:
      return ad::tanh(x);
    case Activation::kSigmoid:
      return ad::sigmoid(x);
  }
  return x;
}

}  // namespace

Mlp::Mlp(std::string name, std::vector<std::size_t> dims, Activation hidden, Activation output,
         Rng& rng, double leaky_slope, double final_scale)
    : name_(std::move(name)),
      dims_(std::move(dims)),
      hidden_(hidden),
      output_(output),
      leaky_slope_(leaky_slope) {
  if (dims_.size() < 2) throw ContractViolation("mlp: need at least input and output dims");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const std::size_t in = dims_[l], out = dims_[l + 1];
    const bool last = l + 2 == dims_.size();
    const double bound = last ? final_scale : std::sqrt(6.0 / static_cast<double>(in));
    std::vector<double> w(in * out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    layers_.push_back({ad::Tensor::parameter({in, out}, std::move(w)),
                       ad::Tensor::parameter({out}, std::vector<double>(out, 0.0))});
  }
}

ad::Tensor Mlp::forward(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = ad::add(ad::matmul(h, layers_[l].weight), layers_[l].bias);
    const bool last = l + 1 == layers_.size();
    h = activate(h, last ? output_ : hidden_, leaky_slope_);
  }
  return h;
}

std::vector<Parameter> Mlp::parameters() const {
  std::vector<Parameter> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    out.push_back({fmt::format("{}.{}.weight", name_, l), layers_[l].weight});
    out.push_back({fmt::format("{}.{}.bias", name_, l), layers_[l].bias});
  }
  return out;
}

std::string Mlp::architecture() const {
  return fmt::format("{}:[{}]:{}:{}:{}", name_, fmt::join(dims_, ","), to_string(hidden_),
                     to_string(output_), leaky_slope_);
}

void check_labels(const ad::Tensor& y, std::size_t batch, const char* who) {
  if (y.size() != batch) {
    throw ContractViolation(fmt::format("{}: {} labels for a batch of {}", who, y.size(), batch));
  }
  for (double v : y.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ContractViolation(fmt::format("{}: label {} outside [0,1]", who, v));
    }
  }
}

namespace {

std::vector<std::size_t> layer_dims(std::size_t in, const std::vector<std::size_t>& hidden,
                                    std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

Generator::Generator(const NetworkConfig& cfg, Rng& rng)
    : noise_dim_(cfg.noise_dim),
      design_dim_(cfg.design_dim),
      mlp_("G", layer_dims(cfg.noise_dim + 1, cfg.hidden, cfg.design_dim), Activation::kLeakyRelu,
           Activation::kLinear, rng, cfg.leaky_slope) {}

ad::Tensor Generator::forward(const ad::Tensor& z, const ad::Tensor& y) const {
  if (z.rank() != 2 || z.cols() != noise_dim_) {
    throw ContractViolation(fmt::format("generator: noise must be [B,{}], got {}", noise_dim_,
                                        ad::shape_str(z.shape())));
  }
  check_labels(y, z.rows(), "generator");
  return mlp_.forward(ad::concat_cols({z, y}));
}

Discriminator::Discriminator(const NetworkConfig& cfg, Rng& rng)
    : design_dim_(cfg.design_dim),
      mlp_("D", layer_dims(cfg.design_dim + 1, cfg.hidden, 1), Activation::kLeakyRelu,
           Activation::kSigmoid, rng, cfg.leaky_slope) {}

ad::Tensor Discriminator::forward(const ad::Tensor& x, const ad::Tensor& y) const {
  if (x.rank() != 2 || x.cols() != design_dim_) {
    throw ContractViolation(fmt::format("discriminator: designs must be [B,{}], got {}",
                                        design_dim_, ad::shape_str(x.shape())));
  }
  check_labels(y, x.rows(), "discriminator");
  return ad::reshape(mlp_.forward(ad::concat_cols({x, y})), {x.rows()});
}

Adam::Adam(std::vector<Parameter> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (cfg_.decay_every <= 0) throw ContractViolation("adam: decay_every must be positive");
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

double Adam::effective_lr(const AdamConfig& cfg, std::int64_t t) {
  return cfg.base_lr * std::pow(cfg.decay_factor, static_cast<double>(t / cfg.decay_every));
}

double Adam::effective_lr() const { return effective_lr(cfg_, t_); }

void Adam::step() {
  for (const auto& p : params_) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError(p.name, "non-finite gradient");
    }
  }
  const double lr = effective_lr();
  const double next = static_cast<double>(t_ + 1);
  const double c1 = 1.0 - std::pow(cfg_.beta1, next);
  const double c2 = 1.0 - std::pow(cfg_.beta2, next);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ad::Tensor t = params_[k].tensor;
    auto w = t.mutable_values();
    auto g = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
  ++t_;
  zero_grad();
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace pcdgan::nn
