#include "pcdgan/vicinal.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>

#include "pcdgan/error.hpp"

namespace pcdgan::vicinal {

std::string to_string(VicinityMode m) { return m == VicinityMode::kHard ? "hard" : "soft"; }
std::string to_string(LabelSampling s) {
  return s == LabelSampling::kSingular ? "singular" : "uniform";
}

std::string to_string(LabelNoise n) { return n == LabelNoise::kShared ? "shared" : "per_sample"; }

LabelNoise parse_label_noise(const std::string& s) {
  if (s == "shared") return LabelNoise::kShared;
  if (s == "per_sample") return LabelNoise::kPerSample;
  throw ContractViolation("unknown label noise '" + s + "'");
}

VicinityMode parse_vicinity_mode(const std::string& s) {
  if (s == "hard") return VicinityMode::kHard;
  if (s == "soft") return VicinityMode::kSoft;
  throw ContractViolation("unknown vicinity mode '" + s + "'");
}

LabelSampling parse_label_sampling(const std::string& s) {
  if (s == "singular") return LabelSampling::kSingular;
  if (s == "uniform") return LabelSampling::kUniform;
  throw ContractViolation("unknown label sampling '" + s + "'");
}

void VicinalConfig::validate() const {
  if (!(sigma_vic > 0.0) || !(kappa > 0.0) || !(nu > 0.0)) {
    throw ContractViolation(
        fmt::format("vicinal config: sigma_vic={}, kappa={}, nu={} must all be positive",
                    sigma_vic, kappa, nu));
  }
  if (!(soft_weight_threshold >= 0.0 && soft_weight_threshold < 1.0)) {
    throw ContractViolation("vicinal config: soft_weight_threshold must be in [0,1)");
  }
}

double VicinalConfig::window() const {
  if (mode == VicinityMode::kHard) return kappa;
  if (soft_weight_threshold <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(-std::log(soft_weight_threshold) / nu);
}

VicinalConfig rule_of_thumb(const synthetic::Dataset2D& ds, VicinityMode mode,
                            LabelSampling sampling) {
  const std::size_t n = ds.size();
  if (n < 2) throw ContractViolation("rule_of_thumb: need at least two labels");
  const double mean = std::accumulate(ds.labels.begin(), ds.labels.end(), 0.0) / n;
  double var = 0.0;
  for (double y : ds.labels) var += (y - mean) * (y - mean);
  const double stddev = std::sqrt(var / static_cast<double>(n - 1));

  std::vector<double> sorted = ds.labels;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  double gap = 0.0;
  for (std::size_t i = 1; i < sorted.size(); ++i) gap = std::max(gap, sorted[i] - sorted[i - 1]);
  if (!(gap > 0.0)) throw ContractViolation("rule_of_thumb: labels have no spread");

  VicinalConfig cfg;
  cfg.sigma_vic = 1.06 * stddev * std::pow(static_cast<double>(n), -0.2);
  cfg.kappa = gap;
  cfg.nu = 1.0 / (gap * gap);
  cfg.mode = mode;
  cfg.sampling = sampling;
  return cfg;
}

LabelIndex::LabelIndex(const synthetic::Dataset2D& ds) : ds_(&ds) {
  if (ds.size() == 0) throw ContractViolation("label index: empty dataset");
  order_.resize(ds.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return ds.labels[a] < ds.labels[b]; });
  sorted_.reserve(ds.size());
  for (auto i : order_) sorted_.push_back(ds.labels[i]);
}

double LabelIndex::nearest(double u) const {
  const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), u);
  if (it == sorted_.begin()) return *it;
  if (it == sorted_.end()) return sorted_.back();
  const double above = *it, below = *(it - 1);
  return (u - below) <= (above - u) ? below : above;
}

std::pair<std::size_t, std::size_t> LabelIndex::window(double lo, double hi) const {
  const auto first = std::lower_bound(sorted_.begin(), sorted_.end(), lo);
  const auto last = std::upper_bound(sorted_.begin(), sorted_.end(), hi);
  return {static_cast<std::size_t>(first - sorted_.begin()),
          static_cast<std::size_t>(std::max(first, last) - sorted_.begin())};
}

double LabelIndex::random_label(Rng& rng) const { return sorted_[rng.index(sorted_.size())]; }

double sample_singular_label(const LabelIndex& index, Rng& rng) {
  const double u = rng.uniform(index.min_label(), index.max_label());
  return index.nearest(u);
}

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void normalize(std::vector<double>& w, const char* what) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw VicinityEmptyError(fmt::format("{} weights vanish", what));
  }
  for (double& v : w) v /= total;
}

// exp(-nu d^2) shifted by the smallest d^2 so at least one weight is 1.
std::vector<double> soft_weights(std::span<const double> d2, double nu) {
  const double d2_min = *std::min_element(d2.begin(), d2.end());
  std::vector<double> w(d2.size());
  for (std::size_t i = 0; i < d2.size(); ++i) w[i] = std::exp(-nu * (d2[i] - d2_min));
  return w;
}

// Draws one dataset index whose label lies within the vicinity window of t.
std::size_t draw_real(const LabelIndex& index, double t, const VicinalConfig& cfg, Rng& rng) {
  const double half = cfg.window();
  const auto [first, last] = index.window(t - half, t + half);
  if (first == last) {
    throw VicinityEmptyError(fmt::format("no data label within {} of target {}", half, t));
  }
  return index.index_at(first + rng.index(last - first));
}

double draw_fake_label(double t, const VicinalConfig& cfg, Rng& rng) {
  const double half = std::min(cfg.window(), 1.0);
  const double lo = std::max(0.0, t - half), hi = std::min(1.0, t + half);
  return hi > lo ? rng.uniform(lo, hi) : lo;
}

double fake_weight_raw(double y, double t, const VicinalConfig& cfg) {
  if (cfg.mode == VicinityMode::kHard) return std::abs(y - t) <= cfg.kappa ? 1.0 : 0.0;
  return (y - t) * (y - t);  // squared distance; converted by soft_weights
}

// Shared assembly. anchors holds one label (singular) or one per slot.
VicinalBatch assemble(const LabelIndex& index, std::span<const double> anchors,
                      const VicinalConfig& cfg, std::size_t batch_size, Rng& rng) {
  cfg.validate();
  if (batch_size == 0) throw ContractViolation("vicinal batch: batch size must be positive");
  const bool singular = anchors.size() == 1;
  const synthetic::Dataset2D& ds = index.dataset();

  VicinalBatch b;
  b.y_s = singular ? anchors[0] : std::numeric_limits<double>::quiet_NaN();
  b.real_x.reserve(2 * batch_size);

  std::vector<double> real_t(batch_size), fake_t(batch_size);
  if (singular && cfg.noise == LabelNoise::kShared) {
    const double tr = clip01(anchors[0] + rng.normal(0.0, cfg.sigma_vic));
    const double tg = clip01(anchors[0] + rng.normal(0.0, cfg.sigma_vic));
    std::fill(real_t.begin(), real_t.end(), tr);
    std::fill(fake_t.begin(), fake_t.end(), tg);
  } else {
    for (std::size_t j = 0; j < batch_size; ++j) {
      const double a = anchors[singular ? 0 : j];
      real_t[j] = clip01(a + rng.normal(0.0, cfg.sigma_vic));
      fake_t[j] = clip01(a + rng.normal(0.0, cfg.sigma_vic));
    }
  }

  std::vector<double> real_d2(batch_size);
  for (std::size_t j = 0; j < batch_size; ++j) {
    const std::size_t i = draw_real(index, real_t[j], cfg, rng);
    b.real_x.push_back(ds.x(i));
    b.real_x.push_back(ds.y(i));
    b.real_y.push_back(ds.labels[i]);
    real_d2[j] = (ds.labels[i] - real_t[j]) * (ds.labels[i] - real_t[j]);
  }
  b.real_target = real_t;
  if (cfg.mode == VicinityMode::kHard) {
    b.real_weights.assign(batch_size, 1.0);
  } else {
    b.real_weights = soft_weights(real_d2, cfg.nu);
  }
  normalize(b.real_weights, "real");

  std::vector<double> raw(batch_size);
  for (std::size_t j = 0; j < batch_size; ++j) {
    b.fake_y.push_back(draw_fake_label(fake_t[j], cfg, rng));
    raw[j] = fake_weight_raw(b.fake_y[j], fake_t[j], cfg);
  }
  b.fake_target = fake_t;
  b.fake_weights = cfg.mode == VicinityMode::kHard ? raw : soft_weights(raw, cfg.nu);
  normalize(b.fake_weights, "fake");
  return b;
}

ad::Tensor noise(std::size_t batch, std::size_t dim, Rng& rng) {
  std::vector<double> z(batch * dim);
  for (double& v : z) v = rng.normal();
  return ad::Tensor::constant({batch, dim}, std::move(z));
}

}  // namespace

VicinalBatch build_vicinal_batch(const LabelIndex& index, double y_s, const VicinalConfig& cfg,
                                 std::size_t batch_size, Rng& rng) {
  if (!(y_s >= 0.0 && y_s <= 1.0)) {
    throw ContractViolation(fmt::format("vicinal batch: y_s = {} outside [0,1]", y_s));
  }
  const double anchors[1] = {y_s};
  return assemble(index, anchors, cfg, batch_size, rng);
}

VicinalBatch build_uniform_vicinal_batch(const LabelIndex& index, const VicinalConfig& cfg,
                                         std::size_t batch_size, Rng& rng) {
  std::vector<double> anchors(batch_size);
  for (double& a : anchors) a = index.random_label(rng);
  return assemble(index, anchors, cfg, batch_size, rng);
}

DiscriminatorLoss discriminator_loss(const nn::Discriminator& D, const nn::Generator& G,
                                     const VicinalBatch& batch, const VicinalConfig& cfg,
                                     Rng& rng) {
  const std::size_t n = batch.size();
  if (n == 0) throw ContractViolation("discriminator_loss: empty batch");
  const bool hard = cfg.mode == VicinityMode::kHard;
  const double c_real = hard ? cfg.c1 : cfg.c3;
  const double c_fake = hard ? cfg.c2 : cfg.c4;

  ad::Tensor fake_x;
  {
    ad::NoGradGuard no_grad;
    fake_x = G.forward(noise(n, G.noise_dim(), rng), ad::Tensor::vector(batch.fake_y)).detach();
  }
  const ad::Tensor real_x = ad::Tensor::constant({n, 2}, batch.real_x);
  const ad::Tensor d_real = D.forward(real_x, ad::Tensor::vector(batch.real_target));
  const ad::Tensor d_fake = D.forward(fake_x, ad::Tensor::vector(batch.fake_target));

  const ad::Tensor real_term =
      ad::scale(ad::sum(ad::mul(ad::Tensor::vector(batch.real_weights), ad::log(d_real))), -c_real);
  const ad::Tensor fake_term = ad::scale(
      ad::sum(ad::mul(ad::Tensor::vector(batch.fake_weights), ad::log(ad::sub(
                                                                  ad::Tensor::scalar(1.0), d_fake)))),
      -c_fake);
  if (!std::isfinite(real_term.item())) throw NumericError("discriminator_loss", "real term");
  if (!std::isfinite(fake_term.item())) throw NumericError("discriminator_loss", "fake term");
  return {ad::add(real_term, fake_term), real_term.item(), fake_term.item()};
}

GeneratorLoss generator_loss(const nn::Discriminator& D, const nn::Generator& G,
                             std::span<const double> anchors, const VicinalConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = anchors.size();
  if (n == 0) throw ContractViolation("generator_loss: empty batch");
  GeneratorLoss out;
  out.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.targets[i] = clip01(anchors[i] + rng.normal(0.0, cfg.sigma_vic));
  }
  const ad::Tensor y = ad::Tensor::vector(out.targets);
  out.designs = G.forward(noise(n, G.noise_dim(), rng), y);
  out.loss = ad::neg(ad::mean(ad::log(D.forward(out.designs, y))));
  if (!std::isfinite(out.loss.item())) throw NumericError("generator_loss", "vicinal term");
  return out;
}

GeneratorLoss generator_loss(const nn::Discriminator& D, const nn::Generator& G, double y_s,
                             const VicinalConfig& cfg, std::size_t batch_size, Rng& rng) {
  const std::vector<double> anchors(batch_size, y_s);
  return generator_loss(D, G, anchors, cfg, rng);
}

ad::Tensor total_generator_loss(const ad::Tensor& gen_vicinal, const ad::Tensor& pcd,
                                double gamma1) {
  if (!(gamma1 >= 0.0)) throw ContractViolation("total_generator_loss: gamma1 must be >= 0");
  if (!pcd.defined()) return gen_vicinal;
  return ad::add(gen_vicinal, ad::scale(pcd, gamma1));
}

double gamma1_schedule(long t, long T, double gamma1_final, double p) {
  if (T <= 0) throw ContractViolation("gamma1_schedule: T must be positive");
  if (t < 0 || t > T) throw ContractViolation("gamma1_schedule: t outside [0, T]");
  if (!(p > 0.0)) throw ContractViolation("gamma1_schedule: p must be positive");
  return gamma1_final * std::pow(static_cast<double>(t) / static_cast<double>(T), p);
}

}  // namespace pcdgan::vicinal
