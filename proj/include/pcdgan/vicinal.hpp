#pragma once

// Vicinal (label-neighbourhood) GAN losses: singular label selection, hard and
// soft vicinal discriminator losses in singular and uniform label sampling,
// the vicinal generator loss, and the total generator objective.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcdgan/autodiff.hpp"
#include "pcdgan/nn.hpp"
#include "pcdgan/rng.hpp"
#include "pcdgan/synthetic.hpp"

namespace pcdgan::vicinal {

enum class VicinityMode { kHard, kSoft };
enum class LabelSampling { kSingular, kUniform };
// Singular batches: one label-noise draw per side, or one per slot.
enum class LabelNoise { kShared, kPerSample };

std::string to_string(VicinityMode m);
std::string to_string(LabelSampling s);
VicinityMode parse_vicinity_mode(const std::string& s);
LabelSampling parse_label_sampling(const std::string& s);
std::string to_string(LabelNoise n);
LabelNoise parse_label_noise(const std::string& s);

struct VicinalConfig {
  double sigma_vic = 0.05;  // std of the label noise
  double kappa = 0.01;      // hard half-width
  double nu = 1e4;          // soft weight rate
  VicinityMode mode = VicinityMode::kSoft;
  LabelSampling sampling = LabelSampling::kSingular;
  LabelNoise noise = LabelNoise::kShared;
  double c1 = 1.0, c2 = 1.0, c3 = 1.0, c4 = 1.0;
  // Soft mode only draws samples whose weight exp(-nu d^2) is at least this.
  // 0 draws from the whole dataset.
  double soft_weight_threshold = 1e-3;

  void validate() const;
  // Half-width of the label window that samples are drawn from.
  double window() const;
};

// sigma_vic = 1.06 std(labels) N^(-1/5), kappa = largest gap between sorted
// distinct labels, nu = 1 / kappa^2.
VicinalConfig rule_of_thumb(const synthetic::Dataset2D& ds, VicinityMode mode = VicinityMode::kSoft,
                            LabelSampling sampling = LabelSampling::kSingular);

// Labels sorted once for nearest-label and window queries.
class LabelIndex {
 public:
  explicit LabelIndex(const synthetic::Dataset2D& ds);

  const synthetic::Dataset2D& dataset() const { return *ds_; }
  double min_label() const { return sorted_.front(); }
  double max_label() const { return sorted_.back(); }
  // Data label closest to u; ties go to the smaller label.
  double nearest(double u) const;
  // Positions [first, last) in sorted order with label in [lo, hi].
  std::pair<std::size_t, std::size_t> window(double lo, double hi) const;
  // Dataset index of the sorted position.
  std::size_t index_at(std::size_t pos) const { return order_[pos]; }
  // Uniform draw from the dataset's labels.
  double random_label(Rng& rng) const;

 private:
  const synthetic::Dataset2D* ds_;
  std::vector<double> sorted_;
  std::vector<std::size_t> order_;
};

// u ~ U(min label, max label), then the nearest data label.
double sample_singular_label(const LabelIndex& index, Rng& rng);

struct VicinalBatch {
  double y_s = 0.0;                   // singular label (NaN in uniform sampling)
  std::vector<double> real_x;         // B x 2
  std::vector<double> real_y;         // labels of the selected real samples
  std::vector<double> real_target;    // label D is conditioned on, per real sample
  std::vector<double> real_weights;   // sums to 1
  std::vector<double> fake_y;         // labels fed to G
  std::vector<double> fake_target;    // label D is conditioned on, per fake sample
  std::vector<double> fake_weights;   // sums to 1

  std::size_t size() const { return real_y.size(); }
};

// Singular batch: one noise draw per side around y_s. Throws VicinityEmptyError
// when no data label (hard/soft window) or no fake label (hard) falls in the
// vicinity of the target.
VicinalBatch build_vicinal_batch(const LabelIndex& index, double y_s, const VicinalConfig& cfg,
                                 std::size_t batch_size, Rng& rng);

// Uniform batch (CcGAN baseline): each slot j draws its own data label and noise.
VicinalBatch build_uniform_vicinal_batch(const LabelIndex& index, const VicinalConfig& cfg,
                                         std::size_t batch_size, Rng& rng);

struct DiscriminatorLoss {
  ad::Tensor loss;
  double real_term = 0.0;
  double fake_term = 0.0;
};

// -C3 sum w_r log D(x_r, t_r) - C4 sum w_g log(1 - D(G(z, y_g), t_g)); fake
// designs are produced without recording G's graph. The hard variant uses C1/C2.
DiscriminatorLoss discriminator_loss(const nn::Discriminator& D, const nn::Generator& G,
                                     const VicinalBatch& batch, const VicinalConfig& cfg,
                                     Rng& rng);

struct GeneratorLoss {
  ad::Tensor loss;
  ad::Tensor designs;           // G(z, y), [B, 2], attached to G's graph
  std::vector<double> targets;  // y_i = clip(anchor_i + eps_i, 0, 1)
};

// -(1/N) sum log D(G(z_i, y_i), y_i). anchors has one entry per sample.
GeneratorLoss generator_loss(const nn::Discriminator& D, const nn::Generator& G,
                             std::span<const double> anchors, const VicinalConfig& cfg, Rng& rng);
GeneratorLoss generator_loss(const nn::Discriminator& D, const nn::Generator& G, double y_s,
                             const VicinalConfig& cfg, std::size_t batch_size, Rng& rng);

// gen_vicinal + gamma1 * pcd. An undefined pcd is treated as absent.
ad::Tensor total_generator_loss(const ad::Tensor& gen_vicinal, const ad::Tensor& pcd,
                                double gamma1);

// gamma1_final * (t / T)^p.
double gamma1_schedule(long t, long T, double gamma1_final, double p = 5.0);

}  // namespace pcdgan::vicinal
