#pragma once

// Training configuration and its flat `key = value` text form.

#include <cstdint>
#include <limits>
#include <string>

#include "pcdgan/dpp.hpp"
#include "pcdgan/eval.hpp"
#include "pcdgan/nn.hpp"
#include "pcdgan/vicinal.hpp"

namespace pcdgan::app {

enum class ModelKind { kPcdgan, kCcgan };
enum class Gamma1Schedule { kConstant, kEscalating };

std::string to_string(ModelKind m);
ModelKind parse_model(const std::string& s);

struct TrainConfig {
  int example_id = 1;
  ModelKind model = ModelKind::kPcdgan;
  std::uint64_t seed = 0;
  std::uint64_t data_seed = 2021;
  std::size_t dataset_size = synthetic::kDefaultSize;

  long steps = 50000;
  std::size_t batch_size = 32;
  nn::AdamConfig adam;
  nn::NetworkConfig net;

  double gamma0 = 3.0;
  double gamma1 = 0.5;
  Gamma1Schedule gamma1_schedule = Gamma1Schedule::kConstant;
  double gamma1_power = 5.0;
  double lambert_a = 4.7;
  double dpp_jitter = 1e-6;
  double dpp_bandwidth = 1.0;
  dpp::JitterPlacement dpp_jitter_placement = dpp::JitterPlacement::kSimilarity;
  // Multiply the conditioning quality by a detached D(x, y).
  bool realistic_quality = false;

  vicinal::VicinityMode vicinal_mode = vicinal::VicinityMode::kSoft;
  // "auto" follows the model: singular for pcdgan, uniform for ccgan.
  std::string label_sampling = "auto";
  vicinal::LabelNoise label_noise = vicinal::LabelNoise::kShared;
  // NaN selects the rule-of-thumb value derived from the dataset.
  double sigma_vic = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double nu = std::numeric_limits<double>::quiet_NaN();
  double soft_weight_threshold = 1e-3;

  long log_every = 100;
  long checkpoint_every = 5000;

  eval::ProtocolConfig protocol;

  // Applies model-implied settings (ccgan forces gamma1 = 0) and checks ranges.
  void finalize();
  double effective_gamma1() const;
  vicinal::LabelSampling sampling() const;
};

// Reads `key = value` lines ('#' starts a comment) over the defaults in `base`.
// Unknown keys and unparsable values raise ContractViolation.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});
// Sets one key. Returns false for an unknown key.
bool set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
// Every key in a fixed order, so identical configs give identical text.
std::string config_text(const TrainConfig& cfg);
std::string config_hash(const TrainConfig& cfg);

}  // namespace pcdgan::app
