#include "pcdgan/config.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "pcdgan/checkpoint.hpp"
#include "pcdgan/error.hpp"

namespace pcdgan::app {

std::string to_string(ModelKind m) { return m == ModelKind::kPcdgan ? "pcdgan" : "ccgan"; }

ModelKind parse_model(const std::string& s) {
  if (s == "pcdgan") return ModelKind::kPcdgan;
  if (s == "ccgan") return ModelKind::kCcgan;
  throw ContractViolation("unknown model '" + s + "' (expected pcdgan or ccgan)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "auto" || v == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw ContractViolation(fmt::format("config: {} = '{}' is not a number", key, v));
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long out = 0;
  try {
    out = std::stol(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw ContractViolation(fmt::format("config: {} = '{}' is not an integer", key, v));
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ContractViolation(fmt::format("config: {} = '{}' is not a boolean", key, v));
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "auto";
  return fmt::format("{:.17g}", v);
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define PCDGAN_DOUBLE(name, member)                                              \
  Field {                                                                        \
    name, [](const TrainConfig& c) { return fmt_double(c.member); },             \
        [](TrainConfig& c, const std::string& v) { c.member = to_double(name, v); } \
  }
#define PCDGAN_INT(name, member, type)                                                      \
  Field {                                                                                   \
    name, [](const TrainConfig& c) { return std::to_string(c.member); },                    \
        [](TrainConfig& c, const std::string& v) { c.member = static_cast<type>(to_long(name, v)); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      PCDGAN_INT("example", example_id, int),
      Field{"model", [](const TrainConfig& c) { return to_string(c.model); },
            [](TrainConfig& c, const std::string& v) { c.model = parse_model(v); }},
      PCDGAN_INT("seed", seed, std::uint64_t),
      PCDGAN_INT("data_seed", data_seed, std::uint64_t),
      PCDGAN_INT("dataset_size", dataset_size, std::size_t),
      PCDGAN_INT("steps", steps, long),
      PCDGAN_INT("batch_size", batch_size, std::size_t),
      PCDGAN_DOUBLE("lr", adam.base_lr),
      PCDGAN_DOUBLE("lr_decay", adam.decay_factor),
      PCDGAN_INT("lr_decay_every", adam.decay_every, std::int64_t),
      PCDGAN_DOUBLE("adam_beta1", adam.beta1),
      PCDGAN_DOUBLE("adam_beta2", adam.beta2),
      PCDGAN_DOUBLE("adam_eps", adam.eps),
      PCDGAN_INT("noise_dim", net.noise_dim, std::size_t),
      Field{"hidden",
            [](const TrainConfig& c) { return fmt::format("{}", fmt::join(c.net.hidden, ",")); },
            [](TrainConfig& c, const std::string& v) {
              c.net.hidden.clear();
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                c.net.hidden.push_back(static_cast<std::size_t>(to_long("hidden", trim(item))));
              }
            }},
      PCDGAN_DOUBLE("leaky_slope", net.leaky_slope),
      PCDGAN_DOUBLE("gamma0", gamma0),
      PCDGAN_DOUBLE("gamma1", gamma1),
      Field{"gamma1_schedule",
            [](const TrainConfig& c) {
              return std::string(c.gamma1_schedule == Gamma1Schedule::kConstant ? "constant"
                                                                                 : "escalating");
            },
            [](TrainConfig& c, const std::string& v) {
              if (v == "constant") {
                c.gamma1_schedule = Gamma1Schedule::kConstant;
              } else if (v == "escalating") {
                c.gamma1_schedule = Gamma1Schedule::kEscalating;
              } else {
                throw ContractViolation("config: gamma1_schedule must be constant or escalating");
              }
            }},
      PCDGAN_DOUBLE("gamma1_power", gamma1_power),
      PCDGAN_DOUBLE("lambert_a", lambert_a),
      PCDGAN_DOUBLE("dpp_jitter", dpp_jitter),
      PCDGAN_DOUBLE("dpp_bandwidth", dpp_bandwidth),
      Field{"dpp_jitter_placement",
            [](const TrainConfig& c) { return dpp::to_string(c.dpp_jitter_placement); },
            [](TrainConfig& c, const std::string& v) {
              c.dpp_jitter_placement = dpp::parse_jitter_placement(v);
            }},
      Field{"realistic_quality",
            [](const TrainConfig& c) { return std::string(c.realistic_quality ? "true" : "false"); },
            [](TrainConfig& c, const std::string& v) {
              c.realistic_quality = to_bool("realistic_quality", v);
            }},
      Field{"vicinal_mode", [](const TrainConfig& c) { return vicinal::to_string(c.vicinal_mode); },
            [](TrainConfig& c, const std::string& v) {
              c.vicinal_mode = vicinal::parse_vicinity_mode(v);
            }},
      Field{"label_sampling", [](const TrainConfig& c) { return c.label_sampling; },
            [](TrainConfig& c, const std::string& v) {
              if (v != "auto") vicinal::parse_label_sampling(v);
              c.label_sampling = v;
            }},
      Field{"label_noise", [](const TrainConfig& c) { return vicinal::to_string(c.label_noise); },
            [](TrainConfig& c, const std::string& v) {
              c.label_noise = vicinal::parse_label_noise(v);
            }},
      PCDGAN_DOUBLE("sigma_vic", sigma_vic),
      PCDGAN_DOUBLE("kappa", kappa),
      PCDGAN_DOUBLE("nu", nu),
      PCDGAN_DOUBLE("soft_weight_threshold", soft_weight_threshold),
      PCDGAN_INT("log_every", log_every, long),
      PCDGAN_INT("checkpoint_every", checkpoint_every, long),
      PCDGAN_INT("eval_conditions", protocol.n_conditions, std::size_t),
      PCDGAN_INT("eval_samples", protocol.n_samples, std::size_t),
      PCDGAN_INT("eval_repeats", protocol.repeats, std::size_t),
      PCDGAN_INT("eval_subset_size", protocol.subset_size, std::size_t),
      PCDGAN_INT("eval_subsets", protocol.n_subsets, std::size_t),
      PCDGAN_INT("eval_seed", protocol.seed, std::uint64_t),
  };
  return table;
}

#undef PCDGAN_DOUBLE
#undef PCDGAN_INT

}  // namespace

void TrainConfig::finalize() {
  if (example_id != 1 && example_id != 2) {
    throw ContractViolation(fmt::format("config: example must be 1 or 2, got {}", example_id));
  }
  if (steps < 0 || batch_size == 0) throw ContractViolation("config: steps/batch_size out of range");
  if (!(gamma1 >= 0.0) || !(gamma0 > 0.0)) throw ContractViolation("config: gamma0 > 0 and gamma1 >= 0 required");
  if (lambert_a < 1.3591409142295225 || lambert_a > 10.0) {
    throw ContractViolation(fmt::format("config: lambert_a = {} outside [e/2, 10]", lambert_a));
  }
  if (log_every <= 0 || checkpoint_every <= 0) {
    throw ContractViolation("config: log_every and checkpoint_every must be positive");
  }
  if (model == ModelKind::kCcgan) gamma1 = 0.0;
}

double TrainConfig::effective_gamma1() const { return model == ModelKind::kCcgan ? 0.0 : gamma1; }

vicinal::LabelSampling TrainConfig::sampling() const {
  if (label_sampling == "auto") {
    return model == ModelKind::kPcdgan ? vicinal::LabelSampling::kSingular
                                       : vicinal::LabelSampling::kUniform;
  }
  return vicinal::parse_label_sampling(label_sampling);
}

bool set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return true;
    }
  }
  return false;
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ContractViolation(fmt::format("config line {}: expected key = value", lineno));
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!set_config_value(base, key, value)) {
      throw ContractViolation(fmt::format("config line {}: unknown key '{}'", lineno, key));
    }
  }
  return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw LoadError("config: file not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string config_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += fmt::format("{} = {}\n", f.key, f.get(cfg));
  return out;
}

std::string config_hash(const TrainConfig& cfg) { return nn::hex64(nn::fnv1a(config_text(cfg))); }

}  // namespace pcdgan::app
