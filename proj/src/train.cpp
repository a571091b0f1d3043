#include "pcdgan/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pcdgan/checkpoint.hpp"
#include "pcdgan/dpp.hpp"
#include "pcdgan/error.hpp"
#include "pcdgan/llets.hpp"

namespace fs = std::filesystem;

namespace pcdgan::app {

namespace {

// Stream keys for Rng::derive. The model tag never enters a key, so ccgan and
// pcdgan runs with the same seed see the same draws.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kSampleStream = 3;
constexpr int kMaxVicinityRetries = 1000;

std::string g9(double v) { return fmt::format("{:.9g}", v); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
}

std::vector<nn::Parameter> joined(const nn::Generator& G, const nn::Discriminator& D) {
  auto params = G.parameters();
  for (auto& p : D.parameters()) params.push_back(p);
  return params;
}

std::map<std::string, std::string> config_meta(const TrainConfig& cfg) {
  std::map<std::string, std::string> meta;
  meta["config_hash"] = config_hash(cfg);
  std::istringstream lines(config_text(cfg));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    meta["cfg." + line.substr(0, eq)] = line.substr(eq + 3);
  }
  return meta;
}

nn::Checkpoint make_checkpoint(const std::map<std::string, std::string>& meta,
                               const nn::Generator& G, const nn::Discriminator& D, long step) {
  nn::Checkpoint ckpt = nn::snapshot(architecture_hash(G, D), joined(G, D));
  ckpt.meta = meta;
  ckpt.meta["step"] = std::to_string(step);
  return ckpt;
}

const char* kLogHeader = "step,lr,gamma1,d_loss,d_real,d_fake,g_vicinal,pcd,g_total,vicinity_resamples\n";

std::string log_row(const StepRecord& mean, std::size_t resamples) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{}\n", mean.step, g9(mean.lr), g9(mean.gamma1),
                     g9(mean.d_loss), g9(mean.d_real), g9(mean.d_fake), g9(mean.g_vicinal),
                     g9(mean.pcd), g9(mean.g_total), resamples);
}

// Conditioning quality of generated designs: LLETS of the L1 distance between
// each design's estimated normalized label and its own target.
ad::Tensor conditioning_quality(const ad::Tensor& designs, const std::vector<double>& targets,
                                const synthetic::Dataset2D& ds, const llets::LletsParams& lp) {
  const double range = ds.label_max - ds.label_min;
  const ad::Tensor predicted =
      ad::scale(ad::add_scalar(synthetic::quality(designs), -ds.label_min), 1.0 / range);
  const ad::Tensor eps =
      ad::clamp(ad::abs(ad::sub(ad::Tensor::vector(targets), predicted)), 0.0, 1.0);
  return llets::llets_score(eps, lp);
}

}  // namespace

std::string output_root() {
  const char* env = std::getenv("PCDGAN_OUTPUT_ROOT");
  return env != nullptr && *env != '\0' ? std::string(env) : std::string("runs");
}

std::string default_run_dir(const TrainConfig& cfg) {
  return (fs::path(output_root()) /
          fmt::format("ex{}_{}_s{}", cfg.example_id, to_string(cfg.model), cfg.seed))
      .string();
}

vicinal::VicinalConfig vicinal_config(const TrainConfig& cfg, const synthetic::Dataset2D& ds) {
  vicinal::VicinalConfig v = vicinal::rule_of_thumb(ds, cfg.vicinal_mode, cfg.sampling());
  if (!std::isnan(cfg.sigma_vic)) v.sigma_vic = cfg.sigma_vic;
  if (!std::isnan(cfg.kappa)) v.kappa = cfg.kappa;
  if (!std::isnan(cfg.nu)) v.nu = cfg.nu;
  v.soft_weight_threshold = cfg.soft_weight_threshold;
  v.noise = cfg.label_noise;
  v.validate();
  return v;
}

std::uint64_t architecture_hash(const nn::Generator& G, const nn::Discriminator& D) {
  return nn::fnv1a(G.architecture() + "\n" + D.architecture());
}

TrainResult train(const TrainConfig& cfg_in, const std::string& out_dir,
                  const TrainOptions& opts) {
  TrainConfig cfg = cfg_in;
  cfg.finalize();

  TrainResult result;
  result.run_dir = out_dir;
  const fs::path dir(out_dir);
  if (opts.write_files) {
    fs::create_directories(dir);
    write_text(dir / "config.txt",
               fmt::format("# config_hash = {}\n{}", config_hash(cfg), config_text(cfg)));
  }

  const synthetic::Dataset2D ds =
      synthetic::generate_dataset(cfg.example_id, cfg.dataset_size, cfg.data_seed);
  const vicinal::VicinalConfig vcfg = vicinal_config(cfg, ds);
  const vicinal::LabelIndex index(ds);
  const llets::LletsParams lp = llets::llets_params(cfg.lambert_a);
  const bool singular = vcfg.sampling == vicinal::LabelSampling::kSingular;
  const bool use_pcd = cfg.effective_gamma1() > 0.0;

  Rng init_rng = Rng::derive(cfg.seed, {kInitStream});
  nn::Generator G(cfg.net, init_rng);
  nn::Discriminator D(cfg.net, init_rng);
  nn::Adam adam_g(G.parameters(), cfg.adam);
  nn::Adam adam_d(D.parameters(), cfg.adam);
  Rng rng = Rng::derive(cfg.seed, {kTrainStream});

  std::ofstream log;
  if (opts.write_files) {
    log.open(dir / "train_log.csv", std::ios::binary);
    log << kLogHeader;
  }

  const auto meta = config_meta(cfg);
  nn::Checkpoint last_good;
  StepRecord acc;
  long acc_n = 0;
  std::size_t interval_resamples = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (long t = 0; t < cfg.steps; ++t) {
    last_good = make_checkpoint(meta, G, D, t);
    StepRecord rec;
    rec.step = t + 1;
    rec.lr = adam_g.effective_lr();
    rec.gamma1 = cfg.gamma1_schedule == Gamma1Schedule::kConstant
                     ? cfg.effective_gamma1()
                     : vicinal::gamma1_schedule(t, cfg.steps, cfg.effective_gamma1(),
                                                cfg.gamma1_power);
    try {
      // Discriminator step.
      vicinal::VicinalBatch batch;
      for (int attempt = 0;; ++attempt) {
        try {
          batch = singular ? vicinal::build_vicinal_batch(index, vicinal::sample_singular_label(index, rng),
                                                          vcfg, cfg.batch_size, rng)
                           : vicinal::build_uniform_vicinal_batch(index, vcfg, cfg.batch_size, rng);
          break;
        } catch (const VicinityEmptyError&) {
          ++result.vicinity_resamples;
          ++interval_resamples;
          if (attempt + 1 >= kMaxVicinityRetries) throw;
        }
      }
      adam_d.zero_grad();
      const vicinal::DiscriminatorLoss dl = vicinal::discriminator_loss(D, G, batch, vcfg, rng);
      ad::backward(dl.loss);
      adam_d.step();
      rec.d_loss = dl.loss.item();
      rec.d_real = dl.real_term;
      rec.d_fake = dl.fake_term;

      // Generator step.
      std::vector<double> anchors(cfg.batch_size, batch.y_s);
      if (!singular) {
        for (auto& a : anchors) a = index.random_label(rng);
      }
      const vicinal::GeneratorLoss gl = vicinal::generator_loss(D, G, anchors, vcfg, rng);
      ad::Tensor pcd;
      if (use_pcd) {
        ad::Tensor q = conditioning_quality(gl.designs, gl.targets, ds, lp);
        if (cfg.realistic_quality) {
          q = ad::mul(q, D.forward(gl.designs, ad::Tensor::vector(gl.targets)).detach());
        }
        pcd = dpp::pcd_loss(dpp::build_kernel(gl.designs, q, cfg.gamma0, cfg.dpp_jitter,
                                              cfg.dpp_bandwidth, cfg.dpp_jitter_placement));
      }
      const ad::Tensor total = vicinal::total_generator_loss(gl.loss, pcd, rec.gamma1);
      if (!std::isfinite(total.item())) throw NumericError("total_generator_loss", "non-finite");
      adam_g.zero_grad();
      ad::backward(total);
      adam_g.step();
      adam_d.zero_grad();
      rec.g_vicinal = gl.loss.item();
      rec.pcd = pcd.defined() ? pcd.item() : 0.0;
      rec.g_total = total.item();
    } catch (const std::exception& e) {
      const bool numeric = dynamic_cast<const NumericError*>(&e) != nullptr ||
                           dynamic_cast<const SingularKernelError*>(&e) != nullptr;
      if (!numeric) throw;
      result.failed = true;
      result.failure = fmt::format("step {}: {}", t + 1, e.what());
      if (opts.write_files) {
        nn::save_checkpoint((dir / "last_good.ckpt").string(), last_good);
        std::string tag;
        if (const auto* ne = dynamic_cast<const NumericError*>(&e)) tag = ne->tag();
        write_text(dir / "failure.txt",
                   fmt::format("step = {}\nop = {}\nmessage = {}\nlr = {}\ngamma1 = {}\n"
                               "last_good = last_good.ckpt (parameters before step {})\n",
                               t + 1, tag.empty() ? "logdet_psd" : tag, e.what(), g9(rec.lr),
                               g9(rec.gamma1), t + 1));
      }
      break;
    }

    result.steps_completed = t + 1;
    if (opts.record_steps) result.records.push_back(rec);
    acc.lr += rec.lr;
    acc.gamma1 += rec.gamma1;
    acc.d_loss += rec.d_loss;
    acc.d_real += rec.d_real;
    acc.d_fake += rec.d_fake;
    acc.g_vicinal += rec.g_vicinal;
    acc.pcd += rec.pcd;
    acc.g_total += rec.g_total;
    ++acc_n;

    if ((t + 1) % cfg.log_every == 0 || t + 1 == cfg.steps) {
      const double n = static_cast<double>(acc_n);
      StepRecord mean{t + 1,          acc.lr / n,     acc.gamma1 / n,    acc.d_loss / n,
                      acc.d_real / n, acc.d_fake / n, acc.g_vicinal / n, acc.pcd / n,
                      acc.g_total / n};
      if (opts.write_files) log << log_row(mean, interval_resamples) << std::flush;
      if (opts.verbose) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "[%s] step %ld/%ld  d=%.4f  g=%.4f  pcd=%.4f  %.0fs\n",
                     out_dir.c_str(), t + 1, cfg.steps, mean.d_loss, mean.g_vicinal, mean.pcd,
                     secs);
      }
      acc = StepRecord{};
      acc_n = 0;
      interval_resamples = 0;
    }
    if (opts.write_files && (t + 1) % cfg.checkpoint_every == 0) {
      nn::save_checkpoint((dir / fmt::format("ckpt_{}.ckpt", t + 1)).string(),
                          make_checkpoint(meta, G, D, t + 1));
    }
  }

  if (opts.write_files && !result.failed) {
    result.final_checkpoint = (dir / "final.ckpt").string();
    nn::save_checkpoint(result.final_checkpoint, make_checkpoint(meta, G, D, result.steps_completed));
  }
  return result;
}

LoadedRun load_run(const std::string& checkpoint_path) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint_path);
  TrainConfig cfg;
  for (const auto& [key, value] : ckpt.meta) {
    if (key.rfind("cfg.", 0) != 0) continue;
    if (!set_config_value(cfg, key.substr(4), value)) {
      throw LoadError(fmt::format("{}: unknown config key '{}'", checkpoint_path, key.substr(4)));
    }
  }
  const auto hash = ckpt.meta.find("config_hash");
  if (hash == ckpt.meta.end() || hash->second != config_hash(cfg)) {
    throw LoadError(checkpoint_path + ": config echo does not match its hash");
  }
  Rng rng(0);
  nn::Generator G(cfg.net, rng);
  nn::Discriminator D(cfg.net, rng);
  nn::restore(ckpt, architecture_hash(G, D), G.parameters());
  const auto step = ckpt.meta.find("step");
  return LoadedRun{cfg, std::move(G), step == ckpt.meta.end() ? 0 : std::stol(step->second)};
}

ModeOccupancy mode_occupancy(std::span<const double> points, double radius, double min_fraction) {
  if (points.size() % 2 != 0) throw ContractViolation("mode_occupancy: expects [N, 2] points");
  ModeOccupancy occ;
  occ.total = points.size() / 2;
  for (std::size_t i = 0; i < occ.total; ++i) {
    int best = -1;
    double best_d2 = radius * radius;
    for (int k = 0; k < synthetic::kModes; ++k) {
      const auto c = synthetic::mode_center(k);
      const double dx = points[2 * i] - c[0], dy = points[2 * i + 1] - c[1];
      const double d2 = dx * dx + dy * dy;
      if (d2 <= best_d2) {
        best_d2 = d2;
        best = k;
      }
    }
    if (best < 0) {
      ++occ.unassigned;
    } else {
      ++occ.counts[static_cast<std::size_t>(best)];
    }
  }
  for (std::size_t c : occ.counts) {
    if (occ.total > 0 && static_cast<double>(c) >= min_fraction * static_cast<double>(occ.total)) {
      ++occ.covered;
    }
  }
  return occ;
}

EvalOutput evaluate_run(const std::string& checkpoint_path, const eval::ProtocolConfig& protocol,
                        bool full, std::string out_dir) {
  const LoadedRun run = load_run(checkpoint_path);
  if (out_dir.empty()) out_dir = fs::path(checkpoint_path).parent_path().string();
  if (out_dir.empty()) out_dir = ".";
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  const synthetic::Dataset2D ds =
      synthetic::generate_dataset(run.cfg.example_id, run.cfg.dataset_size, run.cfg.data_seed);

  EvalOutput out;
  out.report = eval::evaluate(run.G, ds, protocol);
  out.report.run_id = fs::path(checkpoint_path).parent_path().filename().string();
  out.report.model_tag = to_string(run.cfg.model);
  out.report.seed = run.cfg.seed;

  Rng sample_rng = Rng::derive(protocol.seed, {kSampleStream});
  const std::vector<double> samples =
      eval::generate_designs(run.G, kScatterCondition, kScatterSamples, sample_rng);
  out.occupancy = mode_occupancy(samples);

  out.eval_csv = (dir / (full ? "eval_full.csv" : "eval.csv")).string();
  eval::write_report_csv(out.eval_csv, out.report);

  out.samples_csv = (dir / "samples_c0.4.csv").string();
  {
    std::string text = fmt::format("# condition={} example_id={}\nx1,x2,label\n",
                                   g9(kScatterCondition), run.cfg.example_id);
    const auto labels = eval::predict_labels(samples, ds);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      text += fmt::format("{},{},{}\n", g9(samples[2 * i]), g9(samples[2 * i + 1]), g9(labels[i]));
    }
    write_text(out.samples_csv, text);
  }

  using nlohmann::ordered_json;
  ordered_json j;
  j["run_id"] = out.report.run_id;
  j["checkpoint"] = fs::path(checkpoint_path).filename().string();
  j["step"] = run.step;
  j["model"] = to_string(run.cfg.model);
  j["example"] = run.cfg.example_id;
  j["seed"] = run.cfg.seed;
  j["config_hash"] = config_hash(run.cfg);
  j["protocol"] = {{"conditions", protocol.n_conditions},
                   {"samples", protocol.n_samples},
                   {"repeats", protocol.repeats},
                   {"subset_size", protocol.subset_size},
                   {"subsets", protocol.n_subsets},
                   {"diversity_bandwidth", protocol.diversity_bandwidth},
                   {"seed", protocol.seed}};
  auto metric = [](const eval::MetricStats& s) {
    return ordered_json{{"mean", std::stod(g9(s.mean))}, {"std", std::stod(g9(s.std))}};
  };
  j["label_error"] = metric(out.report.label_error);
  j["likelihood"] = metric(out.report.likelihood);
  j["diversity"] = metric(out.report.diversity);
  j["mode_occupancy"] = {{"condition", kScatterCondition},
                         {"counts", out.occupancy.counts},
                         {"unassigned", out.occupancy.unassigned},
                         {"covered", out.occupancy.covered}};
  j["failed"] = out.report.failed;
  if (out.report.failed) j["diagnostics"] = out.report.diagnostics;
  ordered_json cfg_echo;
  std::istringstream lines(config_text(run.cfg));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    cfg_echo[line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["config"] = cfg_echo;
  out.summary_json = (dir / (full ? "summary_full.json" : "summary.json")).string();
  write_text(out.summary_json, j.dump(2) + "\n");
  return out;
}

}  // namespace pcdgan::app
