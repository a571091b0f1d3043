#pragma once

// Training loop, run directories and checkpoint-driven evaluation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcdgan/config.hpp"
#include "pcdgan/eval.hpp"
#include "pcdgan/nn.hpp"
#include "pcdgan/synthetic.hpp"
#include "pcdgan/vicinal.hpp"

namespace pcdgan::app {

// Root for run directories: $PCDGAN_OUTPUT_ROOT, or "runs".
std::string output_root();
// <root>/ex<example>_<model>_s<seed>
std::string default_run_dir(const TrainConfig& cfg);

struct StepRecord {
  long step = 0;
  double lr = 0.0;
  double gamma1 = 0.0;
  double d_loss = 0.0;
  double d_real = 0.0;
  double d_fake = 0.0;
  double g_vicinal = 0.0;
  double pcd = 0.0;
  double g_total = 0.0;
};

struct TrainOptions {
  bool write_files = true;
  bool record_steps = false;  // keep every StepRecord in the result
  bool verbose = false;       // progress lines on stderr
};

struct TrainResult {
  std::string run_dir;
  long steps_completed = 0;
  std::size_t vicinity_resamples = 0;
  bool failed = false;
  std::string failure;
  std::string final_checkpoint;
  std::vector<StepRecord> records;
};

// The vicinal settings a run actually uses: rule of thumb, then any explicit
// sigma_vic / kappa / nu from the config.
vicinal::VicinalConfig vicinal_config(const TrainConfig& cfg, const synthetic::Dataset2D& ds);

// Runs cfg.steps iterations of one D step then one G step. With write_files,
// out_dir receives config.txt, train_log.csv (interval means every log_every
// steps), ckpt_<step>.ckpt every checkpoint_every steps and final.ckpt. A
// non-finite value or a singular DPP kernel stops the run: the parameters from
// before the failing step go to last_good.ckpt and failure.txt names the step
// and the failing op.
TrainResult train(const TrainConfig& cfg, const std::string& out_dir,
                  const TrainOptions& opts = {});

std::uint64_t architecture_hash(const nn::Generator& G, const nn::Discriminator& D);

// A generator rebuilt from a checkpoint, with the config it was trained under.
struct LoadedRun {
  TrainConfig cfg;
  nn::Generator G;
  long step = 0;
};

// Throws LoadError on a missing file, a config echo that does not match its
// hash, or an architecture mismatch.
LoadedRun load_run(const std::string& checkpoint_path);

struct ModeOccupancy {
  std::array<std::size_t, synthetic::kModes> counts{};
  std::size_t total = 0;
  std::size_t unassigned = 0;
  std::size_t covered = 0;  // modes holding at least min_fraction of the samples
};

// Assigns each point ([N, 2]) to its nearest mode center if within radius.
ModeOccupancy mode_occupancy(std::span<const double> points, double radius = 0.25,
                             double min_fraction = 0.02);

inline constexpr double kScatterCondition = 0.4;
inline constexpr std::size_t kScatterSamples = 1000;

struct EvalOutput {
  eval::EvalReport report;
  ModeOccupancy occupancy;
  std::string eval_csv;
  std::string summary_json;
  std::string samples_csv;
};

// Evaluates the checkpoint under `protocol` and writes eval.csv (or
// eval_full.csv when `full`), summary.json and samples_c0.4.csv into out_dir
// (the checkpoint's directory when empty).
EvalOutput evaluate_run(const std::string& checkpoint_path, const eval::ProtocolConfig& protocol,
                        bool full = false, std::string out_dir = "");

}  // namespace pcdgan::app
