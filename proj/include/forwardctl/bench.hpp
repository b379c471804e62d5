#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "forwardctl/cascade.hpp"
#include "forwardctl/io.hpp"
#include "forwardctl/lmi.hpp"
#include "forwardctl/sysdata.hpp"

namespace forwardctl {

enum class RunMode { kCollect, kDesign2, kDesignN, kSweepN, kNoiseSweep, kVerify };

std::string mode_name(RunMode m);
RunMode parse_mode(const std::string& s);  // throws std::invalid_argument

class ConfigError : public IoError {
 public:
  using IoError::IoError;
};

struct RunConfig {
  RunMode mode = RunMode::kDesignN;
  // System source: the bundled alternating fixture, or one [A|B] CSV per stage
  // (cycled when more stages are requested than files given).
  std::string fixture = "alternating";
  std::vector<fs::path> stage_files;
  Index stages = 2;
  Index t = 8;
  std::uint64_t seed = 1;
  double measurement_bound = 0.0;
  double process_bound = 0.0;
  std::vector<double> noise_caps = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  std::vector<double> alphas = alpha_grid();
  Index n_max = 11;
  Index monolithic_n_max = 11;
  Index steps = 300;
  // PE input u ~ input_scale · N(0, I).
  std::string input_distribution = "unit_normal";
  double input_scale = 1.0;
  std::string method = "forwarding";  // designN: forwarding | monolithic
  fs::path batches;                   // design*/verify: reuse a collect run's batches/
  fs::path controller;                // verify: reuse a design run's controller/
  fs::path out_dir = "out";
  int threads = 0;  // 0: hardware concurrency
};

// Relative paths inside the document resolve against `base_dir`.
RunConfig parse_config(const std::string& json_text, const fs::path& base_dir);
RunConfig load_config(const fs::path& path);
void validate(const RunConfig& cfg);  // throws ConfigError
std::string config_json(const RunConfig& cfg);

struct RunPaths {
  fs::path root, batches, controller, tables, plots;
};
// out/<mode>-s<seed>/{batches,controller,tables,plots}
std::string run_id(const RunConfig& cfg);
RunPaths prepare_run(const RunConfig& cfg);

CascadeSystem system_from_config(const RunConfig& cfg, Index stages);

// Deterministic seed derivation for independent streams of one run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct Experiment {
  CascadeSystem truth;
  Mat u;
  std::vector<Trajectory> traj;
  std::vector<DataBatch> batches;   // measured
  std::vector<NoiseLedger> ledgers; // oracle-side
};

Experiment generate_experiment(const CascadeSystem& truth, Index t, std::uint64_t seed,
                               double measurement_bound = 0.0, double process_bound = 0.0,
                               double input_scale = 1.0);

// ---------------------------------------------------------------- noisy 2-cascade trials

struct NoisyTrialOptions {
  double cap = 1e-3;
  Index t = 8;
  std::uint64_t seed = 1;
  double process_bound = 0.0;
  std::vector<double> alphas = alpha_grid();
  // When no α makes the robust LMI feasible, fall back to the nominal gain LMI
  // on the corrupted data.
  bool nominal_fallback = false;
};

struct StageChoice {
  GainCertificate gain;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  bool snr = false;     // oracle SNR condition holds at the chosen α
  bool robust = false;  // robust LMI feasible at the chosen α
};

// Smallest α with the (oracle) SNR condition and a feasible robust LMI;
// failing that the smallest grid α with a feasible robust LMI; failing that
// (optionally) the nominal gain.
StageChoice choose_stage_gain(const DataBatch& batch_bar, const Eigen::Ref<const Mat>& r_minus,
                              const std::vector<double>& alphas, bool nominal_fallback, Index stage);

struct NoisyTrial {
  Experiment exp;
  bool designed = false;
  std::string failure;
  StageChoice stage1, stage2;
  ForwardingController controller;
  SylvesterCertificate upsilon_hat;
  DataBatch zeta;
  Mat r1, r2, r_zeta;
  Mat a1_cl;          // A₁ + B₁N₁ (true)
  Mat upsilon_true;   // oracle Υ for the designed N₁
  Mat delta_ups;      // Υ − Υ̂
  double rho_true = std::numeric_limits<double>::quiet_NaN();
  double delta_norm2 = std::numeric_limits<double>::quiet_NaN();
  std::optional<ErrorBoundReport> bound;
  double residual = std::numeric_limits<double>::quiet_NaN();
  double residual_scale = std::numeric_limits<double>::quiet_NaN();

  bool snr_ok() const { return stage1.snr && stage2.snr; }
  bool robust_ok() const { return stage1.robust && stage2.robust; }
  double ratio() const;
};

NoisyTrial run_noisy_trial(const CascadeSystem& truth, const NoisyTrialOptions& opt);

// Data-only α policy for the noisy 2-cascade: the largest feasible α₁, then
// the largest feasible α₂ for the resulting ζ data.
NoisyDesign design_2cascade_noisy_auto(const DataBatch& b1, const DataBatch& b2,
                                       const std::vector<double>& alphas);

// ---------------------------------------------------------------- sweeps

struct SweepRow {
  Index n = 0;
  std::string method;  // forwarding | monolithic
  Index t_min_theory = 0;
  Index t_used = 0;
  bool succeeded = false;
  double rho_closed_loop = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
  std::string note;  // failure of the last attempt
};

std::vector<SweepRow> sweep_n(const RunConfig& cfg);
// Deterministic columns only; wall-clock time goes to sweep_timing_json.
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_timing_json(const std::vector<SweepRow>& rows);

struct NoiseRow {
  double cap = 0.0;
  std::string method;
  bool snr_holds = false;
  bool feasible = false;
  double alpha1 = std::numeric_limits<double>::quiet_NaN();
  double alpha2 = std::numeric_limits<double>::quiet_NaN();
  double rho_true = std::numeric_limits<double>::quiet_NaN();
  double delta_ups_norm2 = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

std::vector<NoiseRow> noise_sweep(const RunConfig& cfg);
std::string noise_csv(const std::vector<NoiseRow>& rows);

// ---------------------------------------------------------------- plots

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  bool log_y = false;
};

// Deterministic SVG; throws std::invalid_argument on an empty table.
std::string emit_plot(const PlotSpec& spec);

// ---------------------------------------------------------------- commands

struct CommandResult {
  fs::path run_dir;
  std::vector<fs::path> written;
  std::string summary;
};

CommandResult cmd_collect(const RunConfig& cfg);
CommandResult cmd_design2(const RunConfig& cfg);
CommandResult cmd_designN(const RunConfig& cfg);
CommandResult cmd_sweep_n(const RunConfig& cfg);
CommandResult cmd_noise_sweep(const RunConfig& cfg);
CommandResult cmd_verify(const RunConfig& cfg);
CommandResult run_command(const RunConfig& cfg);

}  // namespace forwardctl
