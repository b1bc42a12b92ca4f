#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vipaint/baselines.hpp"
#include "vipaint/gmm.hpp"
#include "vipaint/mlp.hpp"
#include "vipaint/vipaint.hpp"

namespace vipaint {

/// Invalid experiment configuration; the message names the field and, when known, the line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kConfigSchemaVersion = 1;

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::VE;
    /// VE: sigma bounds; VP: variance bounds.
    double lo = 0.002;
    double hi = 50.0;
    /// <= 0 selects the schedule default.
    double t_max = 0.0;
    NoiseSchedule build() const;
};

struct MlpPriorSpec {
    std::filesystem::path weights_path;
    /// Number of training draws from the data distribution.
    std::size_t train_samples = 4096;
    std::uint64_t data_seed = 0;
    MlpArchitecture architecture;
    MlpTrainConfig training;
};

/// The data distribution is always a Gaussian mixture; it provides the exact posterior.
/// With `mlp` set, inference uses a trained network in place of the analytic denoiser.
struct PriorSpec {
    GmmPrior gmm;
    std::optional<MlpPriorSpec> mlp;
};

struct OperatorSpec {
    OperatorKind kind = OperatorKind::Mask;
    std::vector<int> mask;
    Shape shape;
    std::size_t kernel_size = 3;
    double kernel_std = 1.0;
    std::size_t factor = 2;
    double sigma_v = 0.05;
    ObservationModel observation_model = ObservationModel::Gaussian;
    /// <= 0 derives the scale from prior samples.
    double laplace_scale = 0.0;
};

struct MethodSpec {
    /// "vipaint" or a baseline name (see to_string(BaselineMethod)).
    std::string name;
    VipaintConfig vipaint;
    BaselineConfig baseline;
    bool is_vipaint() const { return name == "vipaint"; }
};

struct ExperimentConfig {
    int schema_version = kConfigSchemaVersion;
    std::string name;
    std::filesystem::path source;
    ScheduleSpec schedule;
    PriorSpec prior;
    OperatorSpec op;
    Vec y;
    std::size_t samples = 20;
    std::size_t oracle_samples = 2000;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path output_dir;
    std::vector<MethodSpec> methods;
    /// Canonical JSON of the problem (schedule, prior, operator, observation, sample counts).
    std::string problem_canonical;
    /// Canonical JSON of each method block, aligned with `methods`.
    std::vector<std::string> method_canonical;

    const MethodSpec& method(const std::string& name) const;
    /// FNV-1a 64 of the canonical problem text plus the method block.
    std::uint64_t run_hash(const std::string& method) const;
    std::uint64_t problem_hash() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

std::uint64_t fnv1a64(const std::string& text);
std::string hash_hex(std::uint64_t h);

/// "0..9", "1,4,7" or a mix such as "0..2,10".
std::vector<std::uint64_t> parse_seed_list(const std::string& spec);

/// Everything needed to run inference for one configuration.
class Problem {
public:
    explicit Problem(const ExperimentConfig& config);
    const NoiseSchedule& schedule() const { return schedule_; }
    const Denoiser& denoiser() const { return *denoiser_; }
    const MeasurementOp& op() const { return op_; }
    const Vec& y() const { return y_; }
    const GmmPosterior& truth() const { return truth_; }
    InverseProblem inverse(const Denoiser& den) const { return {den, op_, y_}; }

private:
    NoiseSchedule schedule_;
    std::unique_ptr<Denoiser> denoiser_;
    MeasurementOp op_;
    Vec y_;
    GmmPosterior truth_;
};

MeasurementOp build_operator(const OperatorSpec& spec, const GmmPrior& data);

struct RunSummary {
    std::string method;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t problem_hash = 0;
    std::size_t samples = 0;
    std::vector<double> mode_frequencies;
    double mode_tv = 0.0;
    double mean_error = 0.0;
    double cov_error = 0.0;
    double energy_distance = 0.0;
    double observed_mse = 0.0;
    /// Forward denoiser evaluations per sampling chain (VIPaint: per Monte-Carlo chain of Phase 1).
    double denoiser_calls = 0.0;
    double final_loss = 0.0;
    double wall_seconds = 0.0;
};

struct RunOutput {
    RunSummary summary;
    SampleSet samples;
    /// VIPaint loss breakdown per step; empty for samplers.
    std::vector<LossBreakdown> trace;
    /// RED-Diff (t, loss) per step.
    std::vector<RedDiffStep> reddiff_trace;
};

/// Runs one method for one seed without touching the filesystem.
RunOutput run_single(const ExperimentConfig& config, const Problem& problem, const MethodSpec& method,
                     std::uint64_t seed);

struct RunOptions {
    std::vector<std::string> methods;  // empty: every method in the config
    std::vector<std::uint64_t> seeds;  // empty: config seeds
    std::filesystem::path output_root; // empty: config output_dir
    std::size_t threads = 1;
    bool force = false;
};

/// Runs every (method, seed) pair and writes <root>/<method>/seed-<n>/{samples.bin, trace.csv,
/// summary.json, timing.json, scatter.svg}. Returns the number of failed runs.
int run_experiment(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);

struct CompareRow {
    std::string method;
    std::size_t runs = 0;
    double tv_mean = 0, tv_std = 0;
    double mean_error_mean = 0, mean_error_std = 0;
    double cov_error_mean = 0, cov_error_std = 0;
    double energy_mean = 0, energy_std = 0;
    double observed_mse_mean = 0, observed_mse_std = 0;
    double calls_mean = 0;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    /// Run directories lacking a readable summary.
    std::vector<std::filesystem::path> skipped;
    std::vector<RunSummary> summaries;
};

/// Collects summary.json files below each directory and aggregates them per method.
/// Throws ConfigError on mismatched problem hashes unless `force`.
CompareResult compare_runs(const std::vector<std::filesystem::path>& dirs, bool force);
void write_compare_csv(const CompareResult& result, std::ostream& os);

std::string summary_json(const RunSummary& summary);
RunSummary parse_summary_json(const std::string& text);

/// Little-endian float64 matrix with header: magic "VIPSMPL\0", u32 version, u32 dtype (1 = f64),
/// u64 rows, u64 cols, u64 config hash.
void write_samples(const std::filesystem::path& path, const SampleSet& samples, std::uint64_t config_hash);
struct SampleFile {
    std::uint64_t config_hash = 0;
    SampleSet samples;
};
SampleFile read_samples(const std::filesystem::path& path);

void write_trace_csv(std::ostream& os, const std::vector<LossBreakdown>& trace);
void write_reddiff_trace_csv(std::ostream& os, const std::vector<RedDiffStep>& trace);

/// 2-D scatter of reference samples, method samples and the lines A x = y.
std::string scatter_svg(const SampleSet& reference, const SampleSet& samples, const MeasurementOp& op, const Vec& y,
                        const std::string& title);

/// Exact posterior as JSON (weights, means, covariances).
std::string posterior_json(const GmmPosterior& posterior);

struct SelfCheckResult {
    std::string name;
    bool passed;
    std::string detail;
};

/// Fast invariant suite over the core modules.
std::vector<SelfCheckResult> run_selfcheck();

} // namespace vipaint
