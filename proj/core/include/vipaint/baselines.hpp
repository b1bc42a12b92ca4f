#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vipaint/vipaint.hpp"

namespace vipaint {

enum class BaselineMethod { Blended, RePaint, DPS, RedDiff, RedDiffV };

std::string to_string(BaselineMethod method);
BaselineMethod baseline_method_from_string(const std::string& s);

struct BaselineConfig {
    BaselineMethod method = BaselineMethod::Blended;
    /// Grid points from T down to the final time (samplers) or optimization steps (RED-Diff).
    std::size_t steps = 1000;
    /// Guidance scale applied to the gradient of the residual norm (DPS).
    double zeta = 5.0;
    /// RePaint time-travel: jump length in grid steps and repetitions per segment.
    std::size_t jump_length = 10;
    std::size_t jumps = 10;
    /// RED-Diff regularization weight at the grid midpoint and Adam learning rate.
    double prior_weight = 0.25;
    double lr = 0.1;
    /// DDIM coefficient of VP ancestral steps (ignored for VE).
    double eta = 1.0;
    double rho = 7.0;
    /// Last grid time; <= 0 selects the time where sigma = 2 sigma_min.
    double t_min = 0.0;

    /// Defaults for a method: 1000 steps for Blended and DPS, 256 for RePaint,
    /// DPS scale 5, RED-Diff weight 0.25 (VP) or 50 (VE).
    static BaselineConfig defaults(BaselineMethod method, ScheduleKind kind);
    void validate() const;
};

/// Called after every grid step of a sampler with the step index, the new time and the latent.
using StepObserver = std::function<void(std::size_t step, double t, const Vec& z)>;

/// Coordinate replacement: ancestral prior steps, observed coordinates overwritten with a
/// forward-noised copy of y after every step. Mask operators only.
SampleSet blended_sample(const InverseProblem& problem, const BaselineConfig& config, std::size_t n,
                         std::uint64_t seed, const StepObserver& observer = {});

/// Blended sampling with time travel: after each segment of `jump_length` steps, noise back
/// up to the segment start and re-descend, `jumps` times. jumps = 0 reproduces blended_sample.
SampleSet repaint_sample(const InverseProblem& problem, const BaselineConfig& config, std::size_t n,
                         std::uint64_t seed, const StepObserver& observer = {});

/// Ancestral prior steps followed by z_s -= zeta * grad_{z_t} ||y - A x_hat(z_t, t)||^2.
SampleSet dps_sample(const InverseProblem& problem, const BaselineConfig& config, std::size_t n, std::uint64_t seed);

struct RedDiffStep {
    double t;
    double loss;
};

struct RedDiffResult {
    Vec mu;
    std::vector<RedDiffStep> trace;
};

/// Point-estimate variational inference. annealed = true walks t from T down to the final
/// time; otherwise t is drawn uniformly from the grid each step.
RedDiffResult reddiff(const InverseProblem& problem, const BaselineConfig& config, bool annealed, std::uint64_t seed);

/// Regularization weight w_t = prior_weight * (sigma_t / alpha_t) / (sigma_m / alpha_m),
/// with m the midpoint of the grid.
std::vector<double> reddiff_weights(const NoiseSchedule& schedule, const BaselineConfig& config);

/// Dispatches on config.method. RED-Diff has zero variance, so it returns n copies of mu.
SampleSet run_baseline(const InverseProblem& problem, const BaselineConfig& config, std::size_t n, std::uint64_t seed);

/// Decreasing sampler grid from T to the final time.
TimeGrid baseline_grid(const NoiseSchedule& schedule, const BaselineConfig& config);

} // namespace vipaint
