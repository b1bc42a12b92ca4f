#pragma once

#include <cstdint>
#include <vector>

#include "vipaint/denoiser.hpp"
#include "vipaint/diffusion.hpp"
#include "vipaint/operators.hpp"
#include "vipaint/schedule.hpp"

namespace vipaint {

/// Initialization constants for the variational parameters.
///
///   mu_Te = alpha_Te y + a1 sigma_Te eps,  mu_i = alpha_i y + a2 sigma_i eps,  tau_Te = sigma_Te,
///   tau_i from the prior transition std (VP: evaluated with DDIM coefficient a3), gamma_i = gamma0.
struct VipaintInit {
    double a1;
    double a2;
    double a3;
    double gamma0;

    static VipaintInit ve() { return {0.01, 0.01, 0.0, 0.5}; }
    /// VP presets use gamma0 = 0.98 (default) or 0.88.
    static VipaintInit vp(double gamma0 = 0.98) { return {0.8, 1.0, 0.7, gamma0}; }
    static VipaintInit for_schedule(ScheduleKind kind) { return kind == ScheduleKind::VE ? ve() : vp(); }
};

struct Phase2Config {
    /// Guidance scale applied to the gradient of the residual norm.
    double zeta = 1.0;
    std::size_t steps = 100;
    double eta = 0.2;
    /// Last grid time; <= 0 selects the time where sigma = 2 sigma_min.
    double t_min = 0.0;
};

struct VipaintConfig {
    /// Critical times [T_e, ..., T_s], strictly decreasing, K >= 2 entries.
    std::vector<double> times;
    double beta = 1.0;
    std::size_t mc_samples = 4;
    std::size_t opt_steps = 50;
    double lr_mu = 0.1;
    double lr_gamma = 0.1;
    double lr_tau = 0.01;
    double lr_decay = 0.99;
    std::size_t lr_decay_every = 10;
    /// Number of (t, s) terms of the diffusion loss over (T_e, T].
    std::size_t diffusion_terms = 32;
    double rho = 7.0;
    /// DDIM coefficient of VP prior transitions between critical times.
    double eta = 0.2;
    VipaintInit init = VipaintInit::ve();
    Phase2Config phase2;
    bool enforce_snr_window = true;
    double snr_lo = 0.2;
    double snr_hi = 0.5;

    std::size_t levels() const { return times.size(); }
    double t_end() const { return times.front(); }
    double t_start() const { return times.back(); }

    /// Defaults: K critical times spread over the SNR window.
    static VipaintConfig defaults(const NoiseSchedule& schedule, std::size_t k);
    void validate(const NoiseSchedule& schedule) const;
};

struct VipaintLevel {
    Vec mu;
    /// log tau^2
    Vec tau_tilde;
    /// logit gamma
    double gamma_tilde = 0.0;

    Vec tau() const { return (0.5 * tau_tilde.array()).exp(); }
    double gamma() const;
};

/// Variational parameters. levels[j] is the Gaussian at times[j + 1] conditioned on times[j].
struct VipaintParams {
    Vec mu_te;
    Vec tau_tilde_te;
    std::vector<VipaintLevel> levels;

    Vec tau_te() const { return (0.5 * tau_tilde_te.array()).exp(); }
    Eigen::Index dim() const { return mu_te.size(); }

    /// Order: mu_te, tau_tilde_te, then per level mu, tau_tilde, gamma_tilde.
    Vec flatten() const;
    static VipaintParams unflatten(const Vec& flat, Eigen::Index dim, std::size_t levels);
    Eigen::Index size() const;
};

/// Observation, operator and prior bundled for one inference query.
struct InverseProblem {
    const Denoiser& denoiser;
    const MeasurementOp& op;
    Vec y;

    const NoiseSchedule& schedule() const { return denoiser.schedule(); }
};

VipaintParams init_params(const VipaintConfig& config, const NoiseSchedule& schedule, const Vec& y_filled,
                          std::uint64_t seed);

/// Standard-normal draws for one Monte-Carlo chain of one loss evaluation.
struct ChainNoise {
    Vec eps_te;
    std::vector<Vec> eps_levels;
    std::size_t diffusion_index = 0;
    /// Inverse probability with which diffusion_index was drawn.
    double diffusion_weight = 1.0;
    Vec eps_diffusion;
};

ChainNoise draw_chain_noise(Rng& rng, Eigen::Index dim, std::size_t levels, std::size_t diffusion_terms);
/// Noise of chain `chain` at optimization step `step`.
ChainNoise chain_noise(std::uint64_t seed, std::size_t step, std::size_t chain, Eigen::Index dim,
                       const VipaintConfig& config);
/// Noise of all `m` chains at optimization step `step`. Diffusion-loss indices are importance-sampled
/// from diffusion_term_probabilities and stratified: chain c inverts the c-th of m equal slices of the
/// cumulative distribution. The chain average of weight * term stays unbiased for the sum of terms.
std::vector<ChainNoise> step_noise(const NoiseSchedule& schedule, std::uint64_t seed, std::size_t step, std::size_t m,
                                   Eigen::Index dim, const VipaintConfig& config);

/// (t, s) pairs of the diffusion loss: consecutive points of an EDM grid from T down to T_e,
/// excluding the degenerate transition that lands exactly on T_e.
std::vector<std::pair<double, double>> diffusion_loss_terms(const NoiseSchedule& schedule, const VipaintConfig& config);
/// Proposal over diffusion-loss terms, proportional to the SNR drop across each term. For data far
/// from the denoiser's reach every term's KL scales with that drop, so the weighted terms are flat.
std::vector<double> diffusion_term_probabilities(const NoiseSchedule& schedule, const VipaintConfig& config);

/// One ancestral draw of the hierarchy: z[0] at T_e, ..., z[K-1] at T_s.
std::vector<Vec> sample_chain(const VipaintParams& params, const VipaintConfig& config, const Denoiser& denoiser,
                              const ChainNoise& noise);
std::vector<std::vector<Vec>> sample_hierarchy(const VipaintParams& params, const VipaintConfig& config,
                                               const Denoiser& denoiser, std::size_t m, std::uint64_t seed);

struct LossBreakdown {
    double total = 0.0;
    /// -log p(y | z_Ts) averaged over chains.
    double recon = 0.0;
    /// Sum of level KLs averaged over chains (before beta).
    double hier_kl = 0.0;
    /// Diffusion-loss estimate averaged over chains (before beta).
    double diff_kl = 0.0;
};

struct LossResult {
    LossBreakdown loss;
    /// Flattened gradient (see VipaintParams::flatten); empty when not requested.
    Vec grad;
};

/// Monte-Carlo estimate of the variational objective on fixed noise, optionally with its gradient.
LossResult evaluate_loss(const VipaintParams& params, const VipaintConfig& config, const InverseProblem& problem,
                         const std::vector<ChainNoise>& noise, bool with_grad);
LossBreakdown loss(const VipaintParams& params, const VipaintConfig& config, const InverseProblem& problem,
                   std::size_t m, std::uint64_t seed);
LossResult loss_grad(const VipaintParams& params, const VipaintConfig& config, const InverseProblem& problem,
                     std::size_t m, std::uint64_t seed);

/// One diffusion-loss term KL(q(z_s | z_t, z_Te) || p(z_s | z_t)) for a given index and noise draw.
double diffusion_term(const VipaintConfig& config, const Denoiser& denoiser, const Vec& z_te, std::size_t index,
                      const Vec& eps);

struct OptimizeResult {
    VipaintParams params;
    std::vector<LossBreakdown> trace;
    /// Forward denoiser evaluations per Monte-Carlo chain.
    double denoiser_calls_per_chain = 0.0;
};

OptimizeResult optimize(VipaintParams params, const VipaintConfig& config, const InverseProblem& problem,
                        std::uint64_t seed);

/// Ancestral draw to T_s followed by guided prior steps down to t_min; returns x_hat at t_min.
SampleSet phase2_sample(const VipaintParams& params, const VipaintConfig& config, const InverseProblem& problem,
                        std::size_t n, std::uint64_t seed);

/// Gradient w.r.t. z_t of ||y - A x_hat(z_t, t)||^2 (Gaussian model) or ||y - A x_hat||_1 (Laplace).
Vec guidance_gradient(const InverseProblem& problem, const Vec& z, double t, const Vec& eps);

double default_final_time(const NoiseSchedule& schedule);

} // namespace vipaint
