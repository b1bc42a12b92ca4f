#pragma once

#include "vipaint/denoiser.hpp"
#include "vipaint/random.hpp"
#include "vipaint/schedule.hpp"
#include "vipaint/types.hpp"

namespace vipaint {

/// Diagonal Gaussian. A zero std entry denotes a deterministic coordinate; densities and KL
/// divergences require strictly positive std.
struct DiagGaussian {
    Vec mean;
    Vec std;

    DiagGaussian(Vec mean, Vec std);
    static DiagGaussian isotropic(Vec mean, double std);

    Eigen::Index dim() const { return mean.size(); }
    Vec variance() const { return std.cwiseAbs2(); }
    double log_density(const Vec& x) const;
    Vec sample(Rng& rng) const;
    /// mean + std * eps for a given standard-normal draw.
    Vec reparameterize(const Vec& eps) const;
};

/// alpha_{t|s} = alpha_t / alpha_s and sigma_{t|s}^2 = sigma_t^2 - alpha_{t|s}^2 sigma_s^2 for s <= t.
struct TransitionCoeffs {
    double alpha;
    double var;
};
TransitionCoeffs transition_coeffs(const NoiseSchedule& schedule, double s, double t);

DiagGaussian forward_marginal(const NoiseSchedule& schedule, const Vec& x, double t);
DiagGaussian forward_conditional(const NoiseSchedule& schedule, const Vec& z_s, double s, double t);
/// q(z_s | z_t, x).
DiagGaussian reverse_conditional(const NoiseSchedule& schedule, const Vec& z_t, const Vec& x, double s, double t);

/// p(z_s | z_t) has mean z_coef * z_t + eps_coef * eps_hat(z_t, t) and isotropic std.
struct PriorCoeffs {
    double z_coef;
    double eps_coef;
    double std;
    /// A negative variance or square-root argument was clamped to zero.
    bool clamped = false;
};
/// VE: ancestral rule. VP: DDIM rule with coefficient eta.
PriorCoeffs prior_coeffs(const NoiseSchedule& schedule, double s, double t, double eta);
DiagGaussian prior_transition(const NoiseSchedule& schedule, const Denoiser& denoiser, const Vec& z_t, double s,
                              double t, double eta);
/// Same, reusing an eps_hat(z_t, t) evaluation.
DiagGaussian prior_transition_from_eps(const NoiseSchedule& schedule, const Vec& z_t, const Vec& eps, double s,
                                       double t, double eta);

/// KL(q || p) between diagonal Gaussians.
double kl_diag(const DiagGaussian& q, const DiagGaussian& p);

/// q(z_s | z_t, z_Te) = c_te z_Te + c_t z_t with variance var, for te < s < t.
struct BridgeCoeffs {
    double c_te;
    double c_t;
    double var;
};
BridgeCoeffs bridge_coeffs(const NoiseSchedule& schedule, double s, double t, double te);

DiagGaussian bridge_posterior(const NoiseSchedule& schedule, const Vec& z_t, const Vec& z_te, double s, double t,
                              double te);
/// Model estimate of z_Te from z_t: (z_t - sigma_{t|Te} eps_hat) / alpha_{t|Te}.
Vec bridge_endpoint(const NoiseSchedule& schedule, const Vec& z_t, const Vec& eps, double t, double te);
DiagGaussian bridge_prior(const NoiseSchedule& schedule, const Denoiser& denoiser, const Vec& z_t, double s, double t,
                          double te);

} // namespace vipaint
