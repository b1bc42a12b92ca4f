#include "vipaint/diffusion.hpp"

#include <cmath>

namespace vipaint {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_order(const NoiseSchedule& schedule, double s, double t) {
    schedule.check_time(s);
    schedule.check_time(t);
    if (!(s < t)) throw DomainError("expected s < t");
}

} // namespace

DiagGaussian::DiagGaussian(Vec m, Vec s) : mean(std::move(m)), std(std::move(s)) {
    if (mean.size() != std.size()) throw DomainError("DiagGaussian: mean and std shapes disagree");
    if ((std.array() < 0.0).any() || !std.allFinite()) throw DomainError("DiagGaussian: std must be finite and >= 0");
}

DiagGaussian DiagGaussian::isotropic(Vec m, double s) {
    const auto n = m.size();
    return DiagGaussian(std::move(m), Vec::Constant(n, s));
}

double DiagGaussian::log_density(const Vec& x) const {
    if ((std.array() <= 0.0).any()) throw DomainError("log_density needs positive std");
    const Vec z = (x - mean).cwiseQuotient(std);
    return -0.5 * z.squaredNorm() - std.array().log().sum() - 0.5 * static_cast<double>(x.size()) * kLog2Pi;
}

Vec DiagGaussian::sample(Rng& rng) const { return reparameterize(rng.normal_vec(dim())); }

Vec DiagGaussian::reparameterize(const Vec& eps) const { return mean + std.cwiseProduct(eps); }

TransitionCoeffs transition_coeffs(const NoiseSchedule& schedule, double s, double t) {
    schedule.check_time(s);
    schedule.check_time(t);
    if (s > t) throw DomainError("transition needs s <= t");
    if (s == t) return {1.0, 0.0};
    const auto [as, ss] = schedule.alpha_sigma(s);
    const auto [at, st] = schedule.alpha_sigma(t);
    const double a = at / as;
    const double var = st * st - a * a * ss * ss;
    if (!(var > 0.0)) throw NumericalError("schedule produced a nonpositive transition variance");
    return {a, var};
}

DiagGaussian forward_marginal(const NoiseSchedule& schedule, const Vec& x, double t) {
    const auto [a, s] = schedule.alpha_sigma(t);
    return DiagGaussian::isotropic(a * x, s);
}

DiagGaussian forward_conditional(const NoiseSchedule& schedule, const Vec& z_s, double s, double t) {
    check_order(schedule, s, t);
    const auto c = transition_coeffs(schedule, s, t);
    return DiagGaussian::isotropic(c.alpha * z_s, std::sqrt(c.var));
}

DiagGaussian reverse_conditional(const NoiseSchedule& schedule, const Vec& z_t, const Vec& x, double s, double t) {
    check_order(schedule, s, t);
    require(z_t.size() == x.size(), "reverse_conditional: shape mismatch");
    const auto c = transition_coeffs(schedule, s, t);
    const auto [as, ss] = schedule.alpha_sigma(s);
    const double st2 = std::pow(schedule.sigma(t), 2);
    const double var = c.var * ss * ss / st2;
    Vec mean = (c.alpha * ss * ss / st2) * z_t + (as * c.var / st2) * x;
    return DiagGaussian::isotropic(std::move(mean), std::sqrt(var));
}

PriorCoeffs prior_coeffs(const NoiseSchedule& schedule, double s, double t, double eta) {
    check_order(schedule, s, t);
    const auto [as, ss] = schedule.alpha_sigma(s);
    const auto [at, st] = schedule.alpha_sigma(t);
    PriorCoeffs out{};
    if (schedule.kind() == ScheduleKind::VE) {
        // mean = (ss^2/st^2) z + ((st^2-ss^2)/st^2) x_hat with x_hat = z - st eps
        const double d = st * st - ss * ss;
        out.z_coef = 1.0;
        out.eps_coef = -d / st;
        out.std = std::sqrt(d * ss * ss / (st * st));
        return out;
    }
    require(eta >= 0.0 && eta <= 1.0, "DDIM eta must lie in [0, 1]");
    // DDIM with cumulative abar = alpha^2.
    const double abar_s = as * as;
    const double abar_t = at * at;
    double var = eta * eta * ((1.0 - abar_s) / (1.0 - abar_t)) * (1.0 - abar_t / abar_s);
    if (var < 0.0) {
        var = 0.0;
        out.clamped = true;
    }
    double dir = 1.0 - abar_s - var;
    if (dir < 0.0) {
        dir = 0.0;
        out.clamped = true;
    }
    // mean = as x_hat + sqrt(dir) eps, x_hat = (z - st eps)/at
    out.z_coef = as / at;
    out.eps_coef = std::sqrt(dir) - as * st / at;
    out.std = std::sqrt(var);
    return out;
}

DiagGaussian prior_transition_from_eps(const NoiseSchedule& schedule, const Vec& z_t, const Vec& eps, double s,
                                       double t, double eta) {
    const PriorCoeffs c = prior_coeffs(schedule, s, t, eta);
    return DiagGaussian::isotropic(c.z_coef * z_t + c.eps_coef * eps, c.std);
}

DiagGaussian prior_transition(const NoiseSchedule& schedule, const Denoiser& denoiser, const Vec& z_t, double s,
                              double t, double eta) {
    return prior_transition_from_eps(schedule, z_t, denoiser.eps_hat(z_t, t), s, t, eta);
}

double kl_diag(const DiagGaussian& q, const DiagGaussian& p) {
    require(q.dim() == p.dim(), "kl_diag: shape mismatch");
    if ((q.std.array() <= 0.0).any() || (p.std.array() <= 0.0).any())
        throw DomainError("kl_diag needs strictly positive std");
    const Vec pv = p.variance();
    return ((p.std.array() / q.std.array()).log() + (q.variance() + (q.mean - p.mean).cwiseAbs2()).array() / (2.0 * pv.array()) -
            0.5)
        .sum();
}

BridgeCoeffs bridge_coeffs(const NoiseSchedule& schedule, double s, double t, double te) {
    schedule.check_time(te);
    if (!(te < s && s < t)) throw DomainError("bridge needs te < s < t");
    schedule.check_time(t);
    const auto ts = transition_coeffs(schedule, s, t);   // z_t | z_s
    const auto se = transition_coeffs(schedule, te, s);  // z_s | z_te
    const double denom = ts.var + ts.alpha * ts.alpha * se.var;
    return {se.alpha * ts.var / denom, ts.alpha * se.var / denom, ts.var * se.var / denom};
}

DiagGaussian bridge_posterior(const NoiseSchedule& schedule, const Vec& z_t, const Vec& z_te, double s, double t,
                              double te) {
    require(z_t.size() == z_te.size(), "bridge_posterior: shape mismatch");
    const BridgeCoeffs c = bridge_coeffs(schedule, s, t, te);
    return DiagGaussian::isotropic(c.c_te * z_te + c.c_t * z_t, std::sqrt(c.var));
}

Vec bridge_endpoint(const NoiseSchedule& schedule, const Vec& z_t, const Vec& eps, double t, double te) {
    const auto c = transition_coeffs(schedule, te, t);
    return (z_t - std::sqrt(c.var) * eps) / c.alpha;
}

DiagGaussian bridge_prior(const NoiseSchedule& schedule, const Denoiser& denoiser, const Vec& z_t, double s, double t,
                          double te) {
    const BridgeCoeffs c = bridge_coeffs(schedule, s, t, te);
    const Vec z_te_hat = bridge_endpoint(schedule, z_t, denoiser.eps_hat(z_t, t), t, te);
    return DiagGaussian::isotropic(c.c_te * z_te_hat + c.c_t * z_t, std::sqrt(c.var));
}

} // namespace vipaint
