#include "vipaint/denoiser.hpp"

#include <cmath>

namespace vipaint {

Vec Denoiser::x_hat(const Vec& z, double t) const { return x_hat_from_eps(z, t, eps_hat(z, t)); }

Vec Denoiser::x_hat_from_eps(const Vec& z, double t, const Vec& eps) const {
    const auto [alpha, sigma] = schedule_.alpha_sigma(t);
    return (z - sigma * eps) / alpha;
}

Vec Denoiser::x_hat_vjp(const Vec& z, double t, const Vec& cotangent) const {
    const auto [alpha, sigma] = schedule_.alpha_sigma(t);
    return (cotangent - sigma * vjp(z, t, cotangent)) / alpha;
}

Vec CountingDenoiser::eps_hat(const Vec& z, double t) const {
    ++evaluations_;
    return inner_.eps_hat(z, t);
}

Vec CountingDenoiser::vjp(const Vec& z, double t, const Vec& cotangent) const {
    ++vjps_;
    return inner_.vjp(z, t, cotangent);
}

GmmDenoiser::GmmDenoiser(GmmPrior prior, NoiseSchedule schedule) : Denoiser(schedule), prior_(std::move(prior)) {
    prior_.validate();
}

GmmDenoiser::Terms GmmDenoiser::terms(const Vec& z, double t) const {
    require(static_cast<std::size_t>(z.size()) == prior_.dim(), "denoiser input has the wrong dimension");
    const auto [alpha, sigma] = schedule_.alpha_sigma(t);
    const std::size_t kc = prior_.components();
    Terms out;
    out.resp.resize(kc);
    std::vector<double> logs(kc);
    for (std::size_t k = 0; k < kc; ++k) {
        const Vec& c = prior_.covs[k];
        const Vec v = (alpha * alpha * c.array() + sigma * sigma).matrix();
        const Vec d = z - alpha * prior_.means[k];
        logs[k] = std::log(prior_.weights[k]) - 0.5 * (d.cwiseAbs2().cwiseQuotient(v).sum() + v.array().log().sum());
        Vec gain = (alpha * c).cwiseQuotient(v);
        out.comp_mean.push_back(prior_.means[k] + gain.cwiseProduct(d));
        out.gain.push_back(std::move(gain));
        out.score.push_back(-d.cwiseQuotient(v));
    }
    // log-space normalization with max subtraction
    const double lse = log_sum_exp(logs);
    for (std::size_t k = 0; k < kc; ++k) out.resp[k] = std::exp(logs[k] - lse);
    return out;
}

Vec GmmDenoiser::posterior_mean(const Vec& z, double t) const {
    const Terms tm = terms(z, t);
    Vec e = Vec::Zero(z.size());
    for (std::size_t k = 0; k < tm.resp.size(); ++k) e += tm.resp[k] * tm.comp_mean[k];
    return e;
}

std::vector<double> GmmDenoiser::responsibilities(const Vec& z, double t) const { return terms(z, t).resp; }

Vec GmmDenoiser::eps_hat(const Vec& z, double t) const {
    const auto [alpha, sigma] = schedule_.alpha_sigma(t);
    return (z - alpha * posterior_mean(z, t)) / sigma;
}

Vec GmmDenoiser::vjp(const Vec& z, double t, const Vec& cotangent) const {
    require(cotangent.size() == z.size(), "cotangent has the wrong dimension");
    const auto [alpha, sigma] = schedule_.alpha_sigma(t);
    const Terms tm = terms(z, t);
    Vec mean_score = Vec::Zero(z.size());
    for (std::size_t k = 0; k < tm.resp.size(); ++k) mean_score += tm.resp[k] * tm.score[k];
    // J^T u for J = dE[x|z]/dz.
    Vec jt = Vec::Zero(z.size());
    for (std::size_t k = 0; k < tm.resp.size(); ++k) {
        jt += tm.resp[k] * tm.gain[k].cwiseProduct(cotangent);
        jt += tm.resp[k] * tm.comp_mean[k].dot(cotangent) * (tm.score[k] - mean_score);
    }
    return (cotangent - alpha * jt) / sigma;
}

} // namespace vipaint
