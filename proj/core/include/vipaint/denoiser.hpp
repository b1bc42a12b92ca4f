#pragma once

#include <cstdint>
#include <vector>

#include "vipaint/gmm.hpp"
#include "vipaint/schedule.hpp"
#include "vipaint/types.hpp"

namespace vipaint {

/// Noise-prediction network eps_hat(z_t, t) together with its reverse-mode derivative.
///
/// Implementations must be safe to call concurrently through the const interface.
class Denoiser {
public:
    explicit Denoiser(NoiseSchedule schedule) : schedule_(schedule) {}
    virtual ~Denoiser() = default;

    virtual std::size_t dim() const = 0;
    virtual Vec eps_hat(const Vec& z, double t) const = 0;
    /// cotangent^T d eps_hat / d z.
    virtual Vec vjp(const Vec& z, double t, const Vec& cotangent) const = 0;

    /// One-step prediction (z - sigma_t eps_hat) / alpha_t.
    Vec x_hat(const Vec& z, double t) const;
    /// x_hat computed from an already evaluated eps_hat.
    Vec x_hat_from_eps(const Vec& z, double t, const Vec& eps) const;
    /// cotangent^T d x_hat / d z.
    Vec x_hat_vjp(const Vec& z, double t, const Vec& cotangent) const;

    const NoiseSchedule& schedule() const { return schedule_; }

protected:
    NoiseSchedule schedule_;
};

/// Forwards to another denoiser and counts forward and VJP evaluations.
/// Not thread-safe; use one instance per run.
class CountingDenoiser final : public Denoiser {
public:
    explicit CountingDenoiser(const Denoiser& inner) : Denoiser(inner.schedule()), inner_(inner) {}

    std::size_t dim() const override { return inner_.dim(); }
    Vec eps_hat(const Vec& z, double t) const override;
    Vec vjp(const Vec& z, double t, const Vec& cotangent) const override;

    std::uint64_t evaluations() const { return evaluations_; }
    std::uint64_t vjp_evaluations() const { return vjps_; }
    void reset() { evaluations_ = vjps_ = 0; }

private:
    const Denoiser& inner_;
    mutable std::uint64_t evaluations_ = 0;
    mutable std::uint64_t vjps_ = 0;
};

/// Bayes-optimal denoiser of a Gaussian-mixture data distribution:
/// eps* = (z_t - alpha_t E[x | z_t]) / sigma_t.
class GmmDenoiser final : public Denoiser {
public:
    GmmDenoiser(GmmPrior prior, NoiseSchedule schedule);

    std::size_t dim() const override { return prior_.dim(); }
    Vec eps_hat(const Vec& z, double t) const override;
    Vec vjp(const Vec& z, double t, const Vec& cotangent) const override;

    /// E[x | z_t].
    Vec posterior_mean(const Vec& z, double t) const;
    /// Component responsibilities under the diffusion marginal at t.
    std::vector<double> responsibilities(const Vec& z, double t) const;

    const GmmPrior& prior() const { return prior_; }

private:
    struct Terms {
        std::vector<double> resp;
        std::vector<Vec> gain;       // alpha c_k / v_k
        std::vector<Vec> comp_mean;  // per-component E[x | z_t, k]
        std::vector<Vec> score;      // d log N_k / dz
    };
    Terms terms(const Vec& z, double t) const;

    GmmPrior prior_;
};

} // namespace vipaint
