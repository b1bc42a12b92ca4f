#pragma once

#include <cstdint>
#include <vector>

#include "vipaint/operators.hpp"
#include "vipaint/schedule.hpp"
#include "vipaint/types.hpp"

namespace vipaint {

/// Gaussian mixture with diagonal component covariances.
struct GmmPrior {
    std::vector<double> weights;
    std::vector<Vec> means;
    /// Per-dimension variances of each component.
    std::vector<Vec> covs;

    std::size_t components() const { return weights.size(); }
    std::size_t dim() const { return means.empty() ? 0 : static_cast<std::size_t>(means.front().size()); }

    /// Throws DomainError unless weights sum to 1, variances are positive and shapes agree.
    void validate() const;
    double log_density(const Vec& x) const;
    Vec mean() const;
    Mat covariance() const;
};

/// Gaussian mixture with full component covariances (positive semi-definite).
///
/// Conditioning a diagonal prior on a blur or downsample observation couples dimensions,
/// so exact posteriors need full covariances.
struct GmmPosterior {
    std::vector<double> weights;
    std::vector<Vec> means;
    std::vector<Mat> covs;

    static GmmPosterior from_prior(const GmmPrior& prior);

    std::size_t components() const { return weights.size(); }
    std::size_t dim() const { return means.empty() ? 0 : static_cast<std::size_t>(means.front().size()); }

    void validate() const;
    double log_density(const Vec& x) const;
    /// Posterior probability of each component given x.
    std::vector<double> responsibilities(const Vec& x) const;
    Vec mean() const;
    Mat covariance() const;
};

double log_sum_exp(const std::vector<double>& v);

/// Exact posterior p(x | y) for y = A x + v, v ~ N(0, sigma_v^2 I).
GmmPosterior exact_posterior(const GmmPrior& prior, const MeasurementOp& op, const Vec& y);

/// Diffusion marginal of the prior: component k becomes N(alpha_t m_k, alpha_t^2 C_k + sigma_t^2 I).
GmmPrior marginal_at(const GmmPrior& prior, const NoiseSchedule& schedule, double t);

SampleSet sample(const GmmPrior& dist, std::size_t n, std::uint64_t seed);
SampleSet sample(const GmmPosterior& dist, std::size_t n, std::uint64_t seed);

} // namespace vipaint
