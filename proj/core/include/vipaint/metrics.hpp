#pragma once

#include <cstdint>
#include <vector>

#include "vipaint/gmm.hpp"
#include "vipaint/operators.hpp"
#include "vipaint/types.hpp"

namespace vipaint {

struct ModeCoverage {
    /// Fraction of samples assigned to each truth component.
    std::vector<double> frequencies;
    /// Total-variation distance between frequencies and the truth weights.
    double tv = 0.0;
};

/// Assigns every sample to its maximum-responsibility component under the truth.
ModeCoverage mode_coverage(const SampleSet& samples, const GmmPosterior& truth);

struct MomentError {
    /// Euclidean distance between sample mean and truth mean.
    double mean = 0.0;
    /// Frobenius distance between sample covariance (1/n normalization) and truth covariance.
    double cov = 0.0;
};

MomentError moment_error(const SampleSet& samples, const GmmPosterior& truth);

/// V-statistic 2 E|A - B| - E|A - A'| - E|B - B'|, all pairs including coincident indices.
double energy_distance(const SampleSet& a, const SampleSet& b);

/// Upper `quantile` of the energy distance under random relabelling of the pooled samples.
double energy_distance_null_threshold(const SampleSet& a, const SampleSet& b, std::size_t permutations,
                                      double quantile, std::uint64_t seed);

/// Mean over samples of |y - A x|^2 / dim(y).
double observed_mse(const SampleSet& samples, const MeasurementOp& op, const Vec& y);

Vec sample_mean(const SampleSet& samples);
/// Covariance with 1/n normalization.
Mat sample_covariance(const SampleSet& samples);

} // namespace vipaint
