#include "vipaint/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vipaint/random.hpp"

namespace vipaint {

namespace {

void check_samples(const SampleSet& samples, const char* what) {
    if (samples.empty()) throw DomainError(std::string(what) + ": empty sample set");
    const auto d = samples.front().size();
    for (const Vec& x : samples) require(x.size() == d, std::string(what) + ": samples have differing dimensions");
}

// Sum of |x_i - x_j| over all ordered pairs of the pooled set restricted by index masks.
struct PairDistances {
    Mat d;
    explicit PairDistances(const std::vector<const Vec*>& pts) : d(pts.size(), pts.size()) {
        const auto n = static_cast<Eigen::Index>(pts.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            d(i, i) = 0.0;
            for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (*pts[i] - *pts[j]).norm();
        }
    }
    double energy(const std::vector<Eigen::Index>& a, const std::vector<Eigen::Index>& b) const {
        auto mean = [this](const std::vector<Eigen::Index>& u, const std::vector<Eigen::Index>& v) {
            double s = 0.0;
            for (auto i : u)
                for (auto j : v) s += d(i, j);
            return s / (static_cast<double>(u.size()) * static_cast<double>(v.size()));
        };
        return std::max(0.0, 2.0 * mean(a, b) - mean(a, a) - mean(b, b));
    }
};

} // namespace

Vec sample_mean(const SampleSet& samples) {
    check_samples(samples, "sample_mean");
    Vec m = Vec::Zero(samples.front().size());
    for (const Vec& x : samples) m += x;
    return m / static_cast<double>(samples.size());
}

Mat sample_covariance(const SampleSet& samples) {
    const Vec m = sample_mean(samples);
    Mat c = Mat::Zero(m.size(), m.size());
    for (const Vec& x : samples) c += (x - m) * (x - m).transpose();
    return c / static_cast<double>(samples.size());
}

ModeCoverage mode_coverage(const SampleSet& samples, const GmmPosterior& truth) {
    check_samples(samples, "mode_coverage");
    truth.validate();
    require(static_cast<std::size_t>(samples.front().size()) == truth.dim(), "mode_coverage: dimension mismatch");
    ModeCoverage out;
    out.frequencies.assign(truth.components(), 0.0);
    for (const Vec& x : samples) {
        const auto r = truth.responsibilities(x);
        out.frequencies[static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin())] += 1.0;
    }
    for (double& f : out.frequencies) f /= static_cast<double>(samples.size());
    for (std::size_t k = 0; k < truth.components(); ++k) out.tv += std::abs(out.frequencies[k] - truth.weights[k]);
    out.tv *= 0.5;
    return out;
}

MomentError moment_error(const SampleSet& samples, const GmmPosterior& truth) {
    check_samples(samples, "moment_error");
    require(static_cast<std::size_t>(samples.front().size()) == truth.dim(), "moment_error: dimension mismatch");
    return {(sample_mean(samples) - truth.mean()).norm(), (sample_covariance(samples) - truth.covariance()).norm()};
}

double energy_distance(const SampleSet& a, const SampleSet& b) {
    check_samples(a, "energy_distance");
    check_samples(b, "energy_distance");
    require(a.front().size() == b.front().size(), "energy_distance: dimension mismatch");
    std::vector<const Vec*> pts;
    for (const Vec& x : a) pts.push_back(&x);
    for (const Vec& x : b) pts.push_back(&x);
    std::vector<Eigen::Index> ia(a.size()), ib(b.size());
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), static_cast<Eigen::Index>(a.size()));
    return PairDistances(pts).energy(ia, ib);
}

double energy_distance_null_threshold(const SampleSet& a, const SampleSet& b, std::size_t permutations,
                                      double quantile, std::uint64_t seed) {
    check_samples(a, "energy_distance_null_threshold");
    check_samples(b, "energy_distance_null_threshold");
    require(permutations >= 1, "need at least one permutation");
    require(quantile > 0.0 && quantile < 1.0, "quantile must lie in (0, 1)");
    std::vector<const Vec*> pts;
    for (const Vec& x : a) pts.push_back(&x);
    for (const Vec& x : b) pts.push_back(&x);
    const PairDistances dist(pts);
    std::vector<Eigen::Index> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, "permutation");
    std::vector<double> stats;
    stats.reserve(permutations);
    const auto na = static_cast<std::ptrdiff_t>(a.size());
    for (std::size_t p = 0; p < permutations; ++p) {
        std::shuffle(idx.begin(), idx.end(), rng.engine());
        stats.push_back(dist.energy({idx.begin(), idx.begin() + na}, {idx.begin() + na, idx.end()}));
    }
    std::sort(stats.begin(), stats.end());
    const auto k = std::min(stats.size() - 1, static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(stats.size()))) - 1);
    return stats[k];
}

double observed_mse(const SampleSet& samples, const MeasurementOp& op, const Vec& y) {
    check_samples(samples, "observed_mse");
    require(static_cast<std::size_t>(y.size()) == op.output_dim(), "observed_mse: observation size mismatch");
    require(y.size() > 0, "observed_mse: empty observation");
    double s = 0.0;
    for (const Vec& x : samples) s += (y - op.apply(x)).squaredNorm();
    return s / (static_cast<double>(samples.size()) * static_cast<double>(y.size()));
}

} // namespace vipaint
