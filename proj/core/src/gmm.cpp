#include "vipaint/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vipaint/random.hpp"

namespace vipaint {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void validate_weights(const std::vector<double>& w) {
    require(!w.empty(), "mixture needs at least one component");
    double total = 0.0;
    for (double v : w) {
        require(v >= 0.0 && std::isfinite(v), "mixture weights must be finite and nonnegative");
        total += v;
    }
    require(std::abs(total - 1.0) < 1e-12, "mixture weights must sum to 1");
}

double diag_log_normal(const Vec& x, const Vec& mean, const Vec& var) {
    const Vec d = x - mean;
    return -0.5 * (d.cwiseAbs2().cwiseQuotient(var).sum() + var.array().log().sum() +
                   static_cast<double>(x.size()) * kLog2Pi);
}

double full_log_normal(const Vec& x, const Vec& mean, const Mat& cov) {
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
    const Vec d = x - mean;
    const Vec w = llt.matrixL().solve(d);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * (w.squaredNorm() + logdet + static_cast<double>(x.size()) * kLog2Pi);
}

// Matrix square root of a PSD covariance, tolerant of zero eigenvalues.
Mat psd_sqrt(const Mat& cov) {
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    const Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

std::size_t draw_component(Rng& rng, const std::vector<double>& w) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        acc += w[k];
        if (u < acc) return k;
    }
    return w.size() - 1;
}

std::vector<double> normalized_from_logs(const std::vector<double>& logs) {
    const double lse = log_sum_exp(logs);
    std::vector<double> w(logs.size());
    for (std::size_t k = 0; k < logs.size(); ++k) w[k] = std::exp(logs[k] - lse);
    double total = 0.0;
    for (double v : w) total += v;
    for (double& v : w) v /= total;
    return w;
}

} // namespace

double log_sum_exp(const std::vector<double>& v) {
    require(!v.empty(), "log_sum_exp of an empty list");
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

void GmmPrior::validate() const {
    validate_weights(weights);
    require(means.size() == weights.size() && covs.size() == weights.size(), "mixture component lists differ in length");
    const auto d = means.front().size();
    require(d > 0, "mixture dimension must be positive");
    for (std::size_t k = 0; k < weights.size(); ++k) {
        require(means[k].size() == d && covs[k].size() == d, "mixture component shapes disagree");
        require((covs[k].array() > 0.0).all(), "mixture variances must be positive");
    }
}

double GmmPrior::log_density(const Vec& x) const {
    std::vector<double> logs(components());
    for (std::size_t k = 0; k < components(); ++k) logs[k] = std::log(weights[k]) + diag_log_normal(x, means[k], covs[k]);
    return log_sum_exp(logs);
}

Vec GmmPrior::mean() const { return GmmPosterior::from_prior(*this).mean(); }
Mat GmmPrior::covariance() const { return GmmPosterior::from_prior(*this).covariance(); }

GmmPosterior GmmPosterior::from_prior(const GmmPrior& prior) {
    GmmPosterior p;
    p.weights = prior.weights;
    p.means = prior.means;
    for (const Vec& c : prior.covs) p.covs.push_back(c.asDiagonal());
    return p;
}

void GmmPosterior::validate() const {
    validate_weights(weights);
    require(means.size() == weights.size() && covs.size() == weights.size(), "mixture component lists differ in length");
    const auto d = means.front().size();
    for (std::size_t k = 0; k < weights.size(); ++k) {
        require(means[k].size() == d && covs[k].rows() == d && covs[k].cols() == d, "mixture component shapes disagree");
        require((covs[k] - covs[k].transpose()).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + covs[k].cwiseAbs().maxCoeff()),
                "mixture covariance must be symmetric");
    }
}

double GmmPosterior::log_density(const Vec& x) const {
    std::vector<double> logs(components());
    for (std::size_t k = 0; k < components(); ++k) logs[k] = std::log(weights[k]) + full_log_normal(x, means[k], covs[k]);
    return log_sum_exp(logs);
}

std::vector<double> GmmPosterior::responsibilities(const Vec& x) const {
    if (components() == 1) return {1.0};
    std::vector<double> logs(components());
    for (std::size_t k = 0; k < components(); ++k) {
        logs[k] = weights[k] > 0.0 ? std::log(weights[k]) + full_log_normal(x, means[k], covs[k])
                                   : -std::numeric_limits<double>::infinity();
    }
    return normalized_from_logs(logs);
}

Vec GmmPosterior::mean() const {
    Vec m = Vec::Zero(static_cast<Eigen::Index>(dim()));
    for (std::size_t k = 0; k < components(); ++k) m += weights[k] * means[k];
    return m;
}

Mat GmmPosterior::covariance() const {
    const Vec mu = mean();
    Mat c = Mat::Zero(mu.size(), mu.size());
    for (std::size_t k = 0; k < components(); ++k) {
        const Vec d = means[k] - mu;
        c += weights[k] * (covs[k] + d * d.transpose());
    }
    return c;
}

GmmPosterior exact_posterior(const GmmPrior& prior, const MeasurementOp& op, const Vec& y) {
    prior.validate();
    require(op.sigma_v() > 0.0, "exact posterior needs sigma_v > 0; use a tiny positive value for noiseless data");
    require(op.input_dim() == prior.dim(), "operator and prior dimensions disagree");
    require(static_cast<std::size_t>(y.size()) == op.output_dim(), "observation size disagrees with operator");
    const Mat a = op.matrix();
    const double noise_var = op.sigma_v() * op.sigma_v();

    GmmPosterior post;
    std::vector<double> logs;
    for (std::size_t k = 0; k < prior.components(); ++k) {
        const Mat c = prior.covs[k].asDiagonal();
        const Mat ca = c * a.transpose();
        Mat s = a * ca;
        s.diagonal().array() += noise_var;
        Eigen::LLT<Mat> llt(s);
        if (llt.info() != Eigen::Success) throw NumericalError("observation covariance is not positive definite");
        const Vec pred = a * prior.means[k];
        const Mat gain = llt.solve(ca.transpose()).transpose();
        Vec mean = prior.means[k] + gain * (y - pred);
        Mat cov = c - gain * ca.transpose();
        cov = 0.5 * (cov + cov.transpose());
        post.means.push_back(std::move(mean));
        post.covs.push_back(std::move(cov));
        logs.push_back(std::log(prior.weights[k]) + full_log_normal(y, pred, s));
    }
    post.weights = normalized_from_logs(logs);
    return post;
}

GmmPrior marginal_at(const GmmPrior& prior, const NoiseSchedule& schedule, double t) {
    const auto [alpha, sigma] = schedule.alpha_sigma(t);
    GmmPrior out = prior;
    for (std::size_t k = 0; k < prior.components(); ++k) {
        out.means[k] = alpha * prior.means[k];
        out.covs[k] = (alpha * alpha * prior.covs[k].array() + sigma * sigma).matrix();
    }
    return out;
}

SampleSet sample(const GmmPrior& dist, std::size_t n, std::uint64_t seed) {
    dist.validate();
    Rng rng(seed, "gmm-sample");
    SampleSet out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = draw_component(rng, dist.weights);
        const Vec e = rng.normal_vec(static_cast<Eigen::Index>(dist.dim()));
        out.push_back(dist.means[k] + dist.covs[k].cwiseSqrt().cwiseProduct(e));
    }
    return out;
}

SampleSet sample(const GmmPosterior& dist, std::size_t n, std::uint64_t seed) {
    dist.validate();
    std::vector<Mat> roots;
    for (const Mat& c : dist.covs) roots.push_back(psd_sqrt(c));
    Rng rng(seed, "gmm-sample");
    SampleSet out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = draw_component(rng, dist.weights);
        const Vec e = rng.normal_vec(static_cast<Eigen::Index>(dist.dim()));
        out.push_back(dist.means[k] + roots[k] * e);
    }
    return out;
}

} // namespace vipaint
