#include "vipaint/operators.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace vipaint {

std::string to_string(OperatorKind kind) {
    switch (kind) {
    case OperatorKind::Mask: return "mask";
    case OperatorKind::GaussianBlur: return "blur";
    case OperatorKind::Downsample: return "downsample";
    }
    return "?";
}

std::string to_string(ObservationModel model) { return model == ObservationModel::Gaussian ? "gaussian" : "laplace"; }

OperatorKind operator_kind_from_string(const std::string& s) {
    if (s == "mask") return OperatorKind::Mask;
    if (s == "blur" || s == "gaussian_blur") return OperatorKind::GaussianBlur;
    if (s == "downsample") return OperatorKind::Downsample;
    throw DomainError("unknown operator kind '" + s + "'");
}

ObservationModel observation_model_from_string(const std::string& s) {
    if (s == "gaussian") return ObservationModel::Gaussian;
    if (s == "laplace") return ObservationModel::Laplace;
    throw DomainError("unknown observation model '" + s + "'");
}

MeasurementOp MeasurementOp::mask(std::vector<int> mask, double sigma_v) {
    require(!mask.empty(), "mask must be nonempty");
    require(sigma_v >= 0.0, "sigma_v must be nonnegative");
    MeasurementOp op;
    op.kind_ = OperatorKind::Mask;
    op.shape_ = {1, mask.size()};
    op.sigma_v_ = sigma_v;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        require(mask[i] == 0 || mask[i] == 1, "mask entries must be 0 or 1");
        if (mask[i]) op.observed_.push_back(i);
    }
    op.mask_ = std::move(mask);
    return op;
}

MeasurementOp MeasurementOp::gaussian_blur(Shape shape, std::size_t kernel_size, double kernel_std, double sigma_v) {
    require(shape.size() > 0, "blur needs a nonempty shape");
    require(kernel_size % 2 == 1, "blur kernel size must be odd");
    require(kernel_std > 0.0, "blur kernel std must be positive");
    require(sigma_v >= 0.0, "sigma_v must be nonnegative");
    MeasurementOp op;
    op.kind_ = OperatorKind::GaussianBlur;
    op.shape_ = shape;
    op.sigma_v_ = sigma_v;
    const auto r = static_cast<long>(kernel_size / 2);
    double total = 0.0;
    for (long i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i * i) / (kernel_std * kernel_std));
        op.kernel_.push_back(v);
        total += v;
    }
    for (double& v : op.kernel_) v /= total;
    return op;
}

MeasurementOp MeasurementOp::downsample(Shape shape, std::size_t factor, double sigma_v) {
    require(factor >= 2, "downsample factor must be at least 2");
    require(sigma_v >= 0.0, "sigma_v must be nonnegative");
    require(shape.width % factor == 0 && (shape.height == 1 || shape.height % factor == 0),
            "downsample factor must divide the signal shape");
    MeasurementOp op;
    op.kind_ = OperatorKind::Downsample;
    op.shape_ = shape;
    op.sigma_v_ = sigma_v;
    op.factor_ = factor;
    return op;
}

std::size_t MeasurementOp::output_dim() const {
    switch (kind_) {
    case OperatorKind::Mask: return observed_.size();
    case OperatorKind::GaussianBlur: return shape_.size();
    case OperatorKind::Downsample: {
        const std::size_t h = shape_.height == 1 ? 1 : shape_.height / factor_;
        return h * (shape_.width / factor_);
    }
    }
    return 0;
}

void MeasurementOp::set_observation_model(ObservationModel model, double laplace_scale) {
    require(laplace_scale > 0.0, "laplace scale must be positive");
    obs_model_ = model;
    laplace_scale_ = laplace_scale;
}

void MeasurementOp::check_input(const Vec& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim())
        throw DomainError("operator input has size " + std::to_string(x.size()) + ", expected " +
                          std::to_string(input_dim()));
}

void MeasurementOp::check_output(const Vec& y) const {
    if (static_cast<std::size_t>(y.size()) != output_dim())
        throw DomainError("observation has size " + std::to_string(y.size()) + ", expected " +
                          std::to_string(output_dim()));
}

namespace {

// Separable zero-padded correlation; the kernel is symmetric so this is also the convolution.
Vec blur_pass(const Vec& x, const Shape& shape, const std::vector<double>& k) {
    const auto r = static_cast<long>(k.size() / 2);
    const auto h = static_cast<long>(shape.height);
    const auto w = static_cast<long>(shape.width);
    Vec rows = Vec::Zero(x.size());
    for (long i = 0; i < h; ++i) {
        for (long j = 0; j < w; ++j) {
            double acc = 0.0;
            for (long o = -r; o <= r; ++o) {
                const long jj = j + o;
                if (jj >= 0 && jj < w) acc += k[o + r] * x[i * w + jj];
            }
            rows[i * w + j] = acc;
        }
    }
    if (h == 1) return rows;
    Vec out = Vec::Zero(x.size());
    for (long i = 0; i < h; ++i) {
        for (long j = 0; j < w; ++j) {
            double acc = 0.0;
            for (long o = -r; o <= r; ++o) {
                const long ii = i + o;
                if (ii >= 0 && ii < h) acc += k[o + r] * rows[ii * w + j];
            }
            out[i * w + j] = acc;
        }
    }
    return out;
}

} // namespace

Vec MeasurementOp::apply(const Vec& x) const {
    check_input(x);
    switch (kind_) {
    case OperatorKind::Mask: {
        Vec y(observed_.size());
        for (std::size_t i = 0; i < observed_.size(); ++i) y[i] = x[observed_[i]];
        return y;
    }
    case OperatorKind::GaussianBlur: return blur_pass(x, shape_, kernel_);
    case OperatorKind::Downsample: {
        const std::size_t fh = shape_.height == 1 ? 1 : factor_;
        const std::size_t oh = shape_.height / fh;
        const std::size_t ow = shape_.width / factor_;
        const double norm = 1.0 / static_cast<double>(fh * factor_);
        Vec y = Vec::Zero(oh * ow);
        for (std::size_t i = 0; i < shape_.height; ++i)
            for (std::size_t j = 0; j < shape_.width; ++j) y[(i / fh) * ow + j / factor_] += norm * x[i * shape_.width + j];
        return y;
    }
    }
    return {};
}

Vec MeasurementOp::adjoint(const Vec& u) const {
    check_output(u);
    switch (kind_) {
    case OperatorKind::Mask: {
        Vec x = Vec::Zero(input_dim());
        for (std::size_t i = 0; i < observed_.size(); ++i) x[observed_[i]] = u[i];
        return x;
    }
    case OperatorKind::GaussianBlur: return blur_pass(u, shape_, kernel_);
    case OperatorKind::Downsample: {
        const std::size_t fh = shape_.height == 1 ? 1 : factor_;
        const std::size_t ow = shape_.width / factor_;
        const double norm = 1.0 / static_cast<double>(fh * factor_);
        Vec x(input_dim());
        for (std::size_t i = 0; i < shape_.height; ++i)
            for (std::size_t j = 0; j < shape_.width; ++j) x[i * shape_.width + j] = norm * u[(i / fh) * ow + j / factor_];
        return x;
    }
    }
    return {};
}

Mat MeasurementOp::matrix() const {
    const auto n = static_cast<Eigen::Index>(input_dim());
    Mat a(static_cast<Eigen::Index>(output_dim()), n);
    for (Eigen::Index j = 0; j < n; ++j) a.col(j) = apply(Vec::Unit(n, j));
    return a;
}

double MeasurementOp::log_likelihood(const Vec& y, const Vec& x) const {
    check_output(y);
    const Vec r = y - apply(x);
    const auto m = static_cast<double>(r.size());
    if (obs_model_ == ObservationModel::Gaussian) {
        require(sigma_v_ > 0.0, "Gaussian log-likelihood needs sigma_v > 0");
        const double var = sigma_v_ * sigma_v_;
        return -r.squaredNorm() / (2.0 * var) - 0.5 * m * std::log(2.0 * std::numbers::pi * var);
    }
    return -r.lpNorm<1>() / laplace_scale_ - m * std::log(2.0 * laplace_scale_);
}

Vec MeasurementOp::grad_log_likelihood(const Vec& y, const Vec& x) const {
    check_output(y);
    const Vec r = y - apply(x);
    if (obs_model_ == ObservationModel::Gaussian) {
        require(sigma_v_ > 0.0, "Gaussian log-likelihood needs sigma_v > 0");
        return adjoint(r) / (sigma_v_ * sigma_v_);
    }
    const Vec sign = r.unaryExpr([](double v) { return static_cast<double>((v > 0) - (v < 0)); });
    return adjoint(sign) / laplace_scale_;
}

Vec MeasurementOp::fill(const Vec& y) const {
    check_output(y);
    if (kind_ == OperatorKind::Mask) {
        const double mean = observed_.empty() ? 0.0 : y.mean();
        Vec x = Vec::Constant(static_cast<Eigen::Index>(input_dim()), mean);
        for (std::size_t i = 0; i < observed_.size(); ++i) x[observed_[i]] = y[i];
        return x;
    }
    const Vec weight = adjoint(Vec::Ones(static_cast<Eigen::Index>(output_dim())));
    return adjoint(y).cwiseQuotient(weight);
}

std::vector<int> load_mask_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open mask file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    for (char& c : text)
        if (c == ',' || c == ';') c = ' ';
    std::istringstream tokens(text);
    std::vector<int> mask;
    int v;
    while (tokens >> v) mask.push_back(v);
    if (!tokens.eof()) throw DomainError("mask file '" + path + "' contains a non-integer token");
    return mask;
}

double laplace_scale_from_samples(const SampleSet& samples) {
    require(!samples.empty(), "need samples to estimate a Laplace scale");
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const Vec& s : samples) {
        sum += s.sum();
        sq += s.squaredNorm();
        n += static_cast<std::size_t>(s.size());
    }
    const double mean = sum / static_cast<double>(n);
    return std::sqrt(std::max(sq / static_cast<double>(n) - mean * mean, 0.0));
}

} // namespace vipaint
