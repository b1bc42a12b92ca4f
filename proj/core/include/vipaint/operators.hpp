#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vipaint/types.hpp"

namespace vipaint {

enum class OperatorKind { Mask, GaussianBlur, Downsample };
enum class ObservationModel { Gaussian, Laplace };

std::string to_string(OperatorKind kind);
std::string to_string(ObservationModel model);
OperatorKind operator_kind_from_string(const std::string& s);
ObservationModel observation_model_from_string(const std::string& s);

/// Signal layout: a row-major height x width grid. One-dimensional signals use height 1.
struct Shape {
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t size() const { return height * width; }
};

/// Linear degradation y = A x + v with v ~ N(0, sigma_v^2 I), scored either with the
/// matching Gaussian density or with a Laplace density of scale b centred on y.
class MeasurementOp {
public:
    /// Keeps coordinates where mask is nonzero.
    static MeasurementOp mask(std::vector<int> mask, double sigma_v);
    /// Zero-padded "same" convolution with a normalized Gaussian kernel of odd size.
    static MeasurementOp gaussian_blur(Shape shape, std::size_t kernel_size, double kernel_std, double sigma_v);
    /// Block averaging by `factor` along every non-singleton axis.
    static MeasurementOp downsample(Shape shape, std::size_t factor, double sigma_v);

    OperatorKind kind() const { return kind_; }
    std::size_t input_dim() const { return shape_.size(); }
    std::size_t output_dim() const;
    const Shape& shape() const { return shape_; }
    double sigma_v() const { return sigma_v_; }
    ObservationModel observation_model() const { return obs_model_; }
    double laplace_scale() const { return laplace_scale_; }
    const std::vector<int>& mask_values() const { return mask_; }
    /// Indices of observed coordinates (mask only).
    const std::vector<std::size_t>& observed() const { return observed_; }
    const std::vector<double>& kernel() const { return kernel_; }
    std::size_t factor() const { return factor_; }

    void set_observation_model(ObservationModel model, double laplace_scale = 1.0);

    Vec apply(const Vec& x) const;
    Vec adjoint(const Vec& u) const;
    /// Dense matrix of A (output_dim x input_dim).
    Mat matrix() const;

    /// Normalized log density of y given x.
    double log_likelihood(const Vec& y, const Vec& x) const;
    /// Gradient of log_likelihood with respect to x (a subgradient for Laplace).
    Vec grad_log_likelihood(const Vec& y, const Vec& x) const;

    /// Lifts y to input shape: observed entries from y and the rest filled with the observed
    /// mean (mask), or A^T y divided elementwise by A^T 1 (blur, downsample).
    Vec fill(const Vec& y) const;

private:
    MeasurementOp() = default;
    void check_input(const Vec& x) const;
    void check_output(const Vec& y) const;

    OperatorKind kind_ = OperatorKind::Mask;
    Shape shape_;
    double sigma_v_ = 0.0;
    ObservationModel obs_model_ = ObservationModel::Gaussian;
    double laplace_scale_ = 1.0;
    std::vector<int> mask_;
    std::vector<std::size_t> observed_;
    std::vector<double> kernel_;
    std::size_t factor_ = 1;
};

/// Mask vector from a text file of 0/1 values separated by commas, whitespace or newlines.
std::vector<int> load_mask_file(const std::string& path);

/// Laplace scale for the reconstruction term: standard deviation over all coordinates of the samples.
double laplace_scale_from_samples(const SampleSet& samples);

} // namespace vipaint
