#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vipaint/denoiser.hpp"

namespace vipaint {

struct MlpArchitecture {
    std::vector<std::size_t> hidden{128, 128, 128};
    /// Sinusoidal features of log sigma_t appended to the scaled input.
    std::size_t time_features = 8;
    /// Data scale used for input preconditioning z / sqrt(alpha^2 sigma_data^2 + sigma^2).
    double sigma_data = 1.0;
};

/// Feed-forward noise predictor with SiLU hidden layers and a manual backward pass.
class MlpDenoiser final : public Denoiser {
public:
    struct Layer {
        Mat weight;  // out x in
        Vec bias;
    };

    MlpDenoiser(std::size_t dim, NoiseSchedule schedule, MlpArchitecture arch = {}, std::uint64_t seed = 0);

    std::size_t dim() const override { return dim_; }
    Vec eps_hat(const Vec& z, double t) const override;
    Vec vjp(const Vec& z, double t, const Vec& cotangent) const override;

    /// Batched forward pass: columns of `z` are inputs, `t` holds one time per column.
    Mat forward(const Mat& z, const Vec& t) const;

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    const MlpArchitecture& architecture() const { return arch_; }
    std::uint64_t seed() const { return seed_; }
    std::vector<std::size_t> widths() const;
    bool parameters_finite() const;

    /// Versioned little-endian binary file: header then row-major weights and biases.
    void save(const std::string& path) const;
    static MlpDenoiser load(const std::string& path);

    friend bool operator==(const MlpDenoiser& a, const MlpDenoiser& b);

private:
    struct Cache;
    Mat features(const Mat& z, const Vec& t) const;
    Mat run(const Mat& input, Cache* cache) const;
    double input_scale(double t) const;

    friend struct MlpTrainer;

    std::size_t dim_;
    MlpArchitecture arch_;
    std::uint64_t seed_;
    std::vector<Layer> layers_;
};

struct MlpTrainConfig {
    std::size_t steps = 5000;
    double lr = 1e-3;
    std::size_t batch = 128;
    std::uint64_t seed = 0;
    /// Number of equally spaced training times in (0, T].
    std::size_t time_grid = 1000;
};

struct MlpTrainResult {
    MlpDenoiser model;
    /// Minibatch loss mean_b ||eps - eps_hat||^2 per step.
    std::vector<double> loss_trace;
};

/// Deterministic Monte-Carlo estimate of E_{x, eps, t}[||eps - eps_hat(alpha_t x + sigma_t eps, t)||^2]
/// with n draws, t uniform on the training time grid. Works for any denoiser, so the
/// Bayes-optimal GmmDenoiser gives the loss floor on the same draws.
double denoising_loss(const Denoiser& denoiser, const SampleSet& data, std::size_t n, std::uint64_t seed,
                      std::size_t time_grid = 1000);

/// Adam on E_{x, eps, t}[||eps - eps_hat(alpha_t x + sigma_t eps, t)||^2].
MlpTrainResult train_mlp(MlpDenoiser model, const SampleSet& data, const MlpTrainConfig& config);

} // namespace vipaint
