#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "vipaint/gmm.hpp"
#include "vipaint/mlp.hpp"
#include "vipaint/random.hpp"

using namespace vipaint;

TEST(Mlp, BatchedForwardMatchesSingle) {
    const MlpDenoiser net(3, NoiseSchedule::ve(), {{16, 16}, 4, 1.0}, 2);
    Rng rng(1, "mlp");
    Mat z(3, 4);
    Vec t(4);
    for (int i = 0; i < 4; ++i) {
        z.col(i) = rng.normal_vec(3);
        t[i] = 0.5 + i;
    }
    const Mat out = net.forward(z, t);
    for (int i = 0; i < 4; ++i) EXPECT_LT((out.col(i) - net.eps_hat(z.col(i), t[i])).norm(), 1e-12);
}

TEST(Mlp, VjpMatchesFiniteDifferences) {
    const MlpDenoiser net(2, NoiseSchedule::vp(), {{32, 32}, 8, 1.0}, 5);
    Rng rng(2, "mlp");
    const Vec z = rng.normal_vec(2), u = rng.normal_vec(2);
    const double t = 0.4;
    const Vec g = net.vjp(z, t, u);
    for (Eigen::Index i = 0; i < 2; ++i) {
        Vec zp = z, zm = z;
        zp[i] += 1e-6;
        zm[i] -= 1e-6;
        EXPECT_NEAR(g[i], u.dot(net.eps_hat(zp, t) - net.eps_hat(zm, t)) / 2e-6, 1e-6);
    }
}

TEST(Mlp, InitializationIsSeedDeterministic) {
    const MlpDenoiser a(2, NoiseSchedule::ve(), {}, 9), b(2, NoiseSchedule::ve(), {}, 9), c(2, NoiseSchedule::ve(), {}, 10);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
}

TEST(Mlp, SaveLoadRoundTrip) {
    const MlpDenoiser net(2, NoiseSchedule::ve(), {{8}, 4, 0.5}, 3);
    const auto path = std::filesystem::temp_directory_path() / "vipaint-mlp-roundtrip.bin";
    net.save(path.string());
    const MlpDenoiser back = MlpDenoiser::load(path.string());
    std::filesystem::remove(path);
    EXPECT_TRUE(net == back);
    EXPECT_EQ(back.architecture().sigma_data, 0.5);
}

TEST(Mlp, LoadRejectsCorruptFile) {
    const auto path = std::filesystem::temp_directory_path() / "vipaint-mlp-corrupt.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "not a model";
    }
    EXPECT_ANY_THROW(MlpDenoiser::load(path.string()));
    std::filesystem::remove(path);
}

TEST(Mlp, ShortTrainingReducesLoss) {
    const NoiseSchedule sched = NoiseSchedule::ve();
    const GmmPrior prior{{1.0}, {Vec{{0.5, -1.0}}}, {Vec::Constant(2, 0.01)}};
    const SampleSet data = sample(prior, 512, 1);
    const MlpDenoiser init(2, sched, {{32, 32}, 4, 1.0}, 0);
    MlpTrainConfig cfg;
    cfg.steps = 300;
    cfg.batch = 64;
    const MlpTrainResult r = train_mlp(init, data, cfg);
    ASSERT_EQ(r.loss_trace.size(), 300u);
    EXPECT_LT(denoising_loss(r.model, data, 1000, 3), 0.5 * denoising_loss(init, data, 1000, 3));
    EXPECT_TRUE(r.model.parameters_finite());
}

TEST(DenoisingLoss, OptimalDenoiserIsALowerBound) {
    const NoiseSchedule sched = NoiseSchedule::ve();
    const GmmPrior prior{{0.5, 0.5}, {Vec{{-1.0, 0.0}}, Vec{{1.0, 0.0}}}, {Vec::Constant(2, 0.1), Vec::Constant(2, 0.1)}};
    const SampleSet data = sample(prior, 2048, 4);
    const GmmDenoiser optimal(prior, sched);
    const MlpDenoiser untrained(2, sched, {}, 0);
    EXPECT_LT(denoising_loss(optimal, data, 4000, 1), denoising_loss(untrained, data, 4000, 1));
    EXPECT_EQ(denoising_loss(optimal, data, 100, 1), denoising_loss(optimal, data, 100, 1));
}
