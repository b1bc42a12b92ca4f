#include <gtest/gtest.h>

#include "vipaint/operators.hpp"
#include "vipaint/random.hpp"

using namespace vipaint;

namespace {

void expect_adjoint(const MeasurementOp& op) {
    Rng rng(1, "adjoint");
    for (int rep = 0; rep < 5; ++rep) {
        const Vec x = rng.normal_vec(static_cast<Eigen::Index>(op.input_dim()));
        const Vec u = rng.normal_vec(static_cast<Eigen::Index>(op.output_dim()));
        EXPECT_NEAR(op.apply(x).dot(u), x.dot(op.adjoint(u)), 1e-12);
    }
    const Mat a = op.matrix();
    const Vec x = Vec::LinSpaced(static_cast<Eigen::Index>(op.input_dim()), -1.0, 1.0);
    EXPECT_LT((a * x - op.apply(x)).norm(), 1e-12);
}

} // namespace

TEST(Operators, MaskSelectsObservedCoordinates) {
    const MeasurementOp op = MeasurementOp::mask({1, 0, 1}, 0.1);
    EXPECT_EQ(op.output_dim(), 2u);
    EXPECT_EQ(op.apply(Vec{{4.0, 5.0, 6.0}}), (Vec{{4.0, 6.0}}));
    expect_adjoint(op);
}

TEST(Operators, BlurAndDownsampleAreAdjointConsistent) {
    expect_adjoint(MeasurementOp::gaussian_blur({4, 4}, 3, 1.0, 0.05));
    expect_adjoint(MeasurementOp::downsample({4, 4}, 2, 0.05));
}

TEST(Operators, BlurKernelIsNormalized) {
    const MeasurementOp op = MeasurementOp::gaussian_blur({5, 5}, 3, 1.0, 0.05);
    double s = 0.0;
    for (double k : op.kernel()) s += k;
    EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Operators, DownsampleAveragesBlocks) {
    const MeasurementOp op = MeasurementOp::downsample({2, 2}, 2, 0.05);
    EXPECT_NEAR(op.apply(Vec{{1.0, 2.0, 3.0, 4.0}})[0], 2.5, 1e-12);
}

TEST(Operators, GaussianLikelihoodGradient) {
    MeasurementOp op = MeasurementOp::gaussian_blur({3, 3}, 3, 1.0, 0.2);
    Rng rng(2, "lik");
    const Vec x = rng.normal_vec(9), y = rng.normal_vec(9);
    const Vec g = op.grad_log_likelihood(y, x);
    for (Eigen::Index i = 0; i < 9; ++i) {
        Vec xp = x, xm = x;
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        EXPECT_NEAR(g[i], (op.log_likelihood(y, xp) - op.log_likelihood(y, xm)) / 2e-6, 1e-5);
    }
}

TEST(Operators, LaplaceLikelihoodNormalizes) {
    MeasurementOp op = MeasurementOp::mask({1}, 0.1);
    op.set_observation_model(ObservationModel::Laplace, 0.5);
    double s = 0.0;
    const double h = 1e-3;
    for (double y = -20.0; y <= 20.0; y += h) s += std::exp(op.log_likelihood(Vec::Constant(1, y), Vec::Zero(1))) * h;
    EXPECT_NEAR(s, 1.0, 1e-3);
}

TEST(Operators, FillUsesObservedMeanForMissingCoordinates) {
    const MeasurementOp op = MeasurementOp::mask({0, 1, 1}, 0.1);
    EXPECT_EQ(op.fill(Vec{{7.0, 8.0}}), (Vec{{7.5, 7.0, 8.0}}));
    const MeasurementOp down = MeasurementOp::downsample({2, 2}, 2, 0.1);
    EXPECT_LT((down.fill(Vec::Constant(1, 3.0)) - Vec::Constant(4, 3.0)).norm(), 1e-12);
}

TEST(Operators, RejectsBadShapes) {
    const MeasurementOp op = MeasurementOp::mask({1, 0}, 0.1);
    EXPECT_THROW(op.apply(Vec::Zero(3)), DomainError);
    EXPECT_THROW(op.adjoint(Vec::Zero(2)), DomainError);
    EXPECT_THROW(MeasurementOp::mask({0, 2}, 0.1), DomainError);
    EXPECT_THROW(MeasurementOp::mask({}, 0.1), DomainError);
    EXPECT_THROW(MeasurementOp::downsample({3, 3}, 2, 0.1), DomainError);
}
