#include <gtest/gtest.h>

#include "vipaint/denoiser.hpp"
#include "vipaint/random.hpp"

using namespace vipaint;

namespace {

GmmPrior bimodal() {
    return {{0.5, 0.5}, {Vec{{-2.0, -1.0}}, Vec{{2.0, 1.0}}}, {Vec::Constant(2, 0.25), Vec::Constant(2, 0.25)}};
}

} // namespace

TEST(GmmDenoiser, SingleGaussianIsLinearShrinkage) {
    const NoiseSchedule sched = NoiseSchedule::vp();
    const GmmDenoiser den({{1.0}, {Vec{{1.0, -1.0}}}, {Vec{{2.0, 0.5}}}}, sched);
    const double t = 0.3;
    const auto [a, s] = sched.alpha_sigma(t);
    const Vec z{{0.4, 0.9}};
    const Vec v{{2.0, 0.5}};
    const Vec m{{1.0, -1.0}};
    const Vec expected = m + (a * v.array() / (a * a * v.array() + s * s) * (z - a * m).array()).matrix();
    EXPECT_LT((den.posterior_mean(z, t) - expected).norm(), 1e-12);
    EXPECT_LT((den.x_hat(z, t) - expected).norm(), 1e-10);
}

TEST(GmmDenoiser, EpsAndXHatAreConsistent) {
    const NoiseSchedule sched = NoiseSchedule::ve();
    const GmmDenoiser den(bimodal(), sched);
    const Vec z{{0.5, -0.2}};
    const double t = 3.0;
    const Vec x = den.x_hat(z, t);
    EXPECT_LT((z - (x + sched.sigma(t) * den.eps_hat(z, t))).norm(), 1e-12);
}

TEST(GmmDenoiser, ResponsibilitiesFavourNearbyComponent) {
    const GmmDenoiser den(bimodal(), NoiseSchedule::ve());
    const auto r = den.responsibilities(Vec{{2.0, 1.0}}, 0.1);
    EXPECT_GT(r[1], 0.999);
}

TEST(GmmDenoiser, VjpMatchesFiniteDifferences) {
    const GmmDenoiser den(bimodal(), NoiseSchedule::ve());
    Rng rng(3, "vjp");
    for (double t : {0.2, 1.0, 10.0}) {
        const Vec z = rng.normal_vec(2) * t, u = rng.normal_vec(2);
        const Vec g = den.vjp(z, t, u);
        for (Eigen::Index i = 0; i < 2; ++i) {
            Vec zp = z, zm = z;
            zp[i] += 1e-6;
            zm[i] -= 1e-6;
            EXPECT_NEAR(g[i], u.dot(den.eps_hat(zp, t) - den.eps_hat(zm, t)) / 2e-6, 1e-6 * (1.0 + std::abs(g[i])));
        }
    }
}

TEST(GmmDenoiser, XHatVjpIsChainRuleOfEps) {
    const NoiseSchedule sched = NoiseSchedule::vp();
    const GmmDenoiser den(bimodal(), sched);
    const Vec z{{0.1, 0.3}}, u{{1.0, -2.0}};
    const double t = 0.5;
    const auto [a, s] = sched.alpha_sigma(t);
    EXPECT_LT((den.x_hat_vjp(z, t, u) - (u - s * den.vjp(z, t, u)) / a).norm(), 1e-12);
}

TEST(CountingDenoiser, CountsForwardAndVjpCalls) {
    const GmmDenoiser den(bimodal(), NoiseSchedule::ve());
    const CountingDenoiser counter(den);
    for (int i = 0; i < 3; ++i) counter.eps_hat(Vec::Zero(2), 1.0);
    counter.vjp(Vec::Zero(2), 1.0, Vec::Ones(2));
    EXPECT_EQ(counter.evaluations(), 3u);
    EXPECT_EQ(counter.vjp_evaluations(), 1u);
    EXPECT_EQ(counter.eps_hat(Vec::Ones(2), 2.0), den.eps_hat(Vec::Ones(2), 2.0));
}

TEST(GmmDenoiser, RejectsWrongDimension) {
    const GmmDenoiser den(bimodal(), NoiseSchedule::ve());
    EXPECT_THROW(den.eps_hat(Vec::Zero(3), 1.0), DomainError);
}
