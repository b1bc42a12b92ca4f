#include <gtest/gtest.h>

#include <cmath>

#include "vipaint/autodiff.hpp"

using namespace vipaint;
namespace ad = vipaint::ad;

namespace {

double f(const Vec& x, const Vec& c) {
    const Vec s = (1.0 / (1.0 + (-x.array()).exp())).matrix();
    return (x.array().exp() * c.array()).sum() + std::log((x.array().square() + 1.0).sum()) +
           s.dot(x) + (x - c).cwiseAbs().sum();
}

} // namespace

TEST(Autodiff, MatchesFiniteDifferences) {
    const Vec x{{0.3, -1.2, 0.7}};
    const Vec c{{1.5, 0.2, -0.4}};
    ad::Tape tape;
    const ad::Var v = tape.leaf(x);
    const ad::Var out = ad::sum(ad::exp(v) * c) + ad::log(ad::sum(ad::square(v) + 1.0)) + ad::dot(ad::sigmoid(v), v) +
                        ad::sum(ad::abs(v - c));
    EXPECT_NEAR(out.scalar(), f(x, c), 1e-12);
    const Vec g = tape.backward(out)[v];
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        EXPECT_NEAR(g[i], (f(xp, c) - f(xm, c)) / 2e-6, 1e-6);
    }
}

TEST(Autodiff, ReusedNodesAccumulateGradients) {
    ad::Tape tape;
    const ad::Var a = tape.leaf(2.0);
    const ad::Var b = a * a + a;
    const auto g = tape.backward(b);
    EXPECT_DOUBLE_EQ(g[a][0], 5.0);
}

TEST(Autodiff, ConstantsReceiveNoGradientFlow) {
    ad::Tape tape;
    const ad::Var a = tape.leaf(Vec{{1.0, 2.0}});
    const ad::Var c = tape.constant(Vec{{3.0, 4.0}});
    const auto g = tape.backward(ad::dot(a, c));
    EXPECT_EQ(g[a], (Vec{{3.0, 4.0}}));
}

TEST(Autodiff, OpaqueNodeUsesSuppliedVjp) {
    ad::Tape tape;
    const ad::Var a = tape.leaf(Vec{{1.0, -1.0}});
    const Mat m{{2.0, 1.0}, {0.0, 3.0}};
    const ad::Var y = ad::opaque(a, m * a.value(), [&](const Vec& u) { return Vec(m.transpose() * u); });
    const auto g = tape.backward(ad::sum(y));
    EXPECT_EQ(g[a], (Vec{{2.0, 4.0}}));
}

TEST(Autodiff, BackwardRequiresScalarOutput) {
    ad::Tape tape;
    const ad::Var a = tape.leaf(Vec{{1.0, 2.0}});
    EXPECT_THROW(tape.backward(a), DomainError);
}
