#include <gtest/gtest.h>

#include <cmath>

#include "vipaint/schedule.hpp"

using namespace vipaint;

TEST(Schedule, VeSigmaIsLinearInTime) {
    const NoiseSchedule s = NoiseSchedule::ve(0.002, 50.0);
    EXPECT_DOUBLE_EQ(s.t_max(), 50.0);
    EXPECT_NEAR(s.sigma(1e-12), 0.002, 1e-12);
    EXPECT_NEAR(s.sigma(50.0), 50.0, 1e-12);
    for (double t : {1.0, 7.5, 20.0}) {
        EXPECT_DOUBLE_EQ(s.alpha(t), 1.0);
        EXPECT_NEAR(s.sigma(t), 0.002 + (50.0 - 0.002) * t / 50.0, 1e-12);
    }
}

TEST(Schedule, VpPreservesVariance) {
    const NoiseSchedule s = NoiseSchedule::vp();
    for (int i = 1; i <= 100; ++i) {
        const auto [a, sg] = s.alpha_sigma(s.t_max() * i / 100.0);
        EXPECT_NEAR(a * a + sg * sg, 1.0, 1e-12);
    }
}

TEST(Schedule, TimeAtSigmaInvertsSigma) {
    for (const NoiseSchedule& s : {NoiseSchedule::ve(), NoiseSchedule::vp()}) {
        for (double f : {0.1, 0.4, 0.9}) {
            const double t = f * s.t_max();
            EXPECT_NEAR(s.time_at_sigma(s.sigma(t)), t, 1e-9);
            EXPECT_NEAR(s.time_at_snr(s.snr(t)), t, 1e-9);
        }
    }
}

TEST(Schedule, RejectsTimesOutsideRange) {
    const NoiseSchedule s = NoiseSchedule::ve();
    EXPECT_THROW(s.alpha_sigma(-1.0), DomainError);
    EXPECT_THROW(s.alpha_sigma(s.t_max() * 2.0), DomainError);
    EXPECT_THROW(NoiseSchedule::ve(1.0, 0.5), DomainError);
}

TEST(Schedule, KindRoundTripsThroughString) {
    EXPECT_EQ(schedule_kind_from_string(to_string(ScheduleKind::VE)), ScheduleKind::VE);
    EXPECT_EQ(schedule_kind_from_string(to_string(ScheduleKind::VP)), ScheduleKind::VP);
}

TEST(EdmGrid, EndpointsAndMonotonicity) {
    const NoiseSchedule s = NoiseSchedule::ve();
    const TimeGrid g = edm_grid(s, 18, 0.01, s.t_max());
    ASSERT_EQ(g.size(), 18u);
    EXPECT_NEAR(g[0], s.t_max(), 1e-12);
    EXPECT_NEAR(g[17], 0.01, 1e-12);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g[i], g[i - 1]);
}

TEST(EdmGrid, RhoOneIsLinearInSigma) {
    const NoiseSchedule s = NoiseSchedule::ve();
    const TimeGrid g = edm_grid(s, 5, s.time_at_sigma(10.0), s.t_max(), 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(s.sigma(g[i]), 50.0 - 10.0 * i, 1e-9);
}

TEST(SnrWindow, VeEndpoints) {
    const NoiseSchedule s = NoiseSchedule::ve();
    const auto times = snr_window_times(s, 2);
    ASSERT_EQ(times.size(), 2u);
    // Latest time has the lowest SNR.
    EXPECT_NEAR(s.sigma(times[0]), std::sqrt(5.0), 1e-9);
    EXPECT_NEAR(s.sigma(times[1]), std::sqrt(2.0), 1e-9);
}

TEST(SnrWindow, IntermediateTimesAreLogSnrEven) {
    const NoiseSchedule s = NoiseSchedule::vp();
    const auto times = snr_window_times(s, 4);
    ASSERT_EQ(times.size(), 4u);
    const double step = std::log(s.snr(times[1])) - std::log(s.snr(times[0]));
    for (std::size_t i = 2; i < times.size(); ++i)
        EXPECT_NEAR(std::log(s.snr(times[i])) - std::log(s.snr(times[i - 1])), step, 1e-9);
}
