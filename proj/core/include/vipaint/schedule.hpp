#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vipaint/types.hpp"

namespace vipaint {

enum class ScheduleKind { VE, VP };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& s);

struct AlphaSigma {
    double alpha;
    double sigma;
};

/// Noise schedule (alpha_t, sigma_t) on continuous time t in (0, T].
///
/// VE: alpha = 1 and sigma grows linearly from sigma_min (t -> 0) to sigma_max (t = T).
/// With the default T = sigma_max, t is approximately the noise level itself.
/// VP: sigma^2 grows linearly from var_min to var_max and alpha = sqrt(1 - sigma^2).
class NoiseSchedule {
public:
    static NoiseSchedule ve(double sigma_min = 0.002, double sigma_max = 50.0, double t_max = 0.0);
    static NoiseSchedule vp(double var_min = 1e-4, double var_max = 0.999, double t_max = 1.0);
    /// Rebuilds a schedule from its stored noise-level bounds (sigma_min(), sigma_max(), t_max()).
    static NoiseSchedule from_bounds(ScheduleKind kind, double sigma_lo, double sigma_hi, double t_max);

    ScheduleKind kind() const { return kind_; }
    double t_max() const { return t_max_; }
    /// Noise level at t -> 0 and at t = T.
    double sigma_min() const { return lo_; }
    double sigma_max() const { return hi_; }

    AlphaSigma alpha_sigma(double t) const;
    double alpha(double t) const { return alpha_sigma(t).alpha; }
    double sigma(double t) const { return alpha_sigma(t).sigma; }
    double snr(double t) const;

    /// Inverse of sigma(t); sigma must lie in (sigma_min, sigma_max].
    double time_at_sigma(double sigma) const;
    /// Time at which snr(t) equals the given value.
    double time_at_snr(double snr) const;

    void check_time(double t) const;

private:
    NoiseSchedule(ScheduleKind kind, double lo, double hi, double t_max);

    ScheduleKind kind_;
    double lo_;
    double hi_;
    double t_max_;
};

struct TimeGrid {
    /// Strictly decreasing times.
    std::vector<double> points;
    double rho = 7.0;

    std::size_t size() const { return points.size(); }
    double operator[](std::size_t i) const { return points[i]; }
};

/// EDM power-law discretization: n decreasing times from t_hi to t_lo whose noise levels
/// interpolate sigma(t_hi)^(1/rho) .. sigma(t_lo)^(1/rho) linearly, raised back to rho.
TimeGrid edm_grid(const NoiseSchedule& schedule, std::size_t n, double t_lo, double t_hi, double rho = 7.0);

/// K decreasing times (first is the latest) with log-SNR evenly spaced over [snr_lo, snr_hi].
std::vector<double> snr_window_times(const NoiseSchedule& schedule, std::size_t k, double snr_lo = 0.2,
                                     double snr_hi = 0.5);

} // namespace vipaint
