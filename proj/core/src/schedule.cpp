#include "vipaint/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vipaint {

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::VE ? "VE" : "VP"; }

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "VE" || s == "ve") return ScheduleKind::VE;
    if (s == "VP" || s == "vp") return ScheduleKind::VP;
    throw DomainError("unknown schedule kind '" + s + "'");
}

NoiseSchedule::NoiseSchedule(ScheduleKind kind, double lo, double hi, double t_max)
    : kind_(kind), lo_(lo), hi_(hi), t_max_(t_max) {}

NoiseSchedule NoiseSchedule::ve(double sigma_min, double sigma_max, double t_max) {
    require(sigma_min > 0.0 && sigma_max > sigma_min, "VE schedule needs 0 < sigma_min < sigma_max");
    if (t_max <= 0.0) t_max = sigma_max;
    return NoiseSchedule(ScheduleKind::VE, sigma_min, sigma_max, t_max);
}

NoiseSchedule NoiseSchedule::vp(double var_min, double var_max, double t_max) {
    require(var_min > 0.0 && var_max > var_min && var_max < 1.0, "VP schedule needs 0 < var_min < var_max < 1");
    require(t_max > 0.0, "VP schedule needs T > 0");
    return NoiseSchedule(ScheduleKind::VP, std::sqrt(var_min), std::sqrt(var_max), t_max);
}

NoiseSchedule NoiseSchedule::from_bounds(ScheduleKind kind, double sigma_lo, double sigma_hi, double t_max) {
    require(sigma_lo > 0.0 && sigma_hi > sigma_lo && t_max > 0.0, "invalid schedule bounds");
    if (kind == ScheduleKind::VP) require(sigma_hi < 1.0, "VP schedule needs sigma_max < 1");
    return NoiseSchedule(kind, sigma_lo, sigma_hi, t_max);
}

void NoiseSchedule::check_time(double t) const {
    if (!(t > 0.0 && t <= t_max_ * (1.0 + 1e-12))) {
        std::ostringstream os;
        os << "time " << t << " outside (0, " << t_max_ << "]";
        throw DomainError(os.str());
    }
}

AlphaSigma NoiseSchedule::alpha_sigma(double t) const {
    check_time(t);
    const double u = std::min(t / t_max_, 1.0);
    if (kind_ == ScheduleKind::VE) return {1.0, lo_ + (hi_ - lo_) * u};
    const double var = lo_ * lo_ + (hi_ * hi_ - lo_ * lo_) * u;
    return {std::sqrt(1.0 - var), std::sqrt(var)};
}

double NoiseSchedule::snr(double t) const {
    const auto [a, s] = alpha_sigma(t);
    return (a * a) / (s * s);
}

double NoiseSchedule::time_at_sigma(double sigma) const {
    require(sigma > lo_ * (1.0 - 1e-12) && sigma <= hi_ * (1.0 + 1e-12), "noise level outside schedule range");
    double u;
    if (kind_ == ScheduleKind::VE) {
        u = (sigma - lo_) / (hi_ - lo_);
    } else {
        u = (sigma * sigma - lo_ * lo_) / (hi_ * hi_ - lo_ * lo_);
    }
    u = std::clamp(u, 0.0, 1.0);
    return u * t_max_;
}

double NoiseSchedule::time_at_snr(double snr_value) const {
    require(snr_value > 0.0, "snr must be positive");
    // VE: snr = 1/sigma^2. VP: snr = (1 - v)/v, so v = 1/(1 + snr).
    const double sigma = kind_ == ScheduleKind::VE ? 1.0 / std::sqrt(snr_value) : std::sqrt(1.0 / (1.0 + snr_value));
    return time_at_sigma(sigma);
}

TimeGrid edm_grid(const NoiseSchedule& schedule, std::size_t n, double t_lo, double t_hi, double rho) {
    require(n >= 2, "edm_grid needs at least two points");
    require(t_lo > 0.0 && t_lo < t_hi, "edm_grid needs 0 < t_lo < t_hi");
    require(rho > 0.0, "edm_grid needs rho > 0");
    schedule.check_time(t_hi);

    const double a = std::pow(schedule.sigma(t_hi), 1.0 / rho);
    const double b = std::pow(schedule.sigma(t_lo), 1.0 / rho);
    TimeGrid grid;
    grid.rho = rho;
    grid.points.resize(n);
    grid.points.front() = t_hi;
    grid.points.back() = t_lo;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
        grid.points[i] = schedule.time_at_sigma(std::pow(a + frac * (b - a), rho));
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(grid.points[i] < grid.points[i - 1])) throw DomainError("edm_grid: points not strictly decreasing");
    }
    return grid;
}

std::vector<double> snr_window_times(const NoiseSchedule& schedule, std::size_t k, double snr_lo, double snr_hi) {
    require(k >= 2, "need at least two critical times");
    require(0.0 < snr_lo && snr_lo < snr_hi, "bad snr window");
    std::vector<double> times(k);
    const double l0 = std::log(snr_lo);
    const double l1 = std::log(snr_hi);
    for (std::size_t i = 0; i < k; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(k - 1);
        times[i] = schedule.time_at_snr(std::exp(l0 + frac * (l1 - l0)));
    }
    return times;
}

} // namespace vipaint
