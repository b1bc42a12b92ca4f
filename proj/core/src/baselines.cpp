#include "vipaint/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "vipaint/adam.hpp"

namespace vipaint {

std::string to_string(BaselineMethod method) {
    switch (method) {
    case BaselineMethod::Blended: return "blended";
    case BaselineMethod::RePaint: return "repaint";
    case BaselineMethod::DPS: return "dps";
    case BaselineMethod::RedDiff: return "reddiff";
    case BaselineMethod::RedDiffV: return "reddiff-v";
    }
    return "unknown";
}

BaselineMethod baseline_method_from_string(const std::string& s) {
    for (auto m : {BaselineMethod::Blended, BaselineMethod::RePaint, BaselineMethod::DPS, BaselineMethod::RedDiff,
                   BaselineMethod::RedDiffV}) {
        if (to_string(m) == s) return m;
    }
    throw DomainError("unknown baseline method '" + s + "'");
}

BaselineConfig BaselineConfig::defaults(BaselineMethod method, ScheduleKind kind) {
    BaselineConfig c;
    c.method = method;
    switch (method) {
    case BaselineMethod::Blended:
    case BaselineMethod::DPS: c.steps = 1000; break;
    case BaselineMethod::RePaint: c.steps = 256; break;
    case BaselineMethod::RedDiff:
    case BaselineMethod::RedDiffV: c.steps = 1000; break;
    }
    c.prior_weight = kind == ScheduleKind::VE ? 50.0 : 0.25;
    return c;
}

void BaselineConfig::validate() const {
    require(steps >= 2, "baseline needs at least two grid points");
    require(zeta >= 0.0, "guidance scale must be nonnegative");
    require(method != BaselineMethod::RePaint || jump_length >= 1, "RePaint jump length must be positive");
    require(prior_weight >= 0.0, "RED-Diff prior weight must be nonnegative");
    require(lr > 0.0, "learning rate must be positive");
    require(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
}

TimeGrid baseline_grid(const NoiseSchedule& schedule, const BaselineConfig& config) {
    const double t_min = config.t_min > 0.0 ? config.t_min : default_final_time(schedule);
    return edm_grid(schedule, config.steps, t_min, schedule.t_max(), config.rho);
}

namespace {

Vec initial_latent(const NoiseSchedule& schedule, Eigen::Index d, Rng& rng) {
    const auto [a, s] = schedule.alpha_sigma(schedule.t_max());
    return std::sqrt(a * a + s * s) * rng.normal_vec(d);
}

void blend(const NoiseSchedule& schedule, const MeasurementOp& op, const Vec& y, double t, Vec& z, Rng& rng) {
    const auto [a, s] = schedule.alpha_sigma(t);
    const auto& idx = op.observed();
    for (std::size_t i = 0; i < idx.size(); ++i) z[static_cast<Eigen::Index>(idx[i])] = a * y[static_cast<Eigen::Index>(i)] + s * rng.normal();
}

} // namespace

SampleSet repaint_sample(const InverseProblem& problem, const BaselineConfig& config, std::size_t n,
                         std::uint64_t seed, const StepObserver& observer) {
    config.validate();
    const MeasurementOp& op = problem.op;
    if (op.kind() != OperatorKind::Mask) throw DomainError("blended/RePaint sampling supports mask operators only");
    const NoiseSchedule& sched = problem.schedule();
    const Denoiser& den = problem.denoiser;
    const TimeGrid grid = baseline_grid(sched, config);
    const std::size_t last = grid.size() - 1;
    const std::size_t r = std::max<std::size_t>(config.jump_length, 1);

    SampleSet out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(seed, "baseline", i);
        Vec z = initial_latent(sched, static_cast<Eigen::Index>(den.dim()), rng);
        std::size_t step = 0;
        for (std::size_t i0 = 0; i0 < last; i0 += r) {
            const std::size_t i1 = std::min(i0 + r, last);
            for (std::size_t rep = 0; rep <= config.jumps; ++rep) {
                for (std::size_t k = i0; k < i1; ++k) {
                    z = prior_transition(sched, den, z, grid[k + 1], grid[k], config.eta).sample(rng);
                    blend(sched, op, problem.y, grid[k + 1], z, rng);
                    if (observer) observer(step, grid[k + 1], z);
                    ++step;
                }
                if (rep < config.jumps) z = forward_conditional(sched, z, grid[i1], grid[i0]).sample(rng);
            }
        }
        out.push_back(den.x_hat(z, grid[last]));
    }
    return out;
}

SampleSet blended_sample(const InverseProblem& problem, const BaselineConfig& config, std::size_t n,
                         std::uint64_t seed, const StepObserver& observer) {
    BaselineConfig c = config;
    c.jumps = 0;
    return repaint_sample(problem, c, n, seed, observer);
}

SampleSet dps_sample(const InverseProblem& problem, const BaselineConfig& config, std::size_t n, std::uint64_t seed) {
    config.validate();
    const NoiseSchedule& sched = problem.schedule();
    const Denoiser& den = problem.denoiser;
    const TimeGrid grid = baseline_grid(sched, config);

    SampleSet out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(seed, "baseline", i);
        Vec z = initial_latent(sched, static_cast<Eigen::Index>(den.dim()), rng);
        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            const double t = grid[k];
            const Vec eps = den.eps_hat(z, t);
            Vec next = prior_transition_from_eps(sched, z, eps, grid[k + 1], t, config.eta).sample(rng);
            if (config.zeta != 0.0) next -= config.zeta * guidance_gradient(problem, z, t, eps);
            if (!next.allFinite()) throw NumericalError("DPS diverged at step " + std::to_string(k));
            z = std::move(next);
        }
        out.push_back(den.x_hat(z, grid.points.back()));
    }
    return out;
}

std::vector<double> reddiff_weights(const NoiseSchedule& schedule, const BaselineConfig& config) {
    const TimeGrid grid = baseline_grid(schedule, config);
    const double mid = grid[grid.size() / 2];
    const double ref = schedule.sigma(mid) / schedule.alpha(mid);
    std::vector<double> w;
    w.reserve(grid.size());
    for (double t : grid.points) w.push_back(config.prior_weight * (schedule.sigma(t) / schedule.alpha(t)) / ref);
    return w;
}

RedDiffResult reddiff(const InverseProblem& problem, const BaselineConfig& config, bool annealed, std::uint64_t seed) {
    config.validate();
    const NoiseSchedule& sched = problem.schedule();
    const Denoiser& den = problem.denoiser;
    const MeasurementOp& op = problem.op;
    const TimeGrid grid = baseline_grid(sched, config);
    const std::vector<double> weights = reddiff_weights(sched, config);
    const bool gaussian = op.observation_model() == ObservationModel::Gaussian;

    Rng rng(seed, "baseline");
    RedDiffResult out;
    out.mu = op.fill(problem.y);
    AdamState adam(out.mu.size());
    for (std::size_t step = 0; step < config.steps; ++step) {
        const std::size_t k = annealed ? step * grid.size() / config.steps : rng.index(grid.size());
        const double t = grid[k];
        const auto [a, s] = sched.alpha_sigma(t);
        const Vec eps = rng.normal_vec(out.mu.size());
        const Vec eps_hat = den.eps_hat(a * out.mu + s * eps, t);

        const Vec r = problem.y - op.apply(out.mu);
        const Vec reg = eps_hat - eps;  // held constant: gradient of reg^T mu is reg
        Vec grad = weights[k] * reg;
        double fit;
        if (gaussian) {
            fit = r.squaredNorm();
            grad -= 2.0 * op.adjoint(r);
        } else {
            fit = r.lpNorm<1>();
            grad -= op.adjoint(r.unaryExpr([](double v) { return static_cast<double>((v > 0) - (v < 0)); }));
        }
        out.trace.push_back({t, fit + weights[k] * reg.dot(out.mu)});
        adam.step(out.mu, grad, config.lr);
        if (!out.mu.allFinite()) throw NumericalError("RED-Diff diverged at step " + std::to_string(step));
    }
    return out;
}

SampleSet run_baseline(const InverseProblem& problem, const BaselineConfig& config, std::size_t n, std::uint64_t seed) {
    switch (config.method) {
    case BaselineMethod::Blended: return blended_sample(problem, config, n, seed);
    case BaselineMethod::RePaint: return repaint_sample(problem, config, n, seed);
    case BaselineMethod::DPS: return dps_sample(problem, config, n, seed);
    case BaselineMethod::RedDiff:
    case BaselineMethod::RedDiffV: {
        const RedDiffResult r = reddiff(problem, config, config.method == BaselineMethod::RedDiff, seed);
        return SampleSet(n, r.mu);
    }
    }
    throw DomainError("unknown baseline method");
}

} // namespace vipaint
