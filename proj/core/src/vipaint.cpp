#include "vipaint/vipaint.hpp"

#include <cmath>
#include <sstream>

#include "vipaint/adam.hpp"
#include "vipaint/autodiff.hpp"

namespace vipaint {

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

ad::Var denoise_node(const ad::Var& z, double t, const Denoiser& denoiser) {
    Vec zv = z.value();
    Vec eps = denoiser.eps_hat(zv, t);
    return ad::opaque(z, std::move(eps), [&denoiser, zv, t](const Vec& g) { return denoiser.vjp(zv, t, g); });
}

void check_finite(double v, const char* term) {
    if (!std::isfinite(v)) throw NumericalError(std::string("VIPaint loss is not finite in the ") + term + " term");
}

} // namespace

double VipaintLevel::gamma() const { return sigmoid(gamma_tilde); }

VipaintConfig VipaintConfig::defaults(const NoiseSchedule& schedule, std::size_t k) {
    VipaintConfig cfg;
    cfg.times = snr_window_times(schedule, k);
    cfg.init = VipaintInit::for_schedule(schedule.kind());
    if (k == 2) {
        cfg.beta = 1.0;
        cfg.opt_steps = 50;
    } else {
        cfg.beta = schedule.kind() == ScheduleKind::VE ? 50.0 : 10.0;
        cfg.opt_steps = 150;
    }
    return cfg;
}

void VipaintConfig::validate(const NoiseSchedule& schedule) const {
    require(times.size() >= 2, "VIPaint needs at least two critical times");
    for (std::size_t i = 0; i < times.size(); ++i) {
        schedule.check_time(times[i]);
        if (i > 0) require(times[i] < times[i - 1], "critical times must be strictly decreasing");
    }
    require(times.front() < schedule.t_max(), "T_e must lie below T");
    if (enforce_snr_window) {
        for (double t : times) {
            const double r = schedule.snr(t);
            if (r < snr_lo * (1 - 1e-9) || r > snr_hi * (1 + 1e-9)) {
                std::ostringstream os;
                os << "critical time " << t << " has SNR " << r << " outside [" << snr_lo << ", " << snr_hi << "]";
                throw DomainError(os.str());
            }
        }
    }
    require(beta >= 0.0, "beta must be nonnegative");
    require(mc_samples >= 1, "need at least one Monte-Carlo sample");
    require(diffusion_terms >= 1, "need at least one diffusion-loss term");
    require(lr_decay_every >= 1, "lr decay interval must be positive");
    require(init.gamma0 > 0.0 && init.gamma0 < 1.0, "gamma0 must lie in (0, 1)");
    if (schedule.kind() == ScheduleKind::VP) require(eta > 0.0, "VP prior transitions need eta > 0 for finite KLs");
}

Vec VipaintParams::flatten() const {
    Vec flat(size());
    Eigen::Index o = 0;
    const auto d = dim();
    flat.segment(o, d) = mu_te;
    o += d;
    flat.segment(o, d) = tau_tilde_te;
    o += d;
    for (const VipaintLevel& l : levels) {
        flat.segment(o, d) = l.mu;
        o += d;
        flat.segment(o, d) = l.tau_tilde;
        o += d;
        flat[o++] = l.gamma_tilde;
    }
    return flat;
}

VipaintParams VipaintParams::unflatten(const Vec& flat, Eigen::Index d, std::size_t levels) {
    require(flat.size() == 2 * d + static_cast<Eigen::Index>(levels) * (2 * d + 1), "flat parameter size mismatch");
    VipaintParams p;
    Eigen::Index o = 0;
    p.mu_te = flat.segment(o, d);
    o += d;
    p.tau_tilde_te = flat.segment(o, d);
    o += d;
    for (std::size_t j = 0; j < levels; ++j) {
        VipaintLevel l;
        l.mu = flat.segment(o, d);
        o += d;
        l.tau_tilde = flat.segment(o, d);
        o += d;
        l.gamma_tilde = flat[o++];
        p.levels.push_back(std::move(l));
    }
    return p;
}

Eigen::Index VipaintParams::size() const {
    return 2 * dim() + static_cast<Eigen::Index>(levels.size()) * (2 * dim() + 1);
}

VipaintParams init_params(const VipaintConfig& config, const NoiseSchedule& schedule, const Vec& y_filled,
                          std::uint64_t seed) {
    require(config.times.size() >= 2, "VIPaint needs at least two critical times");
    const auto d = y_filled.size();
    Rng rng(seed, "init");
    VipaintParams p;
    const double te = config.t_end();
    const auto [a_te, s_te] = schedule.alpha_sigma(te);
    p.mu_te = a_te * y_filled + config.init.a1 * s_te * rng.normal_vec(d);
    p.tau_tilde_te = Vec::Constant(d, 2.0 * std::log(s_te));
    for (std::size_t j = 0; j + 1 < config.times.size(); ++j) {
        const double t = config.times[j];
        const double s = config.times[j + 1];
        const auto [a_s, s_s] = schedule.alpha_sigma(s);
        VipaintLevel l;
        l.mu = a_s * y_filled + config.init.a2 * s_s * rng.normal_vec(d);
        const double eta = schedule.kind() == ScheduleKind::VE ? 0.0 : config.init.a3;
        const double tau = prior_coeffs(schedule, s, t, eta).std;
        require(tau > 0.0, "initial level std must be positive");
        l.tau_tilde = Vec::Constant(d, 2.0 * std::log(tau));
        l.gamma_tilde = logit(config.init.gamma0);
        p.levels.push_back(std::move(l));
    }
    return p;
}

ChainNoise draw_chain_noise(Rng& rng, Eigen::Index dim, std::size_t levels, std::size_t diffusion_terms) {
    ChainNoise n;
    n.eps_te = rng.normal_vec(dim);
    for (std::size_t j = 0; j < levels; ++j) n.eps_levels.push_back(rng.normal_vec(dim));
    n.diffusion_index = rng.index(diffusion_terms);
    n.diffusion_weight = static_cast<double>(diffusion_terms);
    n.eps_diffusion = rng.normal_vec(dim);
    return n;
}

ChainNoise chain_noise(std::uint64_t seed, std::size_t step, std::size_t chain, Eigen::Index dim,
                       const VipaintConfig& config) {
    Rng rng(seed, "mc-chain", step, chain);
    return draw_chain_noise(rng, dim, config.levels() - 1, config.diffusion_terms);
}

std::vector<std::pair<double, double>> diffusion_loss_terms(const NoiseSchedule& schedule, const VipaintConfig& config) {
    const TimeGrid grid = edm_grid(schedule, config.diffusion_terms + 2, config.t_end(), schedule.t_max(), config.rho);
    std::vector<std::pair<double, double>> terms;
    for (std::size_t j = 0; j < config.diffusion_terms; ++j) terms.emplace_back(grid[j], grid[j + 1]);
    return terms;
}

std::vector<double> diffusion_term_probabilities(const NoiseSchedule& schedule, const VipaintConfig& config) {
    const auto snr = [&](double t) {
        const auto [a, s] = schedule.alpha_sigma(t);
        return a * a / (s * s);
    };
    std::vector<double> p;
    double total = 0.0;
    for (const auto& [t, s] : diffusion_loss_terms(schedule, config)) {
        p.push_back(snr(s) - snr(t));
        total += p.back();
    }
    for (double& v : p) v /= total;
    return p;
}

std::vector<Vec> sample_chain(const VipaintParams& params, const VipaintConfig& config, const Denoiser& denoiser,
                              const ChainNoise& noise) {
    const NoiseSchedule& sched = denoiser.schedule();
    std::vector<Vec> zs;
    zs.push_back(params.mu_te + params.tau_te().cwiseProduct(noise.eps_te));
    for (std::size_t j = 0; j < params.levels.size(); ++j) {
        const double t = config.times[j];
        const double s = config.times[j + 1];
        const VipaintLevel& l = params.levels[j];
        const PriorCoeffs pc = prior_coeffs(sched, s, t, config.eta);
        const Vec z_hat = pc.z_coef * zs.back() + pc.eps_coef * denoiser.eps_hat(zs.back(), t);
        const double g = l.gamma();
        const Vec mean = g * z_hat + (1.0 - g) * l.mu;
        zs.push_back(mean + l.tau().cwiseProduct(noise.eps_levels[j]));
    }
    return zs;
}

std::vector<std::vector<Vec>> sample_hierarchy(const VipaintParams& params, const VipaintConfig& config,
                                               const Denoiser& denoiser, std::size_t m, std::uint64_t seed) {
    std::vector<std::vector<Vec>> out;
    for (std::size_t c = 0; c < m; ++c) {
        out.push_back(sample_chain(params, config, denoiser, chain_noise(seed, 0, c, params.dim(), config)));
    }
    return out;
}

double diffusion_term(const VipaintConfig& config, const Denoiser& denoiser, const Vec& z_te, std::size_t index,
                      const Vec& eps) {
    const NoiseSchedule& sched = denoiser.schedule();
    const auto terms = diffusion_loss_terms(sched, config);
    require(index < terms.size(), "diffusion term index out of range");
    const auto [t, s] = terms[index];
    const double te = config.t_end();
    const auto tc = transition_coeffs(sched, te, t);
    const Vec z_t = tc.alpha * z_te + std::sqrt(tc.var) * eps;
    const DiagGaussian q = bridge_posterior(sched, z_t, z_te, s, t, te);
    const DiagGaussian p = bridge_prior(sched, denoiser, z_t, s, t, te);
    return kl_diag(q, p);
}

namespace {

struct ChainLoss {
    double recon = 0.0;
    double hier = 0.0;
    double diff = 0.0;
};

// Records one chain of the objective on `tape`; returns the chain's total as a scalar node.
ad::Var record_chain(ad::Tape& tape, const std::vector<ad::Var>& leaves, const VipaintParams& params,
                     const VipaintConfig& config, const InverseProblem& problem,
                     const std::vector<std::pair<double, double>>& terms, const ChainNoise& noise, ChainLoss& parts) {
    const NoiseSchedule& sched = problem.schedule();
    const Denoiser& den = problem.denoiser;
    const MeasurementOp& op = problem.op;
    const auto d = params.dim();
    const double dd = static_cast<double>(d);

    const ad::Var& mu_te = leaves[0];
    const ad::Var& tt_te = leaves[1];
    const ad::Var z_te = mu_te + ad::exp(tt_te * 0.5) * noise.eps_te;

    // Hierarchical levels.
    ad::Var z = z_te;
    ad::Var hier = tape.constant(0.0);
    for (std::size_t j = 0; j < params.levels.size(); ++j) {
        const double t = config.times[j];
        const double s = config.times[j + 1];
        const ad::Var& mu = leaves[2 + 3 * j];
        const ad::Var& tt = leaves[3 + 3 * j];
        const ad::Var& gt = leaves[4 + 3 * j];
        const PriorCoeffs pc = prior_coeffs(sched, s, t, config.eta);
        if (!(pc.std > 0.0)) throw DomainError("prior transition std is zero; KL undefined");
        const ad::Var eps = denoise_node(z, t, den);
        const ad::Var z_hat = z * pc.z_coef + eps * pc.eps_coef;
        const ad::Var gamma = ad::sigmoid(gt);
        const ad::Var mean = mu + gamma * (z_hat - mu);
        const double pv = pc.std * pc.std;
        // KL(N(mean, tau^2) || N(z_hat, pv)) with log tau = tt / 2.
        const ad::Var kl = ad::sum((ad::exp(tt) + ad::square(mean - z_hat)) * (0.5 / pv) - tt * 0.5) +
                           dd * (std::log(pc.std) - 0.5);
        hier = hier + kl;
        z = mean + ad::exp(tt * 0.5) * noise.eps_levels[j];
    }

    // Reconstruction through the one-step prediction at T_s.
    const double ts = config.t_start();
    const auto [a_s, s_s] = sched.alpha_sigma(ts);
    const ad::Var eps_s = denoise_node(z, ts, den);
    const ad::Var x0 = (z - eps_s * s_s) * (1.0 / a_s);
    const ad::Var ax = ad::opaque(x0, op.apply(x0.value()), [&op](const Vec& g) { return op.adjoint(g); });
    const ad::Var resid = problem.y - ax;
    const double m = static_cast<double>(resid.size());
    ad::Var nll;
    if (op.observation_model() == ObservationModel::Gaussian) {
        const double var = op.sigma_v() * op.sigma_v();
        nll = ad::sum(ad::square(resid)) * (0.5 / var) + 0.5 * m * std::log(2.0 * 3.14159265358979323846 * var);
    } else {
        const double b = op.laplace_scale();
        nll = ad::sum(ad::abs(resid)) * (1.0 / b) + m * std::log(2.0 * b);
    }

    // Diffusion loss over (T_e, T].
    const double te = config.t_end();
    const auto [t, s] = terms[noise.diffusion_index];
    const auto tc = transition_coeffs(sched, te, t);
    const double sd = std::sqrt(tc.var);
    const ad::Var z_t = z_te * tc.alpha + noise.eps_diffusion * sd;
    const ad::Var eps_t = denoise_node(z_t, t, den);
    const ad::Var z_te_hat = (z_t - eps_t * sd) * (1.0 / tc.alpha);
    const BridgeCoeffs bc = bridge_coeffs(sched, s, t, te);
    const ad::Var diff = ad::sum(ad::square((z_te - z_te_hat) * bc.c_te)) *
                         (0.5 / bc.var * noise.diffusion_weight);

    parts.recon = nll.scalar();
    parts.hier = hier.scalar();
    parts.diff = diff.scalar();
    check_finite(parts.recon, "reconstruction");
    check_finite(parts.hier, "hierarchical KL");
    check_finite(parts.diff, "diffusion");
    return nll + (hier + diff) * config.beta;
}

} // namespace

LossResult evaluate_loss(const VipaintParams& params, const VipaintConfig& config, const InverseProblem& problem,
                         const std::vector<ChainNoise>& noise, bool with_grad) {
    require(!noise.empty(), "need at least one Monte-Carlo chain");
    require(params.levels.size() + 1 == config.times.size(), "parameter levels disagree with critical times");
    require(static_cast<std::size_t>(params.dim()) == problem.denoiser.dim(), "parameter dimension disagrees with prior");
    const auto terms = diffusion_loss_terms(problem.schedule(), config);
    const double inv_m = 1.0 / static_cast<double>(noise.size());

    LossResult out;
    if (with_grad) out.grad = Vec::Zero(params.size());
    for (const ChainNoise& n : noise) {
        ad::Tape tape;
        std::vector<ad::Var> leaves{tape.leaf(params.mu_te), tape.leaf(params.tau_tilde_te)};
        for (const VipaintLevel& l : params.levels) {
            leaves.push_back(tape.leaf(l.mu));
            leaves.push_back(tape.leaf(l.tau_tilde));
            leaves.push_back(tape.leaf(l.gamma_tilde));
        }
        ChainLoss parts;
        const ad::Var total = record_chain(tape, leaves, params, config, problem, terms, n, parts);
        out.loss.recon += inv_m * parts.recon;
        out.loss.hier_kl += inv_m * parts.hier;
        out.loss.diff_kl += inv_m * parts.diff;
        out.loss.total += inv_m * total.scalar();
        if (with_grad) {
            const ad::Gradients g = tape.backward(total);
            Eigen::Index o = 0;
            for (const ad::Var& leaf : leaves) {
                out.grad.segment(o, leaf.size()) += inv_m * g[leaf];
                o += leaf.size();
            }
        }
    }
    check_finite(out.loss.total, "total");
    return out;
}

std::vector<ChainNoise> step_noise(const NoiseSchedule& schedule, std::uint64_t seed, std::size_t step, std::size_t m,
                                   Eigen::Index dim, const VipaintConfig& config) {
    const std::vector<double> probs = diffusion_term_probabilities(schedule, config);
    std::vector<ChainNoise> noise;
    for (std::size_t c = 0; c < m; ++c) {
        noise.push_back(chain_noise(seed, step, c, dim, config));
        Rng stratum(seed, "mc-stratum", step, c);
        const double u = (static_cast<double>(c) + stratum.uniform()) / static_cast<double>(m);
        std::size_t j = 0;
        for (double cdf = probs[0]; cdf <= u && j + 1 < probs.size(); cdf += probs[++j]) {}
        noise.back().diffusion_index = j;
        noise.back().diffusion_weight = 1.0 / probs[j];
    }
    return noise;
}

LossBreakdown loss(const VipaintParams& params, const VipaintConfig& config, const InverseProblem& problem,
                   std::size_t m, std::uint64_t seed) {
    return evaluate_loss(params, config, problem, step_noise(problem.schedule(), seed, 0, m, params.dim(), config), false).loss;
}

LossResult loss_grad(const VipaintParams& params, const VipaintConfig& config, const InverseProblem& problem,
                     std::size_t m, std::uint64_t seed) {
    return evaluate_loss(params, config, problem, step_noise(problem.schedule(), seed, 0, m, params.dim(), config), true);
}

OptimizeResult optimize(VipaintParams params, const VipaintConfig& config, const InverseProblem& problem,
                        std::uint64_t seed) {
    config.validate(problem.schedule());
    const CountingDenoiser counter(problem.denoiser);
    const InverseProblem counted{counter, problem.op, problem.y};
    const auto d = params.dim();

    // Parameter groups: means, gamma logits, log-variances.
    std::vector<AdamState> mu_state, tau_state, gamma_state;
    mu_state.emplace_back(d);
    tau_state.emplace_back(d);
    for (std::size_t j = 0; j < params.levels.size(); ++j) {
        mu_state.emplace_back(d);
        tau_state.emplace_back(d);
        gamma_state.emplace_back(1);
    }

    OptimizeResult out;
    for (std::size_t step = 0; step < config.opt_steps; ++step) {
        const auto noise = step_noise(problem.schedule(), seed, step, config.mc_samples, d, config);
        const LossResult lr = evaluate_loss(params, config, counted, noise, true);
        out.trace.push_back(lr.loss);
        const VipaintParams g = VipaintParams::unflatten(lr.grad, d, params.levels.size());
        const double decay = std::pow(config.lr_decay, static_cast<double>(step / config.lr_decay_every));
        mu_state[0].step(params.mu_te, g.mu_te, config.lr_mu * decay);
        tau_state[0].step(params.tau_tilde_te, g.tau_tilde_te, config.lr_tau * decay);
        for (std::size_t j = 0; j < params.levels.size(); ++j) {
            VipaintLevel& l = params.levels[j];
            mu_state[j + 1].step(l.mu, g.levels[j].mu, config.lr_mu * decay);
            tau_state[j + 1].step(l.tau_tilde, g.levels[j].tau_tilde, config.lr_tau * decay);
            Vec gt = Vec::Constant(1, l.gamma_tilde);
            gamma_state[j].step(gt, Vec::Constant(1, g.levels[j].gamma_tilde), config.lr_gamma * decay);
            l.gamma_tilde = gt[0];
        }
        if (!params.flatten().allFinite())
            throw NumericalError("VIPaint optimization diverged at step " + std::to_string(step));
    }
    out.params = std::move(params);
    out.denoiser_calls_per_chain =
        static_cast<double>(counter.evaluations()) / static_cast<double>(config.mc_samples);
    return out;
}

double default_final_time(const NoiseSchedule& schedule) { return schedule.time_at_sigma(2.0 * schedule.sigma_min()); }

Vec guidance_gradient(const InverseProblem& problem, const Vec& z, double t, const Vec& eps) {
    const MeasurementOp& op = problem.op;
    const Vec x = problem.denoiser.x_hat_from_eps(z, t, eps);
    const Vec r = problem.y - op.apply(x);
    Vec dres;
    if (op.observation_model() == ObservationModel::Gaussian) {
        dres = -2.0 * r;
    } else {
        dres = -r.unaryExpr([](double v) { return static_cast<double>((v > 0) - (v < 0)); });
    }
    return problem.denoiser.x_hat_vjp(z, t, op.adjoint(dres));
}

SampleSet phase2_sample(const VipaintParams& params, const VipaintConfig& config, const InverseProblem& problem,
                        std::size_t n, std::uint64_t seed) {
    const NoiseSchedule& sched = problem.schedule();
    const Denoiser& den = problem.denoiser;
    const Phase2Config& p2 = config.phase2;
    require(p2.steps >= 1, "phase 2 needs at least one step");
    const double t_min = p2.t_min > 0.0 ? p2.t_min : default_final_time(sched);
    require(t_min < config.t_start(), "phase 2 final time must lie below T_s");
    const TimeGrid grid = edm_grid(sched, p2.steps + 1, t_min, config.t_start(), config.rho);

    SampleSet out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(seed, "phase2", i);
        const ChainNoise noise = draw_chain_noise(rng, params.dim(), params.levels.size(), config.diffusion_terms);
        Vec z = sample_chain(params, config, den, noise).back();
        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            const double t = grid[k];
            const double s = grid[k + 1];
            const Vec eps = den.eps_hat(z, t);
            Vec next = prior_transition_from_eps(sched, z, eps, s, t, p2.eta).sample(rng);
            if (p2.zeta != 0.0) next -= p2.zeta * guidance_gradient(problem, z, t, eps);
            z = std::move(next);
        }
        out.push_back(den.x_hat(z, grid.points.back()));
    }
    return out;
}

} // namespace vipaint
