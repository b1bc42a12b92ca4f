#include <cmath>
#include <filesystem>
#include <sstream>

#include "vipaint/autodiff.hpp"
#include "vipaint/harness.hpp"

namespace vipaint {

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

GmmPrior two_mode_prior() {
    return {{0.5, 0.5}, {Vec{{-2.0, -1.0}}, Vec{{2.0, 1.0}}}, {Vec::Constant(2, 0.25), Vec::Constant(2, 0.25)}};
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

SelfCheckResult check(const std::string& name, bool ok, const std::string& detail) { return {name, ok, detail}; }

SelfCheckResult vp_identity() {
    const NoiseSchedule s = NoiseSchedule::vp();
    double worst = 0.0;
    for (int i = 1; i <= 1000; ++i) {
        const auto [a, sg] = s.alpha_sigma(s.t_max() * i / 1000.0);
        worst = std::max(worst, std::abs(a * a + sg * sg - 1.0));
    }
    return check("vp alpha^2 + sigma^2 = 1", worst < 1e-12, "max deviation " + fmt(worst));
}

SelfCheckResult kl_properties() {
    Rng rng(1, "selfcheck");
    bool ok = true;
    for (int i = 0; i < 20; ++i) {
        const DiagGaussian q(rng.normal_vec(3), (rng.normal_vec(3).array().abs() + 0.1).matrix());
        const DiagGaussian p(rng.normal_vec(3), (rng.normal_vec(3).array().abs() + 0.1).matrix());
        ok = ok && kl_diag(q, p) >= 0.0 && std::abs(kl_diag(q, q)) < 1e-14;
    }
    return check("kl_diag nonnegative and zero on equal arguments", ok, "20 random pairs");
}

SelfCheckResult gmm_vjp() {
    const GmmDenoiser den(two_mode_prior(), NoiseSchedule::ve());
    Rng rng(2, "selfcheck");
    double worst = 0.0;
    for (double t : {0.5, 2.0, 10.0}) {
        const Vec z = 2.0 * rng.normal_vec(2), u = rng.normal_vec(2);
        const Vec g = den.vjp(z, t, u);
        for (Eigen::Index i = 0; i < 2; ++i) {
            Vec zp = z, zm = z;
            const double h = 1e-5;
            zp[i] += h;
            zm[i] -= h;
            const double fd = u.dot(den.eps_hat(zp, t) - den.eps_hat(zm, t)) / (2 * h);
            worst = std::max(worst, rel_err(g[i], fd));
        }
    }
    return check("mixture denoiser VJP matches finite differences", worst < 1e-5, "max rel err " + fmt(worst));
}

SelfCheckResult tape_fd() {
    double worst = 0.0;
    for (double x0 : {0.3, 1.7, 4.2}) {
        ad::Tape tape;
        const ad::Var x = tape.leaf(Vec::Constant(1, x0));
        const ad::Var y = ad::sum(ad::sigmoid(ad::log(x)));
        const double g = tape.backward(y)[x][0];
        const double h = 1e-6;
        auto f = [](double v) { return 1.0 / (1.0 + std::exp(-std::log(v))); };
        worst = std::max(worst, rel_err(g, (f(x0 + h) - f(x0 - h)) / (2 * h)));
    }
    return check("reverse-mode sigmoid(log x) matches finite differences", worst < 1e-7,
                 "max rel err " + fmt(worst));
}

SelfCheckResult vipaint_gradient() {
    const NoiseSchedule sched = NoiseSchedule::ve();
    const GmmDenoiser den(two_mode_prior(), sched);
    const MeasurementOp op = MeasurementOp::mask({0, 1}, 0.5);
    const InverseProblem prob{den, op, Vec::Constant(1, 0.3)};
    VipaintConfig cfg = VipaintConfig::defaults(sched, 2);
    const VipaintParams p = init_params(cfg, sched, op.fill(prob.y), 0);
    std::vector<ChainNoise> noise;
    for (std::size_t c = 0; c < 2; ++c) noise.push_back(chain_noise(0, 0, c, 2, cfg));
    const Vec g = evaluate_loss(p, cfg, prob, noise, true).grad;
    const Vec flat = p.flatten();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(flat[i]));
        Vec fp = flat, fm = flat;
        fp[i] += h;
        fm[i] -= h;
        const double lp = evaluate_loss(VipaintParams::unflatten(fp, 2, 1), cfg, prob, noise, false).loss.total;
        const double lm = evaluate_loss(VipaintParams::unflatten(fm, 2, 1), cfg, prob, noise, false).loss.total;
        worst = std::max(worst, rel_err(g[i], (lp - lm) / (2 * h)));
    }
    return check("variational gradient matches finite differences", worst < 1e-4, "max rel err " + fmt(worst));
}

SelfCheckResult blended_observed() {
    const NoiseSchedule sched = NoiseSchedule::ve();
    const GmmDenoiser den(two_mode_prior(), sched);
    const MeasurementOp op = MeasurementOp::mask({0, 1}, 0.05);
    const InverseProblem prob{den, op, Vec::Constant(1, 0.4)};
    BaselineConfig bc = BaselineConfig::defaults(BaselineMethod::Blended, sched.kind());
    bc.steps = 100;
    double worst = 0.0;
    for (const Vec& x : blended_sample(prob, bc, 8, 0)) worst = std::max(worst, std::abs(x[1] - 0.4));
    const double bound = 3.0 * 2.0 * sched.sigma_min();
    return check("blended samples reproduce observed coordinates", worst < bound,
                 "max deviation " + fmt(worst) + " (bound " + fmt(bound) + ")");
}

SelfCheckResult sample_roundtrip() {
    const SampleSet s = sample(two_mode_prior(), 5, 3);
    const auto path = std::filesystem::temp_directory_path() / "vipaint-selfcheck-samples.bin";
    write_samples(path, s, 0x1234);
    const SampleFile f = read_samples(path);
    std::filesystem::remove(path);
    bool ok = f.config_hash == 0x1234 && f.samples.size() == s.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = f.samples[i] == s[i];
    return check("sample file round trip is exact", ok, "5 x 2 samples");
}

SelfCheckResult posterior_normalized() {
    const GmmPrior prior = two_mode_prior();
    const MeasurementOp op = MeasurementOp::mask({1, 0}, 0.1);
    const GmmPosterior post = exact_posterior(prior, op, Vec::Constant(1, 0.7));
    double sum = 0.0;
    for (double w : post.weights) sum += w;
    return check("exact posterior weights sum to one", std::abs(sum - 1.0) < 1e-12, "sum " + fmt(sum));
}

} // namespace

std::vector<SelfCheckResult> run_selfcheck() {
    std::vector<SelfCheckResult> out;
    for (auto f : {vp_identity, kl_properties, gmm_vjp, tape_fd, vipaint_gradient, blended_observed, sample_roundtrip,
                   posterior_normalized}) {
        try {
            out.push_back(f());
        } catch (const std::exception& e) {
            out.push_back({"exception", false, e.what()});
        }
    }
    return out;
}

} // namespace vipaint
