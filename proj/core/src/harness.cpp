#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "vipaint/harness.hpp"
#include "vipaint/metrics.hpp"

namespace vipaint {

namespace {

using ojson = nlohmann::ordered_json;

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace

Problem::Problem(const ExperimentConfig& config)
    : schedule_(config.schedule.build()),
      op_(build_operator(config.op, config.prior.gmm)),
      y_(config.y),
      truth_(exact_posterior(config.prior.gmm, op_, y_)) {
    if (!config.prior.mlp) {
        denoiser_ = std::make_unique<GmmDenoiser>(config.prior.gmm, schedule_);
        return;
    }
    const auto& path = config.prior.mlp->weights_path;
    if (!std::filesystem::exists(path))
        throw ConfigError("MLP weights '" + path.string() + "' do not exist; run train-denoiser first");
    auto net = std::make_unique<MlpDenoiser>(MlpDenoiser::load(path.string()));
    const NoiseSchedule& s = net->schedule();
    if (net->dim() != config.prior.gmm.dim() || s.kind() != schedule_.kind() || s.sigma_min() != schedule_.sigma_min() ||
        s.sigma_max() != schedule_.sigma_max() || s.t_max() != schedule_.t_max())
        throw ConfigError("MLP weights '" + path.string() + "' were trained for a different dimension or schedule");
    denoiser_ = std::move(net);
}

RunOutput run_single(const ExperimentConfig& config, const Problem& problem, const MethodSpec& method,
                     std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    RunOutput out;
    RunSummary& s = out.summary;
    s.method = method.name;
    s.seed = seed;
    s.config_hash = config.run_hash(method.name);
    s.problem_hash = config.problem_hash();
    const std::size_t n = config.samples;

    if (method.is_vipaint()) {
        const InverseProblem ip = problem.inverse(problem.denoiser());
        const VipaintParams init = init_params(method.vipaint, problem.schedule(), problem.op().fill(problem.y()), seed);
        OptimizeResult opt = optimize(init, method.vipaint, ip, seed);
        out.samples = phase2_sample(opt.params, method.vipaint, ip, n, seed);
        out.trace = std::move(opt.trace);
        s.denoiser_calls = opt.denoiser_calls_per_chain;
        s.final_loss = out.trace.empty() ? 0.0 : out.trace.back().total;
    } else {
        const CountingDenoiser counter(problem.denoiser());
        const InverseProblem ip = problem.inverse(counter);
        const BaselineConfig& bc = method.baseline;
        if (bc.method == BaselineMethod::RedDiff || bc.method == BaselineMethod::RedDiffV) {
            RedDiffResult r = reddiff(ip, bc, bc.method == BaselineMethod::RedDiff, seed);
            out.samples = SampleSet(n, r.mu);
            out.reddiff_trace = std::move(r.trace);
            s.final_loss = out.reddiff_trace.empty() ? 0.0 : out.reddiff_trace.back().loss;
            s.denoiser_calls = static_cast<double>(counter.evaluations());
        } else {
            out.samples = run_baseline(ip, bc, n, seed);
            s.denoiser_calls = static_cast<double>(counter.evaluations()) / static_cast<double>(n);
        }
    }

    const SampleSet oracle = sample(problem.truth(), config.oracle_samples, derive_seed(seed, "oracle"));
    const ModeCoverage mc = mode_coverage(out.samples, problem.truth());
    const MomentError me = moment_error(out.samples, problem.truth());
    s.samples = out.samples.size();
    s.mode_frequencies = mc.frequencies;
    s.mode_tv = mc.tv;
    s.mean_error = me.mean;
    s.cov_error = me.cov;
    s.energy_distance = energy_distance(out.samples, oracle);
    s.observed_mse = observed_mse(out.samples, problem.op(), problem.y());
    s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

int run_experiment(const ExperimentConfig& config, const RunOptions& options, std::ostream& log) {
    std::vector<std::string> methods = options.methods;
    if (methods.empty())
        for (const auto& m : config.methods) methods.push_back(m.name);
    for (const auto& m : methods) (void)config.method(m);
    const std::vector<std::uint64_t> seeds = options.seeds.empty() ? config.seeds : options.seeds;
    const std::filesystem::path root = options.output_root.empty() ? config.output_dir : options.output_root;
    if (root.empty()) throw ConfigError("no output directory: set output_dir in the config or pass --out");

    struct Job {
        std::string method;
        std::uint64_t seed;
        std::filesystem::path dir;
    };
    std::vector<Job> jobs;
    for (const auto& m : methods) {
        for (auto seed : seeds) {
            Job j{m, seed, root / m / ("seed-" + std::to_string(seed))};
            if (std::filesystem::exists(j.dir / "summary.json") && !options.force)
                throw ConfigError("run directory '" + j.dir.string() + "' already holds results; pass --force to overwrite");
            jobs.push_back(std::move(j));
        }
    }

    const Problem problem(config);
    const SampleSet reference = problem.truth().dim() == 2
                                    ? sample(problem.truth(), std::min<std::size_t>(config.oracle_samples, 1000), 0)
                                    : SampleSet{};
    std::atomic<std::size_t> next{0};
    std::atomic<int> failures{0};
    std::mutex log_mutex;
    std::vector<std::string> messages(jobs.size());

    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const Job& job = jobs[i];
            std::filesystem::create_directories(job.dir);
            std::filesystem::remove(job.dir / "error.txt");
            try {
                const RunOutput r = run_single(config, problem, config.method(job.method), job.seed);
                write_samples(job.dir / "samples.bin", r.samples, r.summary.config_hash);
                if (!r.trace.empty()) {
                    std::ofstream t(job.dir / "trace.csv");
                    write_trace_csv(t, r.trace);
                } else if (!r.reddiff_trace.empty()) {
                    std::ofstream t(job.dir / "trace.csv");
                    write_reddiff_trace_csv(t, r.reddiff_trace);
                }
                write_text(job.dir / "summary.json", summary_json(r.summary));
                ojson timing;
                timing["wall_seconds"] = r.summary.wall_seconds;
                write_text(job.dir / "timing.json", timing.dump(2) + "\n");
                if (!reference.empty())
                    write_text(job.dir / "scatter.svg",
                               scatter_svg(reference, r.samples, problem.op(), problem.y(),
                                           job.method + " seed " + std::to_string(job.seed)));
                std::ostringstream os;
                os << job.method << " seed " << job.seed << ": tv=" << r.summary.mode_tv
                   << " energy=" << r.summary.energy_distance << " observed_mse=" << r.summary.observed_mse;
                messages[i] = os.str();
            } catch (const std::exception& e) {
                ++failures;
                std::filesystem::remove(job.dir / "summary.json");
                const std::string msg = job.method + " seed " + std::to_string(job.seed) + " failed: " + e.what();
                write_text(job.dir / "error.txt", msg + "\n");
                messages[i] = msg;
            }
            const std::lock_guard<std::mutex> lock(log_mutex);
            log << messages[i] << '\n';
        }
    };

    const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return failures;
}

std::string summary_json(const RunSummary& s) {
    ojson j;
    j["method"] = s.method;
    j["seed"] = s.seed;
    j["config_hash"] = hash_hex(s.config_hash);
    j["problem_hash"] = hash_hex(s.problem_hash);
    j["samples"] = s.samples;
    j["mode_frequencies"] = s.mode_frequencies;
    j["mode_tv"] = s.mode_tv;
    j["mean_error"] = s.mean_error;
    j["cov_error"] = s.cov_error;
    j["energy_distance"] = s.energy_distance;
    j["observed_mse"] = s.observed_mse;
    j["denoiser_calls"] = s.denoiser_calls;
    j["final_loss"] = s.final_loss;
    return j.dump(2) + "\n";
}

RunSummary parse_summary_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    RunSummary s;
    s.method = j.at("method").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    s.problem_hash = std::stoull(j.at("problem_hash").get<std::string>(), nullptr, 16);
    s.samples = j.at("samples").get<std::size_t>();
    s.mode_frequencies = j.at("mode_frequencies").get<std::vector<double>>();
    s.mode_tv = j.at("mode_tv").get<double>();
    s.mean_error = j.at("mean_error").get<double>();
    s.cov_error = j.at("cov_error").get<double>();
    s.energy_distance = j.at("energy_distance").get<double>();
    s.observed_mse = j.at("observed_mse").get<double>();
    s.denoiser_calls = j.at("denoiser_calls").get<double>();
    s.final_loss = j.at("final_loss").get<double>();
    return s;
}

CompareResult compare_runs(const std::vector<std::filesystem::path>& dirs, bool force) {
    CompareResult result;
    for (const auto& dir : dirs) {
        if (!std::filesystem::is_directory(dir)) {
            result.skipped.push_back(dir);
            continue;
        }
        std::vector<std::filesystem::path> run_dirs;
        if (std::filesystem::exists(dir / "summary.json") || std::filesystem::exists(dir / "error.txt"))
            run_dirs.push_back(dir);
        for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
            if (!e.is_directory()) continue;
            const auto name = e.path().filename().string();
            if (name.rfind("seed-", 0) == 0) run_dirs.push_back(e.path());
        }
        std::sort(run_dirs.begin(), run_dirs.end());
        for (const auto& rd : run_dirs) {
            try {
                result.summaries.push_back(parse_summary_json(read_text(rd / "summary.json")));
            } catch (const std::exception&) {
                result.skipped.push_back(rd);
            }
        }
    }
    if (!force) {
        for (const auto& s : result.summaries) {
            if (s.problem_hash != result.summaries.front().problem_hash)
                throw ConfigError("runs come from different problems (hash " + hash_hex(s.problem_hash) + " vs " +
                                  hash_hex(result.summaries.front().problem_hash) + "); pass --force to aggregate anyway");
        }
    }
    std::map<std::string, std::vector<const RunSummary*>> groups;
    for (const auto& s : result.summaries) groups[s.method].push_back(&s);
    auto stats = [](const std::vector<const RunSummary*>& g, auto field, double& mean, double& sd) {
        mean = 0.0;
        for (const auto* s : g) mean += field(*s);
        mean /= static_cast<double>(g.size());
        double ss = 0.0;
        for (const auto* s : g) ss += std::pow(field(*s) - mean, 2);
        sd = g.size() > 1 ? std::sqrt(ss / static_cast<double>(g.size() - 1)) : 0.0;
    };
    for (const auto& [method, g] : groups) {
        CompareRow r;
        r.method = method;
        r.runs = g.size();
        double unused = 0.0;
        stats(g, [](const RunSummary& s) { return s.mode_tv; }, r.tv_mean, r.tv_std);
        stats(g, [](const RunSummary& s) { return s.mean_error; }, r.mean_error_mean, r.mean_error_std);
        stats(g, [](const RunSummary& s) { return s.cov_error; }, r.cov_error_mean, r.cov_error_std);
        stats(g, [](const RunSummary& s) { return s.energy_distance; }, r.energy_mean, r.energy_std);
        stats(g, [](const RunSummary& s) { return s.observed_mse; }, r.observed_mse_mean, r.observed_mse_std);
        stats(g, [](const RunSummary& s) { return s.denoiser_calls; }, r.calls_mean, unused);
        result.rows.push_back(r);
    }
    return result;
}

void write_compare_csv(const CompareResult& result, std::ostream& os) {
    os << "method,runs,mode_tv_mean,mode_tv_std,mean_error_mean,mean_error_std,cov_error_mean,cov_error_std,"
          "energy_distance_mean,energy_distance_std,observed_mse_mean,observed_mse_std,denoiser_calls_mean\n";
    const auto old = os.precision(10);
    for (const auto& r : result.rows) {
        os << r.method << ',' << r.runs << ',' << r.tv_mean << ',' << r.tv_std << ',' << r.mean_error_mean << ','
           << r.mean_error_std << ',' << r.cov_error_mean << ',' << r.cov_error_std << ',' << r.energy_mean << ','
           << r.energy_std << ',' << r.observed_mse_mean << ',' << r.observed_mse_std << ',' << r.calls_mean << '\n';
    }
    os.precision(old);
}

std::string posterior_json(const GmmPosterior& p) {
    ojson j;
    j["weights"] = p.weights;
    j["means"] = ojson::array();
    j["covariances"] = ojson::array();
    for (std::size_t k = 0; k < p.components(); ++k) {
        j["means"].push_back(std::vector<double>(p.means[k].begin(), p.means[k].end()));
        ojson rows = ojson::array();
        for (Eigen::Index r = 0; r < p.covs[k].rows(); ++r) {
            const Vec row = p.covs[k].row(r).transpose();
            rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
        j["covariances"].push_back(rows);
    }
    const Vec m = p.mean();
    j["mean"] = std::vector<double>(m.begin(), m.end());
    return j.dump(2) + "\n";
}

} // namespace vipaint
