// Command-line front end: run experiments, aggregate results, train denoisers, dump oracles.
#include <cstdlib>
#include <sstream>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "vipaint/harness.hpp"

namespace {

using namespace vipaint;

std::filesystem::path default_output_root(const ExperimentConfig& config) {
    if (!config.output_dir.empty()) return config.output_dir;
    if (const char* env = std::getenv("VIPAINT_OUT"); env && *env) return std::filesystem::path(env) / config.name;
    return std::filesystem::path("runs") / config.name;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, ',');)
        if (!part.empty()) out.push_back(part);
    return out;
}

int cmd_run(const std::string& config_path, const std::string& methods, const std::string& seeds,
            const std::string& out, std::size_t threads, bool force) {
    const ExperimentConfig config = load_config(config_path);
    RunOptions opt;
    opt.methods = split_commas(methods);
    if (!seeds.empty()) opt.seeds = parse_seed_list(seeds);
    opt.output_root = out.empty() ? default_output_root(config) : std::filesystem::path(out);
    opt.threads = threads;
    opt.force = force;
    const int failed = run_experiment(config, opt, std::cout);
    std::cout << "results in " << opt.output_root.string() << '\n';
    if (failed > 0) std::cerr << failed << " run(s) failed; see error.txt in the run directories\n";
    return failed > 0 ? 1 : 0;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out, bool force) {
    std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
    const CompareResult r = compare_runs(paths, force);
    for (const auto& s : r.skipped) std::cerr << "skipped (missing or partial run): " << s.string() << '\n';
    if (out.empty()) {
        write_compare_csv(r, std::cout);
    } else {
        std::ofstream f(out);
        write_compare_csv(r, f);
        std::cout << "wrote " << out << '\n';
    }
    return r.rows.empty() ? 1 : 0;
}

int cmd_train(const std::string& config_path, bool force) {
    const ExperimentConfig config = load_config(config_path);
    if (!config.prior.mlp) throw ConfigError("config prior is not an MLP prior; nothing to train");
    const MlpPriorSpec& spec = *config.prior.mlp;
    if (std::filesystem::exists(spec.weights_path) && !force)
        throw ConfigError("weights '" + spec.weights_path.string() + "' exist; pass --force to retrain");
    const SampleSet data = sample(config.prior.gmm, spec.train_samples, spec.data_seed);
    const MlpDenoiser init(config.prior.gmm.dim(), config.schedule.build(), spec.architecture, spec.training.seed);
    const MlpTrainResult r = train_mlp(init, data, spec.training);
    if (spec.weights_path.has_parent_path()) std::filesystem::create_directories(spec.weights_path.parent_path());
    r.model.save(spec.weights_path.string());
    std::ofstream trace(spec.weights_path.string() + ".loss.csv");
    trace << "step,loss\n";
    for (std::size_t i = 0; i < r.loss_trace.size(); ++i) trace << i << ',' << r.loss_trace[i] << '\n';
    const GmmDenoiser optimal(config.prior.gmm, config.schedule.build());
    std::cout << "trained " << spec.training.steps << " steps; held-out loss "
              << denoising_loss(r.model, data, 4096, 1) << " (optimal " << denoising_loss(optimal, data, 4096, 1)
              << ")\nwrote " << spec.weights_path.string() << '\n';
    return 0;
}

int cmd_oracle(const std::string& config_path, const std::string& out, std::size_t n, std::uint64_t seed) {
    const ExperimentConfig config = load_config(config_path);
    const MeasurementOp op = build_operator(config.op, config.prior.gmm);
    const GmmPosterior post = exact_posterior(config.prior.gmm, op, config.y);
    if (out.empty()) {
        std::cout << posterior_json(post);
    } else {
        std::ofstream(out) << posterior_json(post);
        std::cout << "wrote " << out << '\n';
    }
    if (n > 0) {
        const std::string path = (out.empty() ? std::string("oracle") : out) + ".samples.bin";
        write_samples(path, sample(post, n, seed), config.problem_hash());
        std::cout << "wrote " << path << '\n';
    }
    return 0;
}

int cmd_selfcheck() {
    bool ok = true;
    for (const auto& r : run_selfcheck()) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational inpainting with diffusion priors on small exact-oracle problems"};
    app.require_subcommand(1);

    std::string config, methods, seeds, out;
    std::size_t threads = 1;
    bool force = false;

    auto* run = app.add_subcommand("run", "Run the configured methods for each seed");
    run->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--method", methods, "Comma-separated methods (default: all configured)");
    run->add_option("--seeds", seeds, "Seed list, e.g. 0..9 or 1,3,5 (default: config seeds)");
    run->add_option("--out", out, "Output root (default: config output_dir, then $VIPAINT_OUT/<name>)");
    run->add_option("--threads", threads, "Parallel runs")->check(CLI::PositiveNumber);
    run->add_flag("--force", force, "Overwrite existing results");

    std::vector<std::string> dirs;
    auto* cmp = app.add_subcommand("compare", "Aggregate run summaries into a CSV table");
    cmp->add_option("dirs", dirs, "Run directories")->required();
    cmp->add_option("--out", out, "CSV output path (default: stdout)");
    cmp->add_flag("--force", force, "Aggregate runs of different problems");

    auto* train = app.add_subcommand("train-denoiser", "Train the MLP denoiser named by a config");
    train->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_flag("--force", force, "Overwrite existing weights");

    std::size_t oracle_n = 0;
    std::uint64_t oracle_seed = 0;
    auto* oracle = app.add_subcommand("oracle", "Dump the exact posterior of a config");
    oracle->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    oracle->add_option("--out", out, "JSON output path (default: stdout)");
    oracle->add_option("--samples", oracle_n, "Also write this many posterior samples");
    oracle->add_option("--seed", oracle_seed, "Seed for posterior samples");

    auto* self = app.add_subcommand("selfcheck", "Run the built-in invariant suite");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config, methods, seeds, out, threads, force);
        if (*cmp) return cmd_compare(dirs, out, force);
        if (*train) return cmd_train(config, force);
        if (*oracle) return cmd_oracle(config, out, oracle_n, oracle_seed);
        if (*self) return cmd_selfcheck();
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
