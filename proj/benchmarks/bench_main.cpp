#include <benchmark/benchmark.h>

#include "vipaint/baselines.hpp"
#include "vipaint/metrics.hpp"
#include "vipaint/mlp.hpp"
#include "vipaint/random.hpp"
#include "vipaint/vipaint.hpp"

using namespace vipaint;

namespace {

GmmPrior mixture(Eigen::Index dim, std::size_t components) {
    Rng rng(0, "bench-prior");
    GmmPrior p;
    for (std::size_t k = 0; k < components; ++k) {
        p.weights.push_back(1.0 / static_cast<double>(components));
        p.means.push_back(rng.normal_vec(dim));
        p.covs.push_back(Vec::Constant(dim, 0.1));
    }
    return p;
}

void BM_GmmEpsHat(benchmark::State& state) {
    const auto dim = static_cast<Eigen::Index>(state.range(0));
    const GmmDenoiser den(mixture(dim, 8), NoiseSchedule::ve());
    const Vec z = Vec::Ones(dim);
    for (auto _ : state) benchmark::DoNotOptimize(den.eps_hat(z, 3.0));
}
BENCHMARK(BM_GmmEpsHat)->Arg(2)->Arg(16)->Arg(64);

void BM_GmmVjp(benchmark::State& state) {
    const auto dim = static_cast<Eigen::Index>(state.range(0));
    const GmmDenoiser den(mixture(dim, 8), NoiseSchedule::ve());
    const Vec z = Vec::Ones(dim);
    for (auto _ : state) benchmark::DoNotOptimize(den.vjp(z, 3.0, z));
}
BENCHMARK(BM_GmmVjp)->Arg(2)->Arg(16)->Arg(64);

void BM_MlpForwardBatch(benchmark::State& state) {
    const MlpDenoiser net(2, NoiseSchedule::ve());
    const auto batch = static_cast<Eigen::Index>(state.range(0));
    const Mat z = Mat::Ones(2, batch);
    const Vec t = Vec::Constant(batch, 2.0);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(z, t));
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBatch)->Arg(1)->Arg(128);

void BM_MlpVjp(benchmark::State& state) {
    const MlpDenoiser net(2, NoiseSchedule::ve());
    const Vec z = Vec::Ones(2);
    for (auto _ : state) benchmark::DoNotOptimize(net.vjp(z, 2.0, z));
}
BENCHMARK(BM_MlpVjp);

void BM_VipaintLossGrad(benchmark::State& state) {
    const auto dim = static_cast<Eigen::Index>(state.range(0));
    const NoiseSchedule sched = NoiseSchedule::ve();
    const GmmDenoiser den(mixture(dim, 2), sched);
    const MeasurementOp op = MeasurementOp::downsample({static_cast<std::size_t>(dim) / 4, 4}, 2, 0.05);
    const InverseProblem prob{den, op, Vec::Zero(static_cast<Eigen::Index>(op.output_dim()))};
    const VipaintConfig cfg = VipaintConfig::defaults(sched, static_cast<std::size_t>(state.range(1)));
    const VipaintParams p = init_params(cfg, sched, op.fill(prob.y), 0);
    for (auto _ : state) benchmark::DoNotOptimize(loss_grad(p, cfg, prob, cfg.mc_samples, 0));
}
BENCHMARK(BM_VipaintLossGrad)->Args({16, 2})->Args({16, 4})->Args({64, 4});

void BM_DpsSample(benchmark::State& state) {
    const NoiseSchedule sched = NoiseSchedule::ve();
    const GmmDenoiser den(mixture(2, 2), sched);
    const MeasurementOp op = MeasurementOp::mask({0, 1}, 0.05);
    const InverseProblem prob{den, op, Vec::Zero(1)};
    BaselineConfig cfg = BaselineConfig::defaults(BaselineMethod::DPS, ScheduleKind::VE);
    cfg.zeta = 0.5;
    for (auto _ : state) benchmark::DoNotOptimize(dps_sample(prob, cfg, 1, 0));
}
BENCHMARK(BM_DpsSample)->Unit(benchmark::kMillisecond);

void BM_EnergyDistance(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const GmmPrior p = mixture(2, 2);
    const SampleSet a = sample(p, n, 1), b = sample(p, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(energy_distance(a, b));
}
BENCHMARK(BM_EnergyDistance)->Arg(200)->Arg(2000);

} // namespace

BENCHMARK_MAIN();
