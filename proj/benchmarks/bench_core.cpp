#include "latent_rank/estimation.hpp"
#include "latent_rank/identification.hpp"
#include "latent_rank/jacobian.hpp"
#include "latent_rank/presets.hpp"
#include "latent_rank/simulation.hpp"

#include <benchmark/benchmark.h>

namespace latent_rank {
namespace {

SampleMoments population(const ModelSpec& spec, const Theta& theta) {
    SampleMoments m;
    const auto sigma = implied_sigma(spec, theta);
    for (std::size_t g = 0; g < spec.num_groups(); ++g) {
        m.covariances.push_back(unvech(sigma.segment(g), spec.num_observed(g)));
        m.sample_sizes.push_back(1000.0);
    }
    return m;
}

void BM_AnalyticJacobian(benchmark::State& state) {
    const auto spec = preset("sbmtmm");
    const auto theta = sbmtmm_population_theta(spec, 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(analytic_jacobian(spec, theta));
}
BENCHMARK(BM_AnalyticJacobian);

void BM_RankReport(benchmark::State& state) {
    const auto spec = preset("sbmtmm");
    const auto theta = sbmtmm_population_theta(spec, 0.0);
    for (auto _ : state) benchmark::DoNotOptimize(rank_report(spec, theta));
}
BENCHMARK(BM_RankReport);

void BM_Fit(benchmark::State& state) {
    const auto spec = preset("sbmtmm-pervar");
    const auto m = population(spec, sbmtmm_population_theta(spec, 0.2));
    FitConfig c;
    c.optimizer = static_cast<Optimizer>(state.range(0));
    if (c.optimizer == Optimizer::GradientDescent) {
        c.learning_rate = 1.0;
        c.max_iter = 200000;
    }
    for (auto _ : state) benchmark::DoNotOptimize(fit(spec, m, c));
}
BENCHMARK(BM_Fit)
    ->Arg(static_cast<int>(Optimizer::GradientDescent))
    ->Arg(static_cast<int>(Optimizer::FisherScoring))
    ->Arg(static_cast<int>(Optimizer::NewtonRaphson))
    ->Unit(benchmark::kMillisecond);

void BM_MvnSample(benchmark::State& state) {
    const auto pop = PopulationModel::sbmtmm(0.1);
    Rng rng(1);
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(mvn_sample(pop.sigma, n, rng));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MvnSample)->Arg(1000)->Arg(100000);

void BM_Replicate(benchmark::State& state) {
    auto c = default_sim_config(Experiment::SbMtmm);
    const auto spec = experiment_spec(Experiment::SbMtmm);
    const SimCondition cond{static_cast<std::size_t>(state.range(0)), 0.05};
    std::size_t rep = 0;
    for (auto _ : state) benchmark::DoNotOptimize(run_replicate(c, spec, cond, 0, rep++));
}
BENCHMARK(BM_Replicate)->Arg(1000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace latent_rank

BENCHMARK_MAIN();
