// Serial reference against the OpenMP kernels on the two-visit trial.

#include "mrsurv/estimate.hpp"
#include "mrsurv/nuisance.hpp"
#include "mrsurv/pseudo.hpp"
#include "mrsurv/simulate.hpp"

#include <benchmark/benchmark.h>

#include <algorithm>

using namespace mrsurv;

namespace {

struct Fixture {
    Dataset data;
    PanelRows rows;
    std::vector<FoldModels> models;
    VisitSchedule schedule;

    explicit Fixture(std::size_t n)
        : data(generate(find_dgp(kTwoVisitTrial), n, 5)),
          schedule(find_dgp(kTwoVisitTrial).visit_times, 0, {20.0, 30.0, 40.0, 50.0, 60.0}) {
        const int folds = 5;
        rows.data.start = 0.0;
        rows.data.end = 30.0;
        rows.data.history_dim = 3;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& r = data.records[i];
            rows.data.push(*r.covariates[0], std::min(r.followup, 30.0), r.followup <= 30.0 && r.event, 1.0);
            rows.subject.push_back(i);
            rows.fold.push_back(static_cast<int>(i % folds));
        }
        WindowData censor = rows.data;
        for (std::size_t i = 0; i < censor.size(); ++i)
            censor.flag[i] = data.records[i].followup <= 30.0 && !data.records[i].event;
        const auto features = build_feature_map({}, data.schema, 0);
        for (int f = 0; f < folds; ++f)
            models.push_back({fit_cox_breslow(rows.data, features), fit_cox_breslow(censor, features)});
    }
};

const Fixture& fixture(std::size_t n) {
    static Fixture small(1000), large(8000);
    return n <= 1000 ? small : large;
}

void panels(benchmark::State& state, Execution execution) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    const std::vector<EstimatorKind> kinds{EstimatorKind::MR, EstimatorKind::G, EstimatorKind::IPCW};
    const std::vector<double> taus{20.0, 30.0, 40.0, 50.0, 60.0};
    for (auto _ : state)
        benchmark::DoNotOptimize(compute_panels(f.rows, f.models, f.schedule, kinds, taus, 0.05, execution));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void estimation(benchmark::State& state, Execution execution) {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const Dataset data = generate(dgp, static_cast<std::size_t>(state.range(0)), 6);
    RunConfig c;
    c.schedule = VisitSchedule(dgp.visit_times, 0, {40.0, 50.0, 60.0});
    c.schema = dgp.schema;
    c.nuisance.event.assign(2, parse_model_choice("cox"));
    c.nuisance.censor.assign(2, parse_model_choice("cox"));
    c.w = {{"L11", "L12", "L13"}, 2, false};
    c.estimators = {EstimatorKind::MR, EstimatorKind::G, EstimatorKind::IPCW};
    for (auto _ : state) benchmark::DoNotOptimize(run_estimation(data, c, execution));
}

}  // namespace

BENCHMARK_CAPTURE(panels, serial, Execution::Serial)->Arg(1000)->Arg(8000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(panels, parallel, Execution::Parallel)->Arg(1000)->Arg(8000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(estimation, serial, Execution::Serial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(estimation, parallel, Execution::Parallel)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
