#include "bosvs/backsub.hpp"
#include "bosvs/bench.hpp"
#include "bosvs/outer.hpp"
#include "bosvs/subproblem.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace bosvs;

namespace {

Vector ramp(Index n) {
    return Vector::LinSpaced(n, -1.0, 1.0);
}

void BM_HaarApply(benchmark::State& state) {
    const Index side = state.range(0);
    const HaarOp op(side, side, 2);
    const Vector u = ramp(side * side);
    Vector out(side * side);
    for (auto _ : state) {
        op.apply(u, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_HaarApply)->Arg(32)->Arg(64)->Arg(256);

void BM_BlurApply(benchmark::State& state) {
    const Index side = state.range(0);
    const BlurOp op = BlurOp::uniform(side, side, 3);
    const Vector u = ramp(side * side);
    Vector out(side * side);
    for (auto _ : state) {
        op.apply(u, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_BlurApply)->Arg(32)->Arg(64)->Arg(256);

void BM_Diff2DAdjoint(benchmark::State& state) {
    const Index side = state.range(0);
    const Diff2DOp op(side, side);
    const Vector w = ramp(op.rows());
    Vector out(side * side);
    for (auto _ : state) {
        op.apply_adjoint(w, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Diff2DAdjoint)->Arg(32)->Arg(64)->Arg(256);

void BM_ImageBlockSubproblem(benchmark::State& state) {
    DeblurInstance cfg;
    cfg.rows = cfg.cols = state.range(0);
    const Problem p = make_deblur(cfg);
    const BlockSubproblem solver(p, 0);
    const Index n = p.block(0).A->cols();
    const Vector g = ramp(n);
    const Vector center = ramp(n).reverse();
    const Vector c = ramp(p.b().size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(solver.minimize(g, center, 0.3, c, cfg.rho));
    }
}
BENCHMARK(BM_ImageBlockSubproblem)->Arg(32)->Arg(64);

void BM_DeblurOuterStep(benchmark::State& state) {
    DeblurInstance cfg;
    cfg.rows = cfg.cols = 32;
    const Problem p = make_deblur(cfg);
    OuterParams params;
    params.rho = cfg.rho;
    params.use_benchmark_thetas();
    params.relax = RelaxationParams::relaxed();
    params.schemes = {static_cast<Scheme>(state.range(0))};
    std::vector<LinOpPtr> trailing{p.block(1).A, p.block(2).A};
    const BackSubMatrices bs = assemble_back_sub(trailing);
    const Workspace ws(p);
    // Warm the state so the measured steps run past the first-iteration special cases.
    OuterState s = OuterState::initial(p, params.line_search);
    for (int k = 0; k < 20; ++k) {
        s = outer_step(p, s, params, bs, ws).state;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(outer_step(p, s, params, bs, ws));
    }
    state.SetLabel(std::string(to_string(params.schemes.front())));
}
BENCHMARK(BM_DeblurOuterStep)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_LassoSolve(benchmark::State& state) {
    LassoInstance cfg;
    cfg.rows = 80;
    cfg.cols = 170;
    cfg.sparsity = 17;
    const Problem p = make_lasso(cfg);
    OuterParams params;
    params.schemes = {static_cast<Scheme>(state.range(0))};
    params.relax.stopping = true;
    params.stop_tol = 1e-9;
    params.exact_cg_tol = 1e-13;
    params.max_outer_iters = 20000;
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve(p, params));
    }
    state.SetLabel(std::string(to_string(params.schemes.front())));
}
BENCHMARK(BM_LassoSolve)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
