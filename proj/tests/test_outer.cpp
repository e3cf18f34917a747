#include "bosvs/bench.hpp"
#include "bosvs/errors.hpp"
#include "bosvs/outer.hpp"
#include "bosvs/prox.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <memory>
#include <sstream>

using namespace bosvs;

namespace {

LassoData small_lasso(std::uint64_t seed) {
    LassoInstance cfg;
    cfg.rows = 15;
    cfg.cols = 20;
    cfg.sparsity = 4;
    cfg.seed = seed;
    return make_lasso_data(cfg);
}

BackSubMatrices back_sub_for(const Problem& p) {
    std::vector<LinOpPtr> trailing;
    for (std::size_t i = 1; i < p.num_blocks(); ++i) {
        trailing.push_back(p.block(i).A);
    }
    return assemble_back_sub(trailing);
}

Problem random_three_block(std::mt19937_64& rng) {
    auto a1 = std::make_shared<DenseOp>(oracle::random_matrix(6, 3, rng));
    auto a2 = std::make_shared<DenseOp>(oracle::random_matrix(6, 2, rng));
    auto a3 = std::make_shared<DenseOp>(oracle::random_matrix(6, 4, rng));
    auto z = std::make_shared<ZeroSmooth>();
    auto h = std::make_shared<ZeroNonsmooth>();
    return Problem({{a1, z, h}, {a2, z, h}, {a3, z, h}}, oracle::random_vector(6, rng));
}

std::string csv_without_time(const std::vector<TraceRecord>& trace, std::size_t m) {
    std::ostringstream os;
    write_trace_csv(os, trace, m);
    std::istringstream is(os.str());
    std::string line;
    std::string out;
    while (std::getline(is, line)) {
        const auto a = line.find(',');
        const auto b = line.find(',', a + 1);
        out += line.substr(0, a) + line.substr(b) + "\n";
    }
    return out;
}

}  // namespace

TEST(ErrorMeasure, HandExamples) {
    auto eye = std::make_shared<EmbeddedIdentityOp>(2, 2, 0, 1.0);
    auto neg = std::make_shared<EmbeddedIdentityOp>(2, 2, 0, -1.0);
    auto z0 = std::make_shared<ZeroSmooth>();
    auto h0 = std::make_shared<ZeroNonsmooth>();
    const Problem p({{eye, z0, h0}, {neg, z0, h0}}, Vector::Zero(2));
    Vector z(4);
    Vector y(4);
    z << 1.0, 1.0, 1.0, 1.0;
    y << 9.0, 9.0, 1.0, 1.0;
    const std::vector<double> r0{0.0, 0.0};
    EXPECT_EQ(error_measure({1.0, 1.0, 1.0}, z, y, r0, p), 0.0);
    // ||z+ - y+|| = 3, ||Az - b|| = 4, sum r = 25
    z << 5.0, 0.0, 1.0, 0.0;
    y << 0.0, 0.0, 1.0, -3.0;
    const std::vector<double> r{16.0, 9.0};
    EXPECT_DOUBLE_EQ(error_measure({1.0, 1.0, 1.0}, z, y, r, p), 12.0);
    EXPECT_THROW(error_measure({1.0, 1.0, 1.0}, z, y, std::vector<double>{-1.0, 0.0}, p), InvalidArgument);
}

TEST(ErrorMeasure, BenchmarkWeightsMatchRecomputation) {
    std::mt19937_64 rng(1);
    const Problem p = random_three_block(rng);
    OuterParams params;
    params.rho = 5e-4;
    params.use_benchmark_thetas();
    const Vector z = oracle::random_vector(9, rng);
    const Vector y = oracle::random_vector(9, rng);
    const std::vector<double> r{0.3, 0.1, 2.0};
    const double expected = 1e-6 * std::sqrt(5e-4) * (z.tail(6) - y.tail(6)).norm() +
                            std::sqrt(5e-4) * p.residual(z).norm() +
                            1e-6 * std::sqrt(1e-5 / (1.0 - 0.999)) * std::sqrt(2.4);
    EXPECT_NEAR(error_measure(params.theta, z, y, r, p), expected, 1e-14 * expected);
}

TEST(Energy, ZeroAtReferenceAndMatchesDenseForm) {
    std::mt19937_64 rng(2);
    const Problem p = random_three_block(rng);
    const BackSubMatrices bs = back_sub_for(p);
    const Reference ref{oracle::random_vector(9, rng), oracle::random_vector(6, rng)};
    const std::vector<double> w{0.5, 2.0, 0.0};
    EXPECT_EQ(energy_E(p, ref.x, ref.x, ref.lambda, w, 1.3, 0.9, &ref, bs), 0.0);

    const Vector x = oracle::random_vector(9, rng);
    const Vector y = oracle::random_vector(9, rng);
    const Vector lam = oracle::random_vector(6, rng);
    Matrix a2 = oracle::materialize(*p.block(1).A);
    Matrix a3 = oracle::materialize(*p.block(2).A);
    Matrix m = Matrix::Zero(6, 6);
    m.block(0, 0, 2, 2) = a2.transpose() * a2;
    m.block(2, 0, 4, 2) = a3.transpose() * a2;
    m.block(2, 2, 4, 4) = a3.transpose() * a3;
    Matrix h = Matrix::Zero(6, 6);
    h.block(0, 0, 2, 2) = m.block(0, 0, 2, 2);
    h.block(2, 2, 4, 4) = m.block(2, 2, 4, 4);
    const Vector dy = y.tail(6) - ref.x.tail(6);
    const double expected = 1.3 * dy.dot(m * h.inverse() * m.transpose() * dy) + (lam - ref.lambda).squaredNorm() / 1.3 +
                            0.9 * (0.5 * (x.head(3) - ref.x.head(3)).squaredNorm() +
                                   2.0 * (x.segment(3, 2) - ref.x.segment(3, 2)).squaredNorm());
    EXPECT_NEAR(energy_E(p, x, y, lam, w, 1.3, 0.9, &ref, bs), expected, 1e-9 * expected);
    EXPECT_THROW(energy_E(p, x, y, lam, w, 1.3, 0.9, nullptr, bs), MissingReference);
}

TEST(Energy, IdentityBackSubReducesToPlainNorm) {
    const LassoData d = small_lasso(3);
    const Problem p = make_lasso(d, 0.1);
    const BackSubMatrices bs = back_sub_for(p);
    std::mt19937_64 rng(3);
    const Reference ref{oracle::random_vector(40, rng), Vector::Zero(20)};
    const Vector y = oracle::random_vector(40, rng);
    const std::vector<double> w{0.0, 0.0};
    EXPECT_NEAR(energy_E(p, ref.x, y, ref.lambda, w, 2.0, 0.5, &ref, bs),
                2.0 * (y.tail(20) - ref.x.tail(20)).squaredNorm(), 1e-12);
}

TEST(OuterStep, FirstLassoStepMatchesHandComputation) {
    const LassoData d = small_lasso(4);
    const double beta = 0.1;
    const Problem p = make_lasso(d, beta);
    OuterParams params;
    params.schemes = {Scheme::Generalized};
    params.rho = 0.7;
    params.alpha = 0.8;
    const double zeta = (d.F.transpose() * d.F).eigenvalues().real().maxCoeff();
    params.line_search.delta_min = 2.0 * zeta;  // first trial accepted for both blocks
    const BackSubMatrices bs = back_sub_for(p);
    const Workspace ws(p);
    const OuterState s = OuterState::initial(p, params.line_search);
    const StepOutput out = outer_step(p, s, params, bs, ws);

    const double delta = params.line_search.delta_min;
    const double rho = params.rho;
    const Vector u = d.F.transpose() * d.f / (delta + rho);
    Vector z(20);
    for (Index j = 0; j < 20; ++j) {
        const double v = rho * u[j] / (delta + rho);
        const double t = beta / (delta + rho);
        z[j] = std::abs(v) > t ? v - std::copysign(t, v) : 0.0;
    }
    EXPECT_LE((out.state.z.head(20) - u).norm(), 1e-14);
    EXPECT_LE((out.state.z.tail(20) - z).norm(), 1e-14);
    EXPECT_LE((out.state.lambda - params.alpha * rho * (u - z)).norm(), 1e-14);
    EXPECT_LE((out.state.y.tail(20) - params.alpha * z).norm(), 1e-14);
    EXPECT_LE((out.state.y.head(20) - u).norm(), 0.0);
    EXPECT_EQ(out.state.k, 2);
}

TEST(OuterStep, MultiplierUsesAveragedIterate) {
    const LassoData d = small_lasso(5);
    const Problem p = make_lasso(d, 0.05);
    OuterParams params;
    params.schemes = {Scheme::Multistep};
    params.relax = RelaxationParams::relaxed();
    const BackSubMatrices bs = back_sub_for(p);
    const Workspace ws(p);
    OuterState s = OuterState::initial(p, params.line_search);
    for (int k = 0; k < 5; ++k) {
        const StepOutput out = outer_step(p, s, params, bs, ws);
        const Vector expected = s.lambda + params.alpha * params.rho * p.residual(out.state.z);
        EXPECT_LE((out.state.lambda - expected).norm(), 1e-14 * std::max(1.0, expected.norm()));
        s = out.state;
    }
}

TEST(OuterStep, KktStartIsFixedPoint) {
    const LassoData d = small_lasso(6);
    const double beta = 0.1;
    const Problem p = make_lasso(d, beta);
    const Vector u = oracle::lasso_polish(d.F, d.f, beta, ista_oracle(d.F, d.f, beta, 1e-13));
    Vector x(40);
    x << u, u;
    const Vector lam = d.F.transpose() * (d.f - d.F * u);
    ASSERT_LE(kkt_residual(p, x, lam).aggregate, 1e-12);

    OuterParams params;
    params.schemes = {Scheme::Generalized};
    const BackSubMatrices bs = back_sub_for(p);
    const Workspace ws(p);
    OuterState s = OuterState::initial(p, x, lam, params.line_search);
    const StepOutput out = outer_step(p, s, params, bs, ws);
    EXPECT_LE(out.record.e_k, 1e-10);
    EXPECT_LE((out.state.x - x).norm(), 1e-10);
    EXPECT_LE((out.state.y - x).norm(), 1e-10);
    EXPECT_LE((out.state.lambda - lam).norm(), 1e-10);
}

TEST(Solve, TrivialProblemConvergesImmediately) {
    auto eye = std::make_shared<EmbeddedIdentityOp>(3, 3, 0, 1.0);
    const Problem p({{eye, std::make_shared<ZeroSmooth>(), std::make_shared<ZeroNonsmooth>()}}, Vector::Zero(3));
    OuterParams params;
    params.stop_tol = 0.0;
    const SolveResult r = solve(p, params);
    EXPECT_EQ(r.status, SolveStatus::Converged);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_EQ(r.trace.front().e_k, 0.0);
}

TEST(Solve, LassoMatchesIstaForEveryScheme) {
    const LassoData d = small_lasso(7);
    const double beta = 0.1;
    const Problem p = make_lasso(d, beta);
    const double phi_star = oracle::lasso_objective(d.F, d.f, beta, ista_oracle(d.F, d.f, beta, 1e-13));
    for (Scheme s : {Scheme::Generalized, Scheme::Multistep, Scheme::Accelerated, Scheme::Exact}) {
        OuterParams params;
        params.schemes = {s};
        params.relax.stopping = true;
        params.stop_tol = 1e-11;
        params.exact_cg_tol = 1e-13;
        params.max_outer_iters = 20000;
        const SolveResult r = solve(p, params);
        EXPECT_EQ(r.status, SolveStatus::Converged) << to_string(s);
        EXPECT_LE(std::abs(r.objective - phi_star) / phi_star, 1e-8) << to_string(s);
    }
}

TEST(Solve, StatusesAndCallbacks) {
    const LassoData d = small_lasso(8);
    const Problem p = make_lasso(d, 0.1);
    OuterParams params;
    params.max_outer_iters = 3;
    params.stop_tol = 0.0;
    long seen = 0;
    SolveCallbacks cb;
    cb.on_iteration = [&](const TraceRecord& rec, const OuterState& st) {
        ++seen;
        EXPECT_EQ(st.k, rec.k + 1);
    };
    SolveResult r = solve(p, params, std::nullopt, std::nullopt, cb);
    EXPECT_EQ(r.status, SolveStatus::MaxItersReached);
    EXPECT_EQ(r.iterations, 3);
    EXPECT_EQ(seen, 3);
    EXPECT_EQ(exit_code_for(r.status), 2);

    params.max_outer_iters = 100;
    cb.should_stop = [](const TraceRecord& rec) { return rec.k == 5; };
    r = solve(p, params, std::nullopt, std::nullopt, cb);
    EXPECT_EQ(r.status, SolveStatus::Stopped);
    EXPECT_EQ(r.iterations, 5);
    EXPECT_EQ(r.x, r.final_state.z);
}

TEST(Solve, TimeIsNondecreasingAndErrorNonnegative) {
    const Problem p = make_lasso(small_lasso(9), 0.1);
    OuterParams params;
    params.max_outer_iters = 50;
    const SolveResult r = solve(p, params);
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        EXPECT_GE(r.trace[i].time_s, r.trace[i - 1].time_s);
        EXPECT_GE(r.trace[i].e_k, 0.0);
    }
}

TEST(Solve, StrictModeGammaIsNondecreasing) {
    const Problem p = make_lasso(small_lasso(10), 0.1);
    for (Scheme s : {Scheme::Multistep, Scheme::Accelerated}) {
        OuterParams params;
        params.schemes = {s};
        params.max_outer_iters = 60;
        const SolveResult r = solve(p, params);
        for (std::size_t k = 1; k < r.trace.size(); ++k) {
            for (std::size_t i = 0; i < 2; ++i) {
                EXPECT_GE(r.trace[k].gammas[i], r.trace[k - 1].gammas[i]) << to_string(s) << " k=" << k;
            }
        }
    }
}

TEST(Solve, DeterministicTrace) {
    const Problem p = make_lasso(small_lasso(11), 0.1);
    OuterParams params;
    params.schemes = {Scheme::Multistep};
    params.relax = RelaxationParams::relaxed();
    params.max_outer_iters = 80;
    const SolveResult a = solve(p, params);
    const SolveResult b = solve(p, params);
    EXPECT_EQ(csv_without_time(a.trace, 2), csv_without_time(b.trace, 2));
    EXPECT_EQ(a.x, b.x);
}

TEST(Trace, CsvHeaderAndEmptyEnergy) {
    TraceRecord rec;
    rec.k = 1;
    rec.inner_iters = {2, 3};
    rec.deltas = {0.5, 0.25};
    std::ostringstream os;
    write_trace_csv(os, std::vector<TraceRecord>{rec}, 2);
    std::istringstream is(os.str());
    std::string header;
    std::string row;
    std::getline(is, header);
    std::getline(is, row);
    EXPECT_EQ(header, "k,time_s,objective,e_k,primal_res,E_k,inner_iters_total,delta_1,delta_2");
    EXPECT_EQ(row, "1,0,0,0,0,,5,0.5,0.25");
}

TEST(Params, ValidationAndParsing) {
    OuterParams p;
    EXPECT_NO_THROW(p.validate(2));
    p.alpha = 1.0;
    EXPECT_THROW(p.validate(2), InvalidArgument);
    p = {};
    p.schemes = {Scheme::Exact, Scheme::Exact, Scheme::Exact};
    EXPECT_THROW(p.validate(2), InvalidArgument);
    p = {};
    p.theta = {1.0, 0.0, 1.0};
    EXPECT_THROW(p.validate(2), InvalidArgument);
    EXPECT_EQ(parse_scheme("multistep"), Scheme::Multistep);
    EXPECT_EQ(parse_schedule("constant"), AccelSchedule::Constant);
    EXPECT_THROW(parse_scheme("newton"), InvalidArgument);
    EXPECT_EQ(to_string(SolveStatus::MaxItersReached), "max_iters_reached");
}
