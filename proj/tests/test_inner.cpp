#include "bosvs/errors.hpp"
#include "bosvs/inner.hpp"
#include "bosvs/prox.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace bosvs;

namespace {

/// One block with f = 1/2 ||F u - f||^2, h = 0 and a general full-rank A, plus the dense
/// minimizer of the exact block objective.
struct QuadBlock {
    Matrix F;
    Vector f;
    Matrix A;
    Problem p;
    BlockSubproblem solver;
    BlockContext ctx;
    Vector x_bar;

    static QuadBlock make(std::uint64_t seed, NonsmoothPtr h = std::make_shared<ZeroNonsmooth>(),
                          bool identity_a = false) {
        std::mt19937_64 rng(seed);
        Matrix F = oracle::random_matrix(8, 5, rng);
        Vector f = oracle::random_vector(8, rng);
        Matrix A = identity_a ? Matrix(-Matrix::Identity(5, 5)) : oracle::random_matrix(7, 5, rng);
        return QuadBlock(std::move(F), std::move(f), std::move(A), std::move(h), rng);
    }

    QuadBlock(Matrix F_, Vector f_, Matrix A_, NonsmoothPtr h, std::mt19937_64& rng)
        : F(std::move(F_)),
          f(std::move(f_)),
          A(std::move(A_)),
          p({{std::make_shared<DenseOp>(A), std::make_shared<QuadraticLS>(std::make_shared<DenseOp>(F), f), h}},
            Vector::Zero(A.rows())),
          solver(p, 0) {
        ctx.problem = &p;
        ctx.solver = &solver;
        ctx.block = 0;
        ctx.k = 1;
        ctx.x_cur = oracle::random_vector(A.cols(), rng);
        ctx.b_ik = oracle::random_vector(A.rows(), rng);
        ctx.lambda = oracle::random_vector(A.rows(), rng);
        ctx.rho = 0.8;
        const Matrix sys = F.transpose() * F + ctx.rho * A.transpose() * A;
        x_bar = sys.ldlt().solve(F.transpose() * f + ctx.rho * A.transpose() * ctx.shifted_rhs());
    }

    double zeta() const { return *p.block(0).f->lipschitz(); }
    double L(const Vector& u) const { return L_i_k(p, 0, u, ctx.b_ik, ctx.lambda, ctx.rho); }
};

/// Forces exactly `n` inner iterations and records every step.
struct Recorder {
    long n;
    std::vector<InnerStepInfo> steps;
    std::vector<Vector> u;
    std::vector<Vector> a;

    InnerLoopOptions options() {
        InnerLoopOptions o;
        o.max_inner_iters = n + 5;
        o.observer = [this](const InnerStepInfo& s) {
            steps.push_back(s);
            u.push_back(*s.u);
            a.push_back(*s.a);
            return s.l < n;
        };
        return o;
    }
};

}  // namespace

TEST(Bb, QuotientOfQuadraticAndUndefinedForEqualPoints) {
    std::mt19937_64 rng(1);
    const Matrix F = oracle::random_matrix(6, 4, rng);
    const QuadraticLS q(std::make_shared<DenseOp>(F), Vector::Zero(6));
    const Vector x = oracle::random_vector(4, rng);
    const Vector y = oracle::random_vector(4, rng);
    const Vector d = x - y;
    EXPECT_NEAR(*bb_stepsize(q, x, y), d.dot(F.transpose() * F * d) / d.squaredNorm(), 1e-12);
    EXPECT_FALSE(bb_stepsize(q, x, x).has_value());
    EXPECT_THROW(bb_stepsize(q, x, Vector::Zero(3)), DimensionMismatch);
}

TEST(Bb, SafeguardClampsAndFirstIterationUsesDeltaMin) {
    QuadBlock qb = QuadBlock::make(2);
    LineSearchParams ls;
    BlockMemory mem;
    mem.delta_min = 0.25;
    const SmoothPart& f = *qb.p.block(0).f;
    EXPECT_EQ(safeguarded_bb(f, qb.ctx, mem, ls), 0.25);
    qb.ctx.k = 2;
    qb.ctx.x_prev = qb.ctx.x_cur + Vector::Constant(5, 0.1);
    const double s = *bb_stepsize(f, qb.ctx.x_cur, *qb.ctx.x_prev);
    EXPECT_EQ(safeguarded_bb(f, qb.ctx, mem, ls), std::max(0.25, s));
    ls.delta_max = 0.5;
    mem.delta_min = 0.3;
    EXPECT_EQ(safeguarded_bb(f, qb.ctx, mem, ls), std::clamp(s, 0.3, 0.5));
    qb.ctx.x_prev = qb.ctx.x_cur;
    EXPECT_EQ(safeguarded_bb(f, qb.ctx, mem, ls), 0.3);
}

TEST(ProxLinearStep, TrivialIdentityBlock) {
    auto eye = std::make_shared<EmbeddedIdentityOp>(2, 2, 0, 1.0);
    const Problem p({{eye, std::make_shared<ZeroSmooth>(), std::make_shared<ZeroNonsmooth>()}}, Vector::Zero(2));
    const Vector u = prox_linear_step(p, 0, Vector::Zero(2), 1.0, Vector::Constant(2, 2.0), Vector::Zero(2), 1.0);
    EXPECT_LE((u - Vector::Constant(2, 1.0)).norm(), 1e-15);
}

TEST(ProxLinearStep, MinimizesTheLinearizedModel) {
    QuadBlock qb = QuadBlock::make(3);
    std::mt19937_64 rng(30);
    const Vector v = oracle::random_vector(5, rng);
    const double delta = 2.5;
    const Vector u = prox_linear_step(qb.ctx, v, delta);
    auto phi = [&](const Vector& w) {
        return phi_i_k(qb.p, 0, w, v, delta, qb.ctx.b_ik, qb.ctx.lambda, qb.ctx.rho);
    };
    std::uniform_real_distribution<double> unif(-1e-3, 1e-3);
    for (int trial = 0; trial < 100; ++trial) {
        EXPECT_GE(phi(u + unif(rng) * oracle::random_vector(5, rng)), phi(u) - 1e-12);
    }
}

TEST(Generalized, ZeroSmoothPartAcceptsFirstTrial) {
    auto neg = std::make_shared<EmbeddedIdentityOp>(3, 3, 0, -1.0);
    const Problem p({{neg, std::make_shared<ZeroSmooth>(), std::make_shared<ScaledL1>(0.2)}}, Vector::Zero(3));
    const BlockSubproblem solver(p, 0);
    BlockContext ctx{&p, &solver, 0, 1, Vector::Ones(3), std::nullopt, Vector::Constant(3, 0.5), Vector::Zero(3), 1.0};
    BlockMemory mem;
    mem.delta_min = 0.7;
    int backtracks = -1;
    InnerLoopOptions opts;
    opts.observer = [&](const InnerStepInfo& s) {
        backtracks = s.backtracks;
        return true;
    };
    const InnerResult r = generalized_step(ctx, mem, LineSearchParams{}, RelaxationParams::strict(), opts);
    EXPECT_EQ(backtracks, 0);
    EXPECT_EQ(r.delta_final, 0.7);
    EXPECT_DOUBLE_EQ(r.gamma, 1.0 / 0.7);
    EXPECT_NEAR(r.r, (r.x_next - ctx.x_cur).squaredNorm() / 0.7, 1e-15);
}

TEST(Generalized, AcceptedStepSatisfiesDescentAndBound) {
    QuadBlock qb = QuadBlock::make(4);
    LineSearchParams ls;
    BlockMemory mem;
    mem.delta_min = ls.delta_min;
    const InnerResult r = generalized_step(qb.ctx, mem, ls, RelaxationParams::strict());
    const SmoothPart& f = *qb.p.block(0).f;
    const Vector d = r.x_next - qb.ctx.x_cur;
    EXPECT_GE(f.value(qb.ctx.x_cur) + f.gradient(qb.ctx.x_cur).dot(d) +
                  0.5 * (1.0 - ls.sigma) * r.delta_final * d.squaredNorm() + 1e-12,
              f.value(r.x_next));
    EXPECT_LE(r.delta_final, std::max(ls.eta * qb.zeta() / (1.0 - ls.sigma), ls.delta_max));
    EXPECT_GE(r.delta_final, ls.delta_min);
    EXPECT_EQ(r.inner_iters, 1);
    EXPECT_EQ(mem.delta_prev, r.delta_final);
}

TEST(Generalized, SafeguardRaisesDeltaMinOnIncrease) {
    QuadBlock qb = QuadBlock::make(5);
    LineSearchParams ls;
    BlockMemory mem;
    mem.delta_min = 1e-6;
    mem.delta_prev = 1e-6;
    qb.ctx.k = 2;
    qb.ctx.x_prev = qb.ctx.x_cur;  // BB undefined, start from delta_min and backtrack upward
    const InnerResult r = generalized_step(qb.ctx, mem, ls, RelaxationParams::strict());
    EXPECT_GT(r.delta_final, 1e-6);
    EXPECT_DOUBLE_EQ(mem.delta_min, 1e-6 * ls.tau);
}

TEST(Generalized, LargeDeltaMinAcceptsFirstTrial) {
    QuadBlock qb = QuadBlock::make(6);
    LineSearchParams ls;
    BlockMemory mem;
    mem.delta_min = qb.zeta() / (1.0 - ls.sigma) * 1.01;
    int backtracks = -1;
    InnerLoopOptions opts;
    opts.observer = [&](const InnerStepInfo& s) {
        backtracks = s.backtracks;
        return true;
    };
    generalized_step(qb.ctx, mem, ls, RelaxationParams::strict(), opts);
    EXPECT_EQ(backtracks, 0);
}

TEST(Generalized, FixedPointAtExactMinimizer) {
    QuadBlock qb = QuadBlock::make(7);
    qb.ctx.x_cur = qb.x_bar;
    BlockMemory mem;
    const InnerResult r = generalized_step(qb.ctx, mem, LineSearchParams{}, RelaxationParams::strict());
    EXPECT_LE((r.x_next - qb.x_bar).norm(), 1e-10);
    EXPECT_LE(r.r, 1e-18);
}

TEST(Multistep, FirstOuterIterationMatchesGeneralizedStep) {
    QuadBlock qb = QuadBlock::make(8);
    BlockMemory m1;
    BlockMemory m2;
    const InnerResult ms = multistep_loop(qb.ctx, m1, LineSearchParams{}, RelaxationParams::strict(), kInfinity);
    const InnerResult gs = generalized_step(qb.ctx, m2, LineSearchParams{}, RelaxationParams::strict());
    EXPECT_EQ(ms.inner_iters, 1);
    EXPECT_LE((ms.x_next - gs.x_next).norm(), 1e-14);
    EXPECT_LE((ms.z - gs.z).norm(), 1e-14);
    EXPECT_DOUBLE_EQ(ms.gamma, gs.gamma);
}

TEST(Multistep, ConstantStepGivesPlainAverage) {
    auto eye = std::make_shared<EmbeddedIdentityOp>(3, 3, 0, 1.0);
    const Problem p({{eye, std::make_shared<ZeroSmooth>(), std::make_shared<GroupL2>(0.3, 3)}}, Vector::Zero(3));
    const BlockSubproblem solver(p, 0);
    std::mt19937_64 rng(9);
    BlockContext ctx{&p, &solver, 0, 1, oracle::random_vector(3, rng), std::nullopt, oracle::random_vector(3, rng),
                     oracle::random_vector(3, rng), 0.5};
    BlockMemory mem;
    mem.delta_min = 2.0;
    Recorder rec{12, {}, {}, {}};
    const InnerResult r = multistep_loop(ctx, mem, LineSearchParams{}, RelaxationParams::strict(), 0.0, rec.options());
    ASSERT_EQ(r.inner_iters, 12);
    EXPECT_DOUBLE_EQ(r.gamma, 12 / 2.0);
    Vector mean = Vector::Zero(3);
    for (const auto& u : rec.u) {
        mean += u / 12.0;
    }
    EXPECT_LE((r.z - mean).norm(), 1e-13);
}

TEST(Multistep, AverageIsBatchWeightedMean) {
    QuadBlock qb = QuadBlock::make(10);
    BlockMemory mem;
    Recorder rec{40, {}, {}, {}};
    const InnerResult r =
        multistep_loop(qb.ctx, mem, LineSearchParams{}, RelaxationParams::strict(), 0.0, rec.options());
    Vector num = Vector::Zero(5);
    double den = 0.0;
    double sum_sq = 0.0;
    Vector prev = qb.ctx.x_cur;
    for (std::size_t j = 0; j < rec.u.size(); ++j) {
        num += rec.u[j] / rec.steps[j].delta;
        den += 1.0 / rec.steps[j].delta;
        sum_sq += (rec.u[j] - prev).squaredNorm();
        prev = rec.u[j];
    }
    EXPECT_LE((r.z - num / den).norm(), 1e-12 * std::max(1.0, r.z.norm()));
    EXPECT_NEAR(r.gamma, den, 1e-12 * den);
    EXPECT_NEAR(r.r, sum_sq / den, 1e-12 * std::max(1.0, r.r));
}

TEST(Multistep, IterationCapIsReported) {
    QuadBlock qb = QuadBlock::make(11);
    BlockMemory mem;
    InnerLoopOptions opts;
    opts.max_inner_iters = 5;
    EXPECT_THROW(multistep_loop(qb.ctx, mem, LineSearchParams{}, RelaxationParams::strict(), 0.0, opts),
                 InnerIterationCap);
}

TEST(Multistep, RelaxedStoppingUsesIterationCount) {
    QuadBlock qb = QuadBlock::make(12);
    BlockMemory mem;
    mem.gamma_prev = 1e12;
    mem.l_prev = 3;
    const double dmin = mem.delta_min;
    const InnerResult r = multistep_loop(qb.ctx, mem, LineSearchParams{}, RelaxationParams::relaxed(), kInfinity);
    EXPECT_EQ(r.inner_iters, 3);
    EXPECT_FALSE(r.gamma_condition_met);
    EXPECT_DOUBLE_EQ(mem.delta_min, dmin * LineSearchParams{}.tau);
}

TEST(Accelerated, XiIsOneAndWeightsAreConvex) {
    for (AccelSchedule sched : {AccelSchedule::Adaptive, AccelSchedule::Constant}) {
        QuadBlock qb = QuadBlock::make(13);
        BlockMemory mem;
        Recorder rec{60, {}, {}, {}};
        const InnerResult r =
            accelerated_loop(qb.ctx, mem, LineSearchParams{}, RelaxationParams::strict(), 0.0, sched, rec.options());
        ASSERT_EQ(r.inner_iters, 60);
        Vector comb = Vector::Zero(5);
        double wsum = 0.0;
        for (std::size_t j = 0; j < rec.steps.size(); ++j) {
            const auto& s = rec.steps[j];
            EXPECT_NEAR(s.delta * s.alpha * s.gamma, 1.0, 1e-12) << static_cast<int>(sched) << " l=" << s.l;
            const double w = s.gamma * s.alpha;
            comb += w * rec.u[j];
            wsum += w;
            EXPECT_GE(w, 0.0);
        }
        EXPECT_NEAR(wsum / r.gamma, 1.0, 1e-12);
        EXPECT_LE((comb / r.gamma - r.z).norm(), 1e-12 * std::max(1.0, r.z.norm()));
    }
}

TEST(Accelerated, ConstantScheduleGammaIsQuadratic) {
    QuadBlock qb = QuadBlock::make(14);
    BlockMemory mem;
    Recorder rec{50, {}, {}, {}};
    accelerated_loop(qb.ctx, mem, LineSearchParams{}, RelaxationParams::strict(), 0.0, AccelSchedule::Constant,
                     rec.options());
    const double d1 = rec.steps.front().delta;
    for (const auto& s : rec.steps) {
        const double l = static_cast<double>(s.l);
        EXPECT_NEAR(s.gamma, l * (l + 1.0) / (2.0 * d1), 1e-12 * s.gamma);
        EXPECT_GE(s.gamma * s.alpha * s.alpha, 1.0 / d1 * (1.0 - 1e-12));
    }
}

TEST(Accelerated, ZeroSmoothFirstStepIsProxLinearStep) {
    auto neg = std::make_shared<EmbeddedIdentityOp>(4, 4, 0, -1.0);
    const Problem p({{neg, std::make_shared<ZeroSmooth>(), std::make_shared<ScaledL1>(0.4)}}, Vector::Zero(4));
    const BlockSubproblem solver(p, 0);
    std::mt19937_64 rng(15);
    BlockContext ctx{&p, &solver, 0, 1, oracle::random_vector(4, rng), std::nullopt, oracle::random_vector(4, rng),
                     oracle::random_vector(4, rng), 1.5};
    BlockMemory mem;
    mem.delta_min = 0.9;
    const InnerResult r =
        accelerated_loop(ctx, mem, LineSearchParams{}, RelaxationParams::strict(), kInfinity, AccelSchedule::Adaptive);
    EXPECT_EQ(r.inner_iters, 1);
    const Vector expected = prox_linear_step(ctx, ctx.x_cur, 0.9);
    EXPECT_LE((r.x_next - expected).norm(), 1e-14);
    EXPECT_LE((r.z - expected).norm(), 1e-14);
}

TEST(Accelerated, ConstantScheduleNeedsLipschitzConstant) {
    struct NoLip final : SmoothPart {
        std::string name() const override { return "nolip"; }
        double value(VecCRef x) const override { return 0.5 * x.squaredNorm(); }
        void gradient(VecCRef x, VecRef g) const override { g = x; }
    };
    auto eye = std::make_shared<EmbeddedIdentityOp>(2, 2, 0, 1.0);
    const Problem p({{eye, std::make_shared<NoLip>(), std::make_shared<ZeroNonsmooth>()}}, Vector::Zero(2));
    const BlockSubproblem solver(p, 0);
    BlockContext ctx{&p, &solver, 0, 1, Vector::Ones(2), std::nullopt, Vector::Zero(2), Vector::Zero(2), 1.0};
    BlockMemory mem;
    EXPECT_THROW(accelerated_loop(ctx, mem, LineSearchParams{}, RelaxationParams::strict(), kInfinity,
                                  AccelSchedule::Constant),
                 InvalidArgument);
}

TEST(Exact, ScalarQuadraticMinimizer) {
    auto eye = std::make_shared<DenseOp>(Matrix::Identity(1, 1));
    auto f = std::make_shared<QuadraticLS>(eye, Vector::Constant(1, 3.0));
    const Problem p({{eye, f, std::make_shared<ZeroNonsmooth>()}}, Vector::Zero(1));
    const BlockSubproblem solver(p, 0);
    // L(u) = 1/2 (u - 3)^2 + (rho/2) (u - 1)^2 with b_ik = 1, lambda = 0, rho = 1
    BlockContext ctx{&p, &solver, 0, 1, Vector::Zero(1), std::nullopt, Vector::Ones(1), Vector::Zero(1), 1.0};
    const InnerResult r = exact_block_solve(ctx, BlockMemory{}, 1e-14);
    EXPECT_NEAR(r.x_next[0], 2.0, 1e-14);
    EXPECT_EQ(r.r, 0.0);
}

TEST(Exact, ConjugateGradientMatchesDenseSolve) {
    QuadBlock qb = QuadBlock::make(16);
    BlockMemory mem;
    mem.gamma_prev = 0.25;
    const InnerResult r = exact_block_solve(qb.ctx, mem, 1e-12);
    EXPECT_LE((r.x_next - qb.x_bar).norm(), 1e-8);
    EXPECT_EQ(r.gamma, 0.25);
    EXPECT_EQ(r.r, 0.0);
}

TEST(Exact, ClosedFormProxSatisfiesSignConditions) {
    const double beta = 0.5;
    auto neg = std::make_shared<EmbeddedIdentityOp>(6, 6, 0, -1.0);
    const Problem p({{neg, std::make_shared<ZeroSmooth>(), std::make_shared<ScaledL1>(beta)}}, Vector::Zero(6));
    const BlockSubproblem solver(p, 0);
    std::mt19937_64 rng(17);
    const double rho = 0.9;
    BlockContext ctx{&p, &solver, 0, 1, Vector::Zero(6), std::nullopt, oracle::random_vector(6, rng),
                     oracle::random_vector(6, rng), rho};
    const InnerResult r = exact_block_solve(ctx, BlockMemory{});
    // 0 in beta d|u| + rho (u + c) with c = b - lambda/rho
    const Vector c = ctx.shifted_rhs();
    for (Index j = 0; j < 6; ++j) {
        const double grad = rho * (r.x_next[j] + c[j]);
        if (r.x_next[j] > 0.0) {
            EXPECT_NEAR(grad, -beta, 1e-12);
        } else if (r.x_next[j] < 0.0) {
            EXPECT_NEAR(grad, beta, 1e-12);
        } else {
            EXPECT_LE(std::abs(grad), beta + 1e-12);
        }
    }
}

TEST(Exact, UnsupportedCombination) {
    QuadBlock qb = QuadBlock::make(18, std::make_shared<ScaledL1>(1.0), true);
    EXPECT_THROW(exact_block_solve(qb.ctx, BlockMemory{}), UnsupportedSubproblem);
}

TEST(RunningAverage, MatchesBatchOnRandomSequences) {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> logd(-3.0, 3.0);
    for (int seq = 0; seq < 20; ++seq) {
        RunningAverage avg(Vector::Zero(4));
        Vector num = Vector::Zero(4);
        double den = 0.0;
        for (int l = 0; l < 50; ++l) {
            const double delta = std::pow(10.0, logd(rng));
            const Vector u = oracle::random_vector(4, rng);
            avg.add(u, delta);
            num += u / delta;
            den += 1.0 / delta;
        }
        EXPECT_LE((avg.value() - num / den).norm(), 1e-12 * std::max(1.0, (num / den).norm()));
        EXPECT_NEAR(avg.gamma(), den, 1e-12 * den);
    }
}

TEST(Psi, DefaultsAndEpsilon) {
    EXPECT_DOUBLE_EQ(psi_multistep(0.5), 0.05);
    EXPECT_DOUBLE_EQ(psi_multistep(1e-12), std::pow(1e-12, 1.1));
    EXPECT_DOUBLE_EQ(psi_multistep(100.0), 10.0);
    EXPECT_DOUBLE_EQ(psi_accelerated(3.0), 1.5);
    EXPECT_EQ(psi_multistep(kInfinity), kInfinity);
    const RelaxationParams r = RelaxationParams::relaxed();
    EXPECT_DOUBLE_EQ(r.epsilon(1), 10.0);
    EXPECT_DOUBLE_EQ(r.epsilon(4), 10.0 / std::pow(4.0, 1.1));
    EXPECT_TRUE(r.any());
    EXPECT_FALSE(RelaxationParams::strict().any());
}

TEST(LineSearchParams, ValidationRejectsBadSettings) {
    LineSearchParams ls;
    EXPECT_NO_THROW(ls.validate());
    ls.sigma = 1.0;
    EXPECT_THROW(ls.validate(), InvalidArgument);
    ls = {};
    ls.tau = 4.0;
    EXPECT_THROW(ls.validate(), InvalidArgument);
    ls = {};
    ls.delta_min = 2e10;
    EXPECT_THROW(ls.validate(), InvalidArgument);
}
