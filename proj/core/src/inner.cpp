#include "bosvs/inner.hpp"

#include "bosvs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bosvs {

void LineSearchParams::validate() const {
    if (!(sigma > 0.0 && sigma < 1.0)) {
        throw InvalidArgument("LineSearchParams: sigma must lie in (0, 1)");
    }
    if (!(tau > 1.0 && tau <= eta)) {
        throw InvalidArgument("LineSearchParams: need 1 < tau <= eta");
    }
    if (!(delta_min > 0.0 && delta_min < delta_max)) {
        throw InvalidArgument("LineSearchParams: need 0 < delta_min < delta_max");
    }
    if (max_backtracks < 0) {
        throw InvalidArgument("LineSearchParams: negative backtrack cap");
    }
}

double RelaxationParams::epsilon(long k) const {
    return eps_scale / std::pow(static_cast<double>(std::max(k, 1L)), eps_power);
}

double psi_multistep(double t) {
    return std::min(0.1 * t, std::pow(t, 1.1));
}

double psi_accelerated(double t) {
    return 0.5 * t;
}

void RunningAverage::add(VecCRef u, double delta) {
    gamma_ += 1.0 / delta;
    alpha_ = 1.0 / (delta * gamma_);
    a_ = (1.0 - alpha_) * a_ + alpha_ * u;
}

namespace {

// f(y) <= f(x) + <grad f(x), y - x> + quad + slack, written in terms of the linearization gap.
bool sufficient_decrease(const SmoothPart& f, VecCRef x, double fx, VecCRef gx, VecCRef y, double quad,
                         double slack) {
    const LinearizationGap g = f.linearization_gap(x, fx, gx, y);
    return g.gap <= quad + slack + g.roundoff;
}

const BlockSubproblem& solver_of(const BlockContext& ctx) {
    if (ctx.problem == nullptr || ctx.solver == nullptr) {
        throw InvalidArgument("BlockContext: problem and solver must be set");
    }
    return *ctx.solver;
}

std::string block_tag(const BlockContext& ctx) {
    return "block " + std::to_string(ctx.block) + " at outer iteration " + std::to_string(ctx.k);
}

}  // namespace

std::optional<double> bb_stepsize(const SmoothPart& f, VecCRef x_cur, VecCRef x_prev) {
    if (x_cur.size() != x_prev.size()) {
        throw DimensionMismatch("bb_stepsize: iterate length mismatch");
    }
    const Vector dx = x_cur - x_prev;
    const double dd = dx.squaredNorm();
    if (!(dd > 0.0)) {
        return std::nullopt;
    }
    return f.gradient_difference_dot(x_cur, x_prev) / dd;
}

double safeguarded_bb(const SmoothPart& f, const BlockContext& ctx, const BlockMemory& mem,
                      const LineSearchParams& ls) {
    double s = mem.delta_min;
    if (ctx.k > 1 && ctx.x_prev) {
        if (auto bb = bb_stepsize(f, ctx.x_cur, *ctx.x_prev)) {
            s = *bb;
        }
    }
    // mid{delta_min_i, s, delta_max}
    const double lo = std::min(mem.delta_min, ls.delta_max);
    const double hi = std::max(mem.delta_min, ls.delta_max);
    return std::clamp(s, lo, hi);
}

Vector prox_linear_step(const BlockContext& ctx, VecCRef v, double delta) {
    const BlockSubproblem& solver = solver_of(ctx);
    const Vector g = ctx.problem->block(ctx.block).f->gradient(v);
    return solver.minimize(g, v, delta, ctx.shifted_rhs(), ctx.rho);
}

Vector prox_linear_step(const Problem& p, std::size_t i, VecCRef v, double delta, VecCRef b_ik, VecCRef lambda,
                        double rho) {
    const BlockSubproblem solver(p, i);
    BlockContext ctx;
    ctx.problem = &p;
    ctx.solver = &solver;
    ctx.block = i;
    ctx.x_cur = v;
    ctx.b_ik = b_ik;
    ctx.lambda = lambda;
    ctx.rho = rho;
    return prox_linear_step(ctx, v, delta);
}

InnerResult generalized_step(const BlockContext& ctx, BlockMemory& mem, const LineSearchParams& ls,
                             const RelaxationParams& relax, const InnerLoopOptions& opts) {
    ls.validate();
    const BlockSubproblem& solver = solver_of(ctx);
    const SmoothPart& f = *ctx.problem->block(ctx.block).f;
    const double delta0 = safeguarded_bb(f, ctx, mem, ls);
    const Vector& v = ctx.x_cur;
    Vector g(v.size());
    const double fv = f.value_and_gradient(v, g);
    const Vector c = ctx.shifted_rhs();
    const double slack = relax.line_search ? relax.epsilon(ctx.k) : 0.0;

    double delta = delta0;
    Vector x_plus;
    int j = 0;
    for (;; ++j) {
        if (j > ls.max_backtracks) {
            throw LineSearchDiverged(block_tag(ctx) + ": generalized line search exceeded " +
                                     std::to_string(ls.max_backtracks) + " backtracks");
        }
        x_plus = solver.minimize(g, v, delta, c, ctx.rho);
        if (f.is_zero()) {
            break;
        }
        const Vector d = x_plus - v;
        if (sufficient_decrease(f, v, fv, g, x_plus, 0.5 * (1.0 - ls.sigma) * delta * d.squaredNorm(), slack)) {
            break;
        }
        delta *= ls.eta;
    }

    if (ctx.k > 1 && delta > std::max(mem.delta_prev, mem.delta_min)) {
        mem.delta_min *= ls.tau;
    }

    InnerResult res;
    res.r = (x_plus - v).squaredNorm() / delta;
    res.gamma = 1.0 / delta;
    res.inner_iters = 1;
    res.delta_final = delta;
    res.z = x_plus;
    res.x_next = std::move(x_plus);

    mem.delta_prev = delta;
    mem.gamma_prev = res.gamma;
    mem.l_prev = 1;

    if (opts.observer) {
        InnerStepInfo info;
        info.block = ctx.block;
        info.outer_k = ctx.k;
        info.l = 1;
        info.backtracks = j;
        info.delta0 = delta0;
        info.delta = delta;
        info.alpha = 1.0;
        info.gamma = res.gamma;
        info.u = &res.x_next;
        info.a = &res.z;
        opts.observer(info);
    }
    return res;
}

InnerResult multistep_loop(const BlockContext& ctx, BlockMemory& mem, const LineSearchParams& ls,
                           const RelaxationParams& relax, double psi_of_e_prev, const InnerLoopOptions& opts) {
    ls.validate();
    const BlockSubproblem& solver = solver_of(ctx);
    const SmoothPart& f = *ctx.problem->block(ctx.block).f;
    const double delta0 = safeguarded_bb(f, ctx, mem, ls);
    const Vector c = ctx.shifted_rhs();
    const double eps_k = relax.line_search ? relax.epsilon(ctx.k) : 0.0;

    Vector u_prev = ctx.x_cur;
    Vector u;
    RunningAverage avg(ctx.x_cur);
    double sum_sq = 0.0;
    double delta = delta0;
    bool gamma_ok = false;
    long l = 1;
    for (;; ++l) {
        if (l > opts.max_inner_iters) {
            throw InnerIterationCap(block_tag(ctx) + ": multistep inner loop hit " +
                                    std::to_string(opts.max_inner_iters) + " iterations");
        }
        Vector g(u_prev.size());
        const double fu = f.value_and_gradient(u_prev, g);
        delta = delta0;
        int j = 0;
        for (;; ++j) {
            if (j > ls.max_backtracks) {
                throw LineSearchDiverged(block_tag(ctx) + ": multistep line search exceeded " +
                                         std::to_string(ls.max_backtracks) + " backtracks");
            }
            u = solver.minimize(g, u_prev, delta, c, ctx.rho);
            if (f.is_zero()) {
                break;
            }
            const Vector d = u - u_prev;
            double slack = 0.0;
            if (eps_k > 0.0) {
                const double gamma_trial = avg.gamma() + 1.0 / delta;
                slack = eps_k * delta / std::pow(gamma_trial, relax.multistep_omega_power);
            }
            if (sufficient_decrease(f, u_prev, fu, g, u, 0.5 * (1.0 - ls.sigma) * delta * d.squaredNorm(), slack)) {
                break;
            }
            delta *= ls.eta;
        }
        const double step_sq = (u - u_prev).squaredNorm();
        avg.add(u, delta);
        sum_sq += step_sq;

        bool forced_stop = false;
        if (opts.observer) {
            InnerStepInfo info;
            info.block = ctx.block;
            info.outer_k = ctx.k;
            info.l = l;
            info.backtracks = j;
            info.delta0 = delta0;
            info.delta = delta;
            info.alpha = avg.last_alpha();
            info.gamma = avg.gamma();
            info.u = &u;
            info.a = &avg.value();
            forced_stop = !opts.observer(info);
        }

        gamma_ok = avg.gamma() >= mem.gamma_prev;
        const bool l_ok = relax.stopping && l >= mem.l_prev;
        const bool accurate = std::sqrt(step_sq) / std::sqrt(avg.gamma()) <= psi_of_e_prev;
        u_prev = u;
        if (forced_stop || ((gamma_ok || l_ok) && accurate)) {
            break;
        }
    }

    if (relax.stopping && !gamma_ok) {
        mem.delta_min *= ls.tau;
    }

    InnerResult res;
    res.x_next = std::move(u);
    res.z = avg.value();
    res.gamma = avg.gamma();
    res.r = sum_sq / res.gamma;
    res.inner_iters = l;
    res.delta_final = delta;
    res.gamma_condition_met = gamma_ok;

    mem.delta_prev = delta;
    mem.gamma_prev = res.gamma;
    mem.l_prev = l;
    return res;
}

InnerResult accelerated_loop(const BlockContext& ctx, BlockMemory& mem, const LineSearchParams& ls,
                             const RelaxationParams& relax, double psi_of_e_prev, AccelSchedule schedule,
                             const InnerLoopOptions& opts) {
    ls.validate();
    const BlockSubproblem& solver = solver_of(ctx);
    const SmoothPart& f = *ctx.problem->block(ctx.block).f;

    bool constant = schedule == AccelSchedule::Constant;
    double zeta = 0.0;
    if (constant) {
        const auto lip = f.lipschitz();
        if (!lip) {
            throw InvalidArgument(block_tag(ctx) + ": constant accelerated schedule needs a Lipschitz constant");
        }
        zeta = *lip;
        // f_i = 0 has nothing to linearize; the adaptive rule accepts its first trial.
        constant = zeta > 0.0;
    }

    const double delta0 = constant ? 0.0 : safeguarded_bb(f, ctx, mem, ls);
    const Vector c = ctx.shifted_rhs();
    const double eps_k = relax.line_search ? relax.epsilon(ctx.k) : 0.0;

    Vector a = ctx.x_cur;
    Vector a_prev = a;
    Vector u_prev = ctx.x_cur;
    Vector u;
    Vector a_bar;
    Vector a_next;
    double lambda_sum = 0.0;  // sum_j 1/delta^j
    double gamma = 0.0;
    double sum_sq = 0.0;
    double delta = 0.0;
    double alpha = 1.0;
    bool gamma_ok = false;
    long l = 1;
    for (;; ++l) {
        if (l > opts.max_inner_iters) {
            throw InnerIterationCap(block_tag(ctx) + ": accelerated inner loop hit " +
                                    std::to_string(opts.max_inner_iters) + " iterations");
        }
        double gamma_next = 0.0;
        double trial = delta0;  // delta0 * eta^j
        int j = 0;
        for (;; ++j) {
            if (j > ls.max_backtracks) {
                throw LineSearchDiverged(block_tag(ctx) + ": accelerated line search exceeded " +
                                         std::to_string(ls.max_backtracks) + " backtracks");
            }
            if (constant) {
                const double ll = static_cast<double>(l);
                delta = 2.0 * zeta / ((1.0 - ls.sigma) * ll);
                alpha = 2.0 / (ll + 1.0);
            } else {
                const double theta = 1.0 / trial;
                delta = 2.0 / (theta + std::sqrt(theta * theta + 4.0 * theta * lambda_sum));
                alpha = 1.0 / (1.0 + delta * lambda_sum);
            }
            a_bar = (1.0 - alpha) * a + alpha * u_prev;
            Vector g(a_bar.size());
            const double f_bar = f.value_and_gradient(a_bar, g);
            u = solver.minimize(g, u_prev, delta, c, ctx.rho);
            a_next = (1.0 - alpha) * a + alpha * u;
            gamma_next = (l == 1) ? 1.0 / delta : gamma / (1.0 - alpha);
            if (f.is_zero()) {
                break;
            }
            double slack = 0.0;
            if (eps_k > 0.0) {
                slack = eps_k / std::pow(gamma_next, relax.accelerated_omega_power) / gamma_next;
            }
            const Vector d = a_next - a_bar;
            if (sufficient_decrease(f, a_bar, f_bar, g, a_next, 0.5 * (1.0 - ls.sigma) * delta / alpha * d.squaredNorm(),
                                    slack)) {
                break;
            }
            if (constant) {
                throw LineSearchDiverged(block_tag(ctx) +
                                         ": constant schedule violated the descent condition; "
                                         "the Lipschitz constant is too small");
            }
            trial *= ls.eta;
        }
        lambda_sum += 1.0 / delta;
        gamma = gamma_next;
        a_prev = a;
        a = a_next;
        const double step_sq = (u - u_prev).squaredNorm();
        sum_sq += step_sq;

        bool forced_stop = false;
        if (opts.observer) {
            InnerStepInfo info;
            info.block = ctx.block;
            info.outer_k = ctx.k;
            info.l = l;
            info.backtracks = j;
            info.delta0 = delta0;
            info.delta = delta;
            info.alpha = alpha;
            info.gamma = gamma;
            info.u = &u;
            info.a = &a;
            forced_stop = !opts.observer(info);
        }

        gamma_ok = gamma >= mem.gamma_prev;
        const bool l_ok = relax.stopping && l >= mem.l_prev;
        const bool accurate = (a - a_prev).norm() <= psi_of_e_prev;
        u_prev = u;
        if (forced_stop || ((gamma_ok || l_ok) && accurate)) {
            break;
        }
    }

    if (relax.stopping && !gamma_ok) {
        mem.delta_min *= ls.tau;
    }

    InnerResult res;
    res.x_next = std::move(u);
    res.z = std::move(a);
    res.gamma = gamma;
    res.r = sum_sq / gamma;
    res.inner_iters = l;
    res.delta_final = delta / alpha;
    res.gamma_condition_met = gamma_ok;

    mem.delta_prev = res.delta_final;
    mem.gamma_prev = gamma;
    mem.l_prev = l;
    return res;
}

InnerResult exact_block_solve(const BlockContext& ctx, const BlockMemory& mem, double cg_tol, long cg_maxit) {
    const BlockSubproblem& solver = solver_of(ctx);
    const Block& blk = ctx.problem->block(ctx.block);
    const LinOp& a = *blk.A;
    const Vector c = ctx.shifted_rhs();

    InnerResult res;
    res.r = 0.0;
    res.gamma = mem.gamma_prev;
    res.delta_final = 0.0;

    if (blk.f->is_zero() && solver.gram_scale()) {
        // argmin h(u) + (rho s / 2) ||u - A^T c / s||^2
        const double s = *solver.gram_scale();
        const Vector center = a.apply_adjoint(c) / s;
        res.x_next = blk.h->prox(center, 1.0 / (ctx.rho * s));
        res.z = res.x_next;
        res.inner_iters = 1;
        return res;
    }
    if (!blk.h->is_zero() || !blk.f->is_quadratic()) {
        throw UnsupportedSubproblem(block_tag(ctx) + ": exact solve needs h = 0 with quadratic f, or f = 0 with "
                                                     "A^T A = cI");
    }
    // (H_f + rho A^T A) u = -grad f(0) + rho A^T c; the CG residual is -grad L(u).
    const Vector zero = Vector::Zero(a.cols());
    Vector rhs = a.apply_adjoint(c);
    rhs *= ctx.rho;
    rhs -= blk.f->gradient(zero);
    Vector tmp(a.rows());
    Vector hv(a.cols());
    auto apply = [&](VecCRef v, VecRef out) {
        a.apply(v, tmp);
        a.apply_adjoint(tmp, out);
        out *= ctx.rho;
        blk.f->hessian_apply(v, hv);
        out += hv;
    };
    Vector u = ctx.x_cur;
    const long iters = conjugate_gradient(apply, rhs, u, cg_tol, cg_maxit);
    if (iters < 0) {
        throw CGNotConverged(block_tag(ctx) + ": exact subproblem CG did not reach ||grad L|| <= " +
                             std::to_string(cg_tol) + " in " + std::to_string(cg_maxit) + " iterations");
    }
    res.inner_iters = std::max(1L, iters);
    res.z = u;
    res.x_next = std::move(u);
    return res;
}

}  // namespace bosvs
