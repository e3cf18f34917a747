#include "bosvs/outer.hpp"

#include "bosvs/errors.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace bosvs {

std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::Generalized:
            return "generalized";
        case Scheme::Multistep:
            return "multistep";
        case Scheme::Accelerated:
            return "accelerated";
        case Scheme::Exact:
            return "exact";
    }
    return "unknown";
}

Scheme parse_scheme(std::string_view name) {
    if (name == "generalized") return Scheme::Generalized;
    if (name == "multistep") return Scheme::Multistep;
    if (name == "accelerated") return Scheme::Accelerated;
    if (name == "exact") return Scheme::Exact;
    throw InvalidArgument("unknown scheme '" + std::string(name) + "'");
}

std::string_view to_string(AccelSchedule s) {
    return s == AccelSchedule::Constant ? "constant" : "adaptive";
}

AccelSchedule parse_schedule(std::string_view name) {
    if (name == "constant") return AccelSchedule::Constant;
    if (name == "adaptive") return AccelSchedule::Adaptive;
    throw InvalidArgument("unknown accelerated schedule '" + std::string(name) + "'");
}

std::string_view to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged:
            return "converged";
        case SolveStatus::MaxItersReached:
            return "max_iters_reached";
        case SolveStatus::Stopped:
            return "stopped";
    }
    return "unknown";
}

void OuterParams::use_benchmark_thetas() {
    theta = {1e-6 * std::sqrt(rho), std::sqrt(rho), 1e-6 * std::sqrt(line_search.sigma / (1.0 - alpha))};
}

Scheme OuterParams::scheme_for(std::size_t block) const {
    return schemes.size() == 1 ? schemes.front() : schemes.at(block);
}

void OuterParams::validate(std::size_t num_blocks) const {
    if (!(rho > 0.0)) {
        throw InvalidArgument("OuterParams: rho must be positive");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidArgument("OuterParams: alpha must lie strictly inside (0, 1)");
    }
    for (double t : theta) {
        if (!(t > 0.0)) {
            throw InvalidArgument("OuterParams: theta weights must be positive");
        }
    }
    if (stop_tol && !(*stop_tol >= 0.0)) {
        throw InvalidArgument("OuterParams: stop_tol must be nonnegative");
    }
    if (schemes.size() != 1 && schemes.size() != num_blocks) {
        throw InvalidArgument("OuterParams: need one scheme or one per block");
    }
    line_search.validate();
}

// ---------------------------------------------------------------------------

OuterState OuterState::initial(const Problem& p, const Vector& x0, const Vector& lambda0,
                               const LineSearchParams& ls) {
    p.check_stacked(x0, "OuterState::initial(x0)");
    if (lambda0.size() != p.rows()) {
        throw DimensionMismatch("OuterState::initial: multiplier length mismatch");
    }
    OuterState s;
    s.x = x0;
    s.y = x0;
    s.z = x0;
    s.lambda = lambda0;
    s.blocks.assign(p.num_blocks(), BlockMemory{ls.delta_min, 0.0, 0.0, 0});
    return s;
}

OuterState OuterState::initial(const Problem& p, const LineSearchParams& ls) {
    return initial(p, Vector::Zero(p.layout().total), Vector::Zero(p.rows()), ls);
}

long TraceRecord::inner_iters_total() const {
    long t = 0;
    for (long l : inner_iters) {
        t += l;
    }
    return t;
}

Workspace::Workspace(const Problem& p) {
    solvers_.reserve(p.num_blocks());
    for (std::size_t i = 0; i < p.num_blocks(); ++i) {
        solvers_.push_back(std::make_unique<BlockSubproblem>(p, i));
    }
}

// ---------------------------------------------------------------------------

double error_measure(const std::array<double, 3>& theta, const Vector& z, const Vector& y,
                     std::span<const double> r, const Problem& p) {
    p.check_stacked(z, "error_measure(z)");
    p.check_stacked(y, "error_measure(y)");
    double rsum = 0.0;
    for (double ri : r) {
        if (ri < 0.0) {
            throw InvalidArgument("error_measure: negative r");
        }
        rsum += ri;
    }
    const BlockLayout& lay = p.layout();
    const double tail = (lay.tail(z) - lay.tail(y)).norm();
    return theta[0] * tail + theta[1] * p.residual(z).norm() + theta[2] * std::sqrt(rsum);
}

double energy_E(const Problem& p, const Vector& x, const Vector& y, VecCRef lambda,
                std::span<const double> block_weights, double rho, double alpha, const Reference* reference,
                const BackSubMatrices& bs) {
    if (reference == nullptr) {
        throw MissingReference("energy_E: no reference solution/multiplier pair supplied");
    }
    p.check_stacked(x, "energy_E(x)");
    p.check_stacked(y, "energy_E(y)");
    p.check_stacked(reference->x, "energy_E(reference x)");
    if (block_weights.size() != p.num_blocks()) {
        throw DimensionMismatch("energy_E: one weight per block required");
    }
    const BlockLayout& lay = p.layout();
    double e = 0.0;
    if (p.num_blocks() > 1) {
        const Vector dy = lay.tail(y) - lay.tail(reference->x);
        e += rho * bs.p_norm_squared(dy);
    }
    e += (lambda - reference->lambda).squaredNorm() / rho;
    for (std::size_t i = 0; i < p.num_blocks(); ++i) {
        if (block_weights[i] != 0.0) {
            e += alpha * block_weights[i] * (lay.block(x, i) - lay.block(reference->x, i)).squaredNorm();
        }
    }
    return e;
}

std::vector<double> energy_weights(const OuterParams& params, std::span<const InnerResult> inner) {
    std::vector<double> w(inner.size(), 0.0);
    for (std::size_t i = 0; i < inner.size(); ++i) {
        switch (params.scheme_for(i)) {
            case Scheme::Generalized:
                w[i] = inner[i].delta_final;
                break;
            case Scheme::Multistep:
            case Scheme::Accelerated:
                w[i] = 1.0 / inner[i].gamma;
                break;
            case Scheme::Exact:
                w[i] = 0.0;
                break;
        }
    }
    return w;
}

StepOutput outer_step(const Problem& p, const OuterState& s, const OuterParams& params,
                      const BackSubMatrices& bs, const Workspace& ws, const StepHooks& hooks) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t m = p.num_blocks();
    params.validate(m);
    p.check_stacked(s.x, "outer_step(x)");
    p.check_stacked(s.y, "outer_step(y)");
    if (s.blocks.size() != m) {
        throw DimensionMismatch("outer_step: block memory size mismatch");
    }
    const BlockLayout& lay = p.layout();

    StepOutput out;
    out.state = s;
    OuterState& ns = out.state;
    Vector z = s.y;  // blocks j < i are overwritten with z_j^k as they are produced
    Vector x_next = s.x;
    std::vector<double> r(m, 0.0);
    out.inner.reserve(m);

    InnerLoopOptions opts;
    opts.max_inner_iters = params.max_inner_iters;
    opts.observer = hooks.on_inner;

    for (std::size_t i = 0; i < m; ++i) {
        BlockContext ctx;
        ctx.problem = &p;
        ctx.solver = &ws.solver(i);
        ctx.block = i;
        ctx.k = s.k;
        ctx.x_cur = lay.block(s.x, i);
        if (s.x_prev) {
            ctx.x_prev = Vector(lay.block(*s.x_prev, i));
        }
        ctx.b_ik = b_i_k(p, i, z, s.y);
        ctx.lambda = s.lambda;
        ctx.rho = params.rho;

        BlockMemory& mem = ns.blocks[i];
        const Scheme scheme = params.scheme_for(i);
        InnerResult res;
        switch (scheme) {
            case Scheme::Generalized:
                res = generalized_step(ctx, mem, params.line_search, params.relax, opts);
                break;
            case Scheme::Multistep: {
                const double psi = params.psi ? params.psi(s.e_prev) : psi_multistep(s.e_prev);
                res = multistep_loop(ctx, mem, params.line_search, params.relax, psi, opts);
                break;
            }
            case Scheme::Accelerated: {
                const double psi = params.psi ? params.psi(s.e_prev) : psi_accelerated(s.e_prev);
                res = accelerated_loop(ctx, mem, params.line_search, params.relax, psi, params.schedule, opts);
                break;
            }
            case Scheme::Exact:
                res = exact_block_solve(ctx, mem, params.exact_cg_tol, params.exact_cg_maxit);
                break;
        }
        lay.block(z, i) = res.z;
        lay.block(x_next, i) = res.x_next;
        r[i] = res.r;
        out.inner.push_back(std::move(res));
    }

    const Vector az_minus_b = p.residual(z);
    const double e_k = error_measure(params.theta, z, s.y, r, p);

    TraceRecord& rec = out.record;
    rec.k = s.k;
    rec.e_k = e_k;
    rec.primal_res = az_minus_b.norm();
    rec.objective = objective(p, params.report == ReportPoint::Z ? z : x_next);
    if (hooks.reference != nullptr) {
        const auto w = energy_weights(params, out.inner);
        rec.energy = energy_E(p, s.x, s.y, s.lambda, w, params.rho, params.alpha, hooks.reference, bs);
    }
    for (const auto& res : out.inner) {
        rec.inner_iters.push_back(res.inner_iters);
        rec.deltas.push_back(res.delta_final);
        rec.gammas.push_back(res.gamma);
    }

    // Step 3
    Vector y_next(lay.total);
    lay.block(y_next, 0) = lay.block(z, 0);
    if (m > 1) {
        lay.tail(y_next) = back_substitute(bs, lay.tail(s.y), lay.tail(z), params.alpha);
    }
    ns.lambda = s.lambda + params.alpha * params.rho * az_minus_b;
    ns.x_prev = s.x;
    ns.x = std::move(x_next);
    ns.y = std::move(y_next);
    ns.z = std::move(z);
    ns.e_prev = e_k;
    ns.k = s.k + 1;

    rec.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

SolveResult solve(const Problem& p, const OuterParams& params, const std::optional<Vector>& x0,
                  const std::optional<Vector>& lambda0, const SolveCallbacks& callbacks) {
    params.validate(p.num_blocks());
    std::vector<LinOpPtr> trailing;
    for (std::size_t i = 1; i < p.num_blocks(); ++i) {
        trailing.push_back(p.block(i).A);
    }
    const BackSubMatrices bs = assemble_back_sub(trailing);
    const Workspace ws(p);

    OuterState state = OuterState::initial(p, x0 ? *x0 : Vector::Zero(p.layout().total),
                                           lambda0 ? *lambda0 : Vector::Zero(p.rows()), params.line_search);
    StepHooks hooks;
    hooks.on_inner = callbacks.on_inner;
    hooks.reference = callbacks.reference;

    SolveResult result;
    double elapsed = 0.0;
    double tol = params.stop_tol.value_or(0.0);
    Vector last_lambda;
    for (long it = 0; it < params.max_outer_iters; ++it) {
        StepOutput step = outer_step(p, state, params, bs, ws, hooks);
        elapsed += step.record.time_s;
        step.record.time_s = elapsed;
        if (it == 0 && !params.stop_tol) {
            const double phi1 = step.record.objective;
            tol = 1e-8 * (1.0 + (std::isfinite(phi1) ? std::abs(phi1) : 0.0));
        }
        result.trace.push_back(step.record);
        if (callbacks.on_iteration) {
            callbacks.on_iteration(step.record, step.state);
        }
        ++result.iterations;
        const bool converged = step.record.e_k <= tol;
        const bool stopped = !converged && callbacks.should_stop && callbacks.should_stop(step.record);
        if (converged || stopped) {
            result.status = converged ? SolveStatus::Converged : SolveStatus::Stopped;
            result.x = step.state.z;
            result.lambda = state.lambda;
            result.x_next = step.state.x;
            result.final_state = std::move(step.state);
            break;
        }
        last_lambda = state.lambda;
        state = std::move(step.state);
    }
    if (result.status == SolveStatus::MaxItersReached) {
        result.x = state.z;
        result.lambda = result.iterations > 0 ? last_lambda : state.lambda;
        result.x_next = state.x;
        result.final_state = state;
    }
    result.stop_tol = tol;
    result.objective = objective(p, result.x);
    return result;
}

void write_trace_csv(std::ostream& os, std::span<const TraceRecord> trace, std::size_t num_blocks) {
    os << "k,time_s,objective,e_k,primal_res,E_k,inner_iters_total";
    for (std::size_t i = 1; i <= num_blocks; ++i) {
        os << ",delta_" << i;
    }
    os << '\n';
    char buf[64];
    auto num = [&](double v) -> const char* {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    for (const auto& rec : trace) {
        os << rec.k << ',' << num(rec.time_s) << ',' << num(rec.objective) << ',' << num(rec.e_k) << ','
           << num(rec.primal_res) << ',';
        if (rec.energy) {
            os << num(*rec.energy);
        }
        os << ',' << rec.inner_iters_total();
        for (std::size_t i = 0; i < num_blocks; ++i) {
            os << ',' << (i < rec.deltas.size() ? num(rec.deltas[i]) : "");
        }
        os << '\n';
    }
}

}  // namespace bosvs
