#pragma once

#include "bosvs/problem.hpp"
#include "bosvs/subproblem.hpp"

#include <functional>
#include <optional>
#include <string_view>

namespace bosvs {

/// Backtracking parameters shared by every inexact scheme.
/// Invariants: 0 < sigma < 1 < tau <= eta, 0 < delta_min < delta_max.
struct LineSearchParams {
    double sigma = 1e-5;
    double eta = 3.0;
    double delta_min = 1e-10;
    double delta_max = 1e10;
    double tau = 1.1;
    int max_backtracks = 60;

    void validate() const;
};

/// Summable slack added to the line searches, and the disjunctive inner stopping rule
/// (l_i^k >= l_i^{k-1} or Gamma_i^k >= Gamma_i^{k-1}) used in the imaging experiments.
struct RelaxationParams {
    bool line_search = false;
    bool stopping = false;
    double eps_scale = 10.0;  // eps^k = eps_scale / k^eps_power
    double eps_power = 1.1;
    double multistep_omega_power = 1.2;    // omega^l = 1 / (gamma^l)^p
    double accelerated_omega_power = 0.6;

    static RelaxationParams strict() { return {}; }
    static RelaxationParams relaxed() {
        RelaxationParams r;
        r.line_search = true;
        r.stopping = true;
        return r;
    }
    bool any() const noexcept { return line_search || stopping; }
    double epsilon(long k) const;
};

enum class AccelSchedule { Adaptive, Constant };

/// Output of one block update inside an outer iteration.
struct InnerResult {
    Vector x_next;           // x_i^{k+1}
    Vector z;                // z_i^k
    double r = 0.0;          // r_i^k >= 0
    double gamma = 0.0;      // Gamma_i^k > 0 (unchanged for the exact baseline)
    long inner_iters = 1;    // l_i^k
    double delta_final = 0;  // last accepted delta (delta/alpha for the accelerated loop)
    bool gamma_condition_met = true;
};

/// Per-block memory carried from one outer iteration to the next.
struct BlockMemory {
    double delta_min = 1e-10;  // delta_{min,i}
    double delta_prev = 0.0;   // delta_i^{k-1}
    double gamma_prev = 0.0;   // Gamma_i^{k-1}
    long l_prev = 0;           // l_i^{k-1}
};

/// Everything an inner scheme needs to update block i at outer iteration k.
struct BlockContext {
    const Problem* problem = nullptr;
    const BlockSubproblem* solver = nullptr;
    std::size_t block = 0;
    long k = 1;                 // outer iteration counter, starting at 1
    Vector x_cur;               // x_i^k
    std::optional<Vector> x_prev;  // x_i^{k-1}, absent at k = 1
    Vector b_ik;
    Vector lambda;
    double rho = 1.0;

    /// b_ik - lambda / rho
    Vector shifted_rhs() const { return b_ik - lambda / rho; }
};

/// Diagnostics for one accepted inner step, delivered to an InnerObserver.
struct InnerStepInfo {
    std::size_t block = 0;
    long outer_k = 0;
    long l = 0;
    int backtracks = 0;
    double delta0 = 0.0;
    double delta = 0.0;
    double alpha = 1.0;
    double gamma = 0.0;
    const Vector* u = nullptr;  // u^l
    const Vector* a = nullptr;  // running average / accelerated iterate a^l
};

/// Return false to end the inner loop after the current step.
using InnerObserver = std::function<bool(const InnerStepInfo&)>;

struct InnerLoopOptions {
    long max_inner_iters = 10000;
    InnerObserver observer;
};

/// <grad f(x) - grad f(x_prev), x - x_prev> / ||x - x_prev||^2, or nothing when x == x_prev.
std::optional<double> bb_stepsize(const SmoothPart& f, VecCRef x_cur, VecCRef x_prev);

/// Initial stepsize mid{delta_min_i, s_BB, delta_max}; delta_min_i when k = 1 or s_BB is undefined.
double safeguarded_bb(const SmoothPart& f, const BlockContext& ctx, const BlockMemory& mem,
                      const LineSearchParams& ls);

/// argmin_u Phi_i^k(u, v, delta).
Vector prox_linear_step(const BlockContext& ctx, VecCRef v, double delta);
Vector prox_linear_step(const Problem& p, std::size_t i, VecCRef v, double delta, VecCRef b_ik, VecCRef lambda,
                        double rho);

/// One linearized proximal step with BB-initialized backtracking and the delta_min safeguard.
InnerResult generalized_step(const BlockContext& ctx, BlockMemory& mem, const LineSearchParams& ls,
                             const RelaxationParams& relax, const InnerLoopOptions& opts = {});

/// Repeated linearized steps, averaged with weights 1/delta^l, stopped adaptively.
InnerResult multistep_loop(const BlockContext& ctx, BlockMemory& mem, const LineSearchParams& ls,
                           const RelaxationParams& relax, double psi_of_e_prev, const InnerLoopOptions& opts = {});

/// Accelerated inner loop with either the constant (Lipschitz-based) or adaptive schedule.
InnerResult accelerated_loop(const BlockContext& ctx, BlockMemory& mem, const LineSearchParams& ls,
                             const RelaxationParams& relax, double psi_of_e_prev, AccelSchedule schedule,
                             const InnerLoopOptions& opts = {});

/// Approximate argmin of L_i^k: CG on the normal equations when h_i = 0 and f_i is
/// quadratic (stops at ||grad L|| <= cg_tol), closed-form prox when f_i = 0 and
/// A_i^T A_i = cI. r = 0 and Gamma is carried over.
InnerResult exact_block_solve(const BlockContext& ctx, const BlockMemory& mem, double cg_tol = 1e-6,
                              long cg_maxit = 10000);

/// Weighted running average a^l = (1 - alpha^l) a^{l-1} + alpha^l u^l with
/// alpha^l = (1/delta^l) / gamma^l and gamma^l = sum_j 1/delta^j.
class RunningAverage {
public:
    explicit RunningAverage(Vector start) : a_(std::move(start)) {}
    void add(VecCRef u, double delta);
    const Vector& value() const noexcept { return a_; }
    double gamma() const noexcept { return gamma_; }
    double last_alpha() const noexcept { return alpha_; }

private:
    Vector a_;
    double gamma_ = 0.0;
    double alpha_ = 1.0;
};

/// Default psi functions: multistep psi(t) = min{0.1 t, t^1.1}, accelerated psi(t) = 0.5 t.
double psi_multistep(double t);
double psi_accelerated(double t);

}  // namespace bosvs
