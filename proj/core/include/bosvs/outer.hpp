#pragma once

#include "bosvs/backsub.hpp"
#include "bosvs/inner.hpp"
#include "bosvs/problem.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bosvs {

enum class Scheme { Generalized, Multistep, Accelerated, Exact };

std::string_view to_string(Scheme s);
/// "generalized", "multistep", "accelerated", "exact".
Scheme parse_scheme(std::string_view name);
std::string_view to_string(AccelSchedule s);
AccelSchedule parse_schedule(std::string_view name);

/// Which iterate the trace objective is evaluated at.
enum class ReportPoint { Z, XNext };

struct OuterParams {
    double rho = 1.0;
    double alpha = 0.999;
    std::array<double, 3> theta{1.0, 1.0, 1.0};
    /// Termination threshold on e^k; when unset, 1e-8 (1 + |Phi(z^1)|). Zero disables it.
    std::optional<double> stop_tol;
    long max_outer_iters = 10000;
    /// One entry applies to every block; otherwise one per block.
    std::vector<Scheme> schemes{Scheme::Accelerated};
    AccelSchedule schedule = AccelSchedule::Adaptive;
    LineSearchParams line_search;
    RelaxationParams relax;
    /// Inner accuracy function; defaults to psi_multistep / psi_accelerated per scheme.
    std::function<double(double)> psi;
    double exact_cg_tol = 1e-6;
    long exact_cg_maxit = 10000;
    long max_inner_iters = 10000;
    ReportPoint report = ReportPoint::Z;

    /// Stopping weights used in the imaging experiments:
    /// theta1 = 1e-6 sqrt(rho), theta2 = sqrt(rho), theta3 = 1e-6 sqrt(sigma / (1 - alpha)).
    void use_benchmark_thetas();
    Scheme scheme_for(std::size_t block) const;
    void validate(std::size_t num_blocks) const;
};

/// Full iterate tuple plus per-block memory. y^1 = x^1 at initialization, e^0 = infinity.
struct OuterState {
    Vector x;       // x^k
    Vector y;       // y^k
    Vector z;       // z^{k-1} (last averaged iterate; equals x before the first step)
    Vector lambda;  // lambda^k
    std::optional<Vector> x_prev;  // x^{k-1}
    std::vector<BlockMemory> blocks;
    double e_prev = kInfinity;
    long k = 1;

    static OuterState initial(const Problem& p, const Vector& x0, const Vector& lambda0,
                              const LineSearchParams& ls);
    static OuterState initial(const Problem& p, const LineSearchParams& ls);
};

struct TraceRecord {
    long k = 0;
    double time_s = 0.0;
    double objective = 0.0;
    double e_k = 0.0;
    double primal_res = 0.0;
    std::optional<double> energy;
    std::vector<long> inner_iters;
    std::vector<double> deltas;
    std::vector<double> gammas;

    long inner_iters_total() const;
};

/// A solution/multiplier pair used as the reference point of the decay energy.
struct Reference {
    Vector x;
    Vector lambda;
};

/// Per-solve cache of block subproblem solvers.
class Workspace {
public:
    explicit Workspace(const Problem& p);
    const BlockSubproblem& solver(std::size_t i) const { return *solvers_.at(i); }

private:
    std::vector<std::unique_ptr<BlockSubproblem>> solvers_;
};

struct StepHooks {
    InnerObserver on_inner;
    const Reference* reference = nullptr;
};

struct StepOutput {
    OuterState state;  // state for iteration k + 1
    TraceRecord record;
    std::vector<InnerResult> inner;
};

/// theta1 ||z_+ - y_+|| + theta2 ||A z - b|| + theta3 sqrt(sum_i r_i). Block 0 is excluded
/// from the first term. Throws InvalidArgument (negative r) when any r_i < 0.
double error_measure(const std::array<double, 3>& theta, const Vector& z, const Vector& y,
                     std::span<const double> r, const Problem& p);

/// rho ||y_+ - x*_+||_P^2 + (1/rho) ||lambda - lambda*||^2 + alpha sum_i w_i ||x_i - x*_i||^2
/// with P = M H^{-1} M^T. The block weights w_i are delta_i^k for generalized blocks,
/// 1/Gamma_i^k for multistep/accelerated blocks and 0 for exact blocks.
double energy_E(const Problem& p, const Vector& x, const Vector& y, VecCRef lambda,
                std::span<const double> block_weights, double rho, double alpha, const Reference* reference,
                const BackSubMatrices& bs);

/// Block weights for energy_E from the inner results of iteration k.
std::vector<double> energy_weights(const OuterParams& params, std::span<const InnerResult> inner);

/// One pass of Steps 1-3: block updates in index order, e^k, back substitution and the
/// multiplier update lambda^{k+1} = lambda^k + alpha rho (A z^k - b).
StepOutput outer_step(const Problem& p, const OuterState& s, const OuterParams& params,
                      const BackSubMatrices& bs, const Workspace& ws, const StepHooks& hooks = {});

enum class SolveStatus { Converged, MaxItersReached, Stopped };

struct SolveCallbacks {
    std::function<void(const TraceRecord&, const OuterState&)> on_iteration;
    InnerObserver on_inner;
    const Reference* reference = nullptr;
    /// Returning true ends the run after the current iteration with status Stopped.
    std::function<bool(const TraceRecord&)> should_stop;
};

struct SolveResult {
    Vector x;       // z^k at termination
    Vector lambda;  // lambda^k at termination
    Vector x_next;  // x^{k+1}
    SolveStatus status = SolveStatus::MaxItersReached;
    long iterations = 0;
    double objective = 0.0;
    double stop_tol = 0.0;
    std::vector<TraceRecord> trace;
    OuterState final_state;
};

/// Runs outer iterations until e^k <= stop_tol or the iteration cap.
SolveResult solve(const Problem& p, const OuterParams& params, const std::optional<Vector>& x0 = std::nullopt,
                  const std::optional<Vector>& lambda0 = std::nullopt, const SolveCallbacks& callbacks = {});

/// Trace CSV: k,time_s,objective,e_k,primal_res,E_k,inner_iters_total,delta_1..delta_m
void write_trace_csv(std::ostream& os, std::span<const TraceRecord> trace, std::size_t num_blocks);
std::string_view to_string(SolveStatus s);

}  // namespace bosvs
