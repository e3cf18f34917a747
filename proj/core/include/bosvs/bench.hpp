#pragma once

#include "bosvs/outer.hpp"
#include "bosvs/problem.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bosvs {

/// Synthetic total-variation + wavelet deblurring instance:
///   min 1/2 ||F u - f||^2 + alpha_tv ||B u||_{1,2} + beta_wav ||Psi^T u||_1
/// split into blocks u, w = B u, z = Psi^T u.
struct DeblurInstance {
    Index rows = 32;
    Index cols = 32;
    /// Side of the uniform blur kernel (odd). A size of 1 gives the identity blur.
    Index kernel_size = 3;
    /// Signal-to-noise ratio in dB; infinity disables the noise.
    double snr_db = 40.0;
    double alpha_tv = 0.005;
    double beta_wav = 0.001;
    double rho = 5e-4;
    int haar_levels = 2;
    std::uint64_t seed = 1;

    void validate() const;
};

struct DeblurData {
    Vector phantom;   // ground truth image, row-major
    Vector observed;  // blurred + noisy image
};

/// Piecewise-constant phantom (two rectangles and a disk) with values in [0, 1].
Vector make_phantom(Index rows, Index cols);
DeblurData make_deblur_data(const DeblurInstance& cfg);
/// Blocks: A1 = (B; Psi^T), A2 = (-I; 0), A3 = (0; -I); b = 0.
Problem make_deblur(const DeblurInstance& cfg);
Problem make_deblur(const DeblurInstance& cfg, const DeblurData& data);

/// Sparse regression instance min 1/2 ||F u - f||^2 + beta ||z||_1 s.t. u - z = 0.
struct LassoInstance {
    Index rows = 60;
    Index cols = 100;
    Index sparsity = 8;
    double noise = 0.01;
    double beta = 0.1;
    std::uint64_t seed = 1;

    void validate() const;
};

struct LassoData {
    Matrix F;
    Vector f;
    Vector x_true;
};

LassoData make_lasso_data(const LassoInstance& cfg);
Problem make_lasso(const LassoInstance& cfg);
Problem make_lasso(const LassoData& data, double beta);

/// Proximal gradient on 1/2 ||F u - f||^2 + beta ||u||_1 with step 1/||F^T F||_2, stopped
/// when ||u - prox(u - t grad)|| <= tol. Throws MaxItersReached after maxit iterations.
Vector ista_oracle(const Matrix& F, const Vector& f, double beta, double tol, long maxit = 1000000);

/// Settings of the reference-objective protocol: accelerated BOSVS until the objective's
/// eighth significant digit is unchanged over `stable_iters` consecutive iterations.
struct ReferenceProtocol {
    int significant_digits = 8;
    int stable_iters = 4;
    long max_outer_iters = 50000;
};

struct ReferenceObjective {
    double phi_star = 0.0;
    long iterations = 0;
    bool stabilized = false;
};

/// `base` supplies rho, alpha, the line-search and stopping settings; the scheme is forced
/// to accelerated BOSVS and e^k-based termination is disabled.
ReferenceObjective reference_objective(const Problem& p, const OuterParams& base,
                                       const ReferenceProtocol& protocol = {});

/// Formats `v` with `digits` significant digits (scientific notation).
std::string significant(double v, int digits);

struct BenchmarkOptions {
    /// Optional precomputed optimal value; computed by reference_objective when absent.
    std::optional<double> phi_star;
    ReferenceProtocol protocol;
    std::string tag = "run";
};

struct BenchmarkReport {
    SolveResult result;
    double phi_star = 0.0;
    int exit_code = 0;
};

/// Solves `p` with `params`, then writes <tag>_trace.csv, <tag>_summary.json and
/// <tag>_plot.dat (time and log10 relative objective error) to out_dir.
BenchmarkReport run_benchmark(const Problem& p, const OuterParams& params, const std::filesystem::path& out_dir,
                              const BenchmarkOptions& opts = {});
/// Loads the problem file first; IO and parse failures propagate as exceptions.
BenchmarkReport run_benchmark(const std::filesystem::path& problem_file, const OuterParams& params,
                              const std::filesystem::path& out_dir, const BenchmarkOptions& opts = {});

/// 0 on convergence, 2 when the iteration cap was hit.
int exit_code_for(SolveStatus s);

/// Parallelism cap for run matrices: BOSVS_THREADS when set to a positive integer,
/// otherwise the hardware concurrency (at least 1).
unsigned max_parallel_runs();

/// Runs independent jobs on at most `max_parallel_runs()` threads. Exceptions from jobs
/// are rethrown after all jobs finish (the first one wins).
void run_matrix(const std::vector<std::function<void()>>& jobs);

}  // namespace bosvs
