#include "bosvs/bench.hpp"

#include "bosvs/errors.hpp"
#include "bosvs/problem_io.hpp"
#include "bosvs/prox.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace bosvs {

namespace {

bool power_of_two(Index n) {
    return n > 0 && (n & (n - 1)) == 0;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

}  // namespace

void DeblurInstance::validate() const {
    if (!power_of_two(rows) || !power_of_two(cols) || rows < 8 || cols < 8) {
        throw BadDims("deblur image dimensions must be powers of two >= 8, got " + std::to_string(rows) + "x" +
                      std::to_string(cols));
    }
    if (kernel_size < 1 || kernel_size % 2 == 0) {
        throw BadDims("blur kernel size must be odd and positive, got " + std::to_string(kernel_size));
    }
    if (haar_levels < 1 || (Index{1} << haar_levels) > std::min(rows, cols)) {
        throw BadDims("Haar levels " + std::to_string(haar_levels) + " do not fit a " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " image");
    }
    if (alpha_tv < 0.0 || beta_wav < 0.0) {
        throw InvalidArgument("regularization weights must be nonnegative");
    }
    if (!(rho > 0.0)) {
        throw InvalidArgument("rho must be positive");
    }
    if (std::isnan(snr_db)) {
        throw InvalidArgument("SNR must be a number");
    }
}

Vector make_phantom(Index rows, Index cols) {
    Vector u = Vector::Constant(rows * cols, 0.1);
    const double cr = 0.62 * static_cast<double>(rows);
    const double cc = 0.32 * static_cast<double>(cols);
    const double radius = static_cast<double>(std::min(rows, cols)) / 6.0;
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            double v = 0.1;
            if (r >= rows / 8 && r < 3 * rows / 8 && c >= cols / 8 && c < 5 * cols / 8) {
                v = 0.6;
            }
            if (r >= 5 * rows / 8 && r < 7 * rows / 8 && c >= cols / 2 && c < 7 * cols / 8) {
                v = 0.3;
            }
            const double dr = static_cast<double>(r) + 0.5 - cr;
            const double dc = static_cast<double>(c) + 0.5 - cc;
            if (dr * dr + dc * dc <= radius * radius) {
                v = 1.0;
            }
            u[r * cols + c] = v;
        }
    }
    return u;
}

DeblurData make_deblur_data(const DeblurInstance& cfg) {
    cfg.validate();
    DeblurData d;
    d.phantom = make_phantom(cfg.rows, cfg.cols);
    const BlurOp blur = BlurOp::uniform(cfg.rows, cfg.cols, cfg.kernel_size);
    d.observed = blur.apply(d.phantom);
    if (std::isfinite(cfg.snr_db)) {
        const auto n = static_cast<double>(d.observed.size());
        const double std_dev = d.observed.norm() * std::pow(10.0, -cfg.snr_db / 20.0) / std::sqrt(n);
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < d.observed.size(); ++i) {
            d.observed[i] += std_dev * normal(rng);
        }
    }
    return d;
}

Problem make_deblur(const DeblurInstance& cfg) {
    return make_deblur(cfg, make_deblur_data(cfg));
}

Problem make_deblur(const DeblurInstance& cfg, const DeblurData& data) {
    cfg.validate();
    const Index n = cfg.rows * cfg.cols;
    if (data.observed.size() != n) {
        throw DimensionMismatch("observed image has " + std::to_string(data.observed.size()) + " pixels, expected " +
                                std::to_string(n));
    }
    auto diff = std::make_shared<Diff2DOp>(cfg.rows, cfg.cols);
    auto haar = std::make_shared<HaarOp>(cfg.rows, cfg.cols, cfg.haar_levels);
    auto a1 = std::make_shared<StackOp>(std::vector<LinOpPtr>{diff, haar});
    auto a2 = std::make_shared<EmbeddedIdentityOp>(2 * n, 3 * n, 0, -1.0);
    auto a3 = std::make_shared<EmbeddedIdentityOp>(n, 3 * n, 2 * n, -1.0);
    auto blur = std::make_shared<BlurOp>(BlurOp::uniform(cfg.rows, cfg.cols, cfg.kernel_size));

    std::vector<Block> blocks;
    blocks.push_back(Block{a1, std::make_shared<QuadraticLS>(blur, data.observed), std::make_shared<ZeroNonsmooth>()});
    blocks.push_back(Block{a2, std::make_shared<ZeroSmooth>(), std::make_shared<GroupL2>(cfg.alpha_tv, 2)});
    blocks.push_back(Block{a3, std::make_shared<ZeroSmooth>(), std::make_shared<ScaledL1>(cfg.beta_wav)});
    return Problem(std::move(blocks), Vector::Zero(3 * n));
}

void LassoInstance::validate() const {
    if (rows <= 0 || cols <= 0) {
        throw BadDims("lasso design must have positive dimensions, got " + std::to_string(rows) + "x" +
                      std::to_string(cols));
    }
    if (sparsity < 0 || sparsity > cols) {
        throw BadDims("lasso sparsity " + std::to_string(sparsity) + " outside [0, " + std::to_string(cols) + "]");
    }
    if (noise < 0.0 || beta < 0.0) {
        throw InvalidArgument("lasso noise and beta must be nonnegative");
    }
}

LassoData make_lasso_data(const LassoInstance& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    LassoData d;
    d.F.resize(cfg.rows, cfg.cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.rows));
    for (Index j = 0; j < cfg.cols; ++j) {
        for (Index i = 0; i < cfg.rows; ++i) {
            d.F(i, j) = scale * normal(rng);
        }
    }
    std::vector<Index> idx(static_cast<std::size_t>(cfg.cols));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = 0; i < cfg.sparsity; ++i) {
        std::uniform_int_distribution<Index> pick(i, cfg.cols - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    d.x_true = Vector::Zero(cfg.cols);
    for (Index i = 0; i < cfg.sparsity; ++i) {
        const double g = normal(rng);
        d.x_true[idx[static_cast<std::size_t>(i)]] = (g < 0.0 ? -1.0 : 1.0) * (0.5 + std::abs(g));
    }
    d.f = d.F * d.x_true;
    for (Index i = 0; i < cfg.rows; ++i) {
        d.f[i] += cfg.noise * normal(rng);
    }
    return d;
}

Problem make_lasso(const LassoInstance& cfg) {
    return make_lasso(make_lasso_data(cfg), cfg.beta);
}

Problem make_lasso(const LassoData& data, double beta) {
    const Index n = data.F.cols();
    if (n <= 0 || data.F.rows() <= 0) {
        throw BadDims("lasso design must be non-empty");
    }
    auto F = std::make_shared<DenseOp>(data.F);
    std::vector<Block> blocks;
    blocks.push_back(Block{std::make_shared<EmbeddedIdentityOp>(n, n, 0, 1.0), std::make_shared<QuadraticLS>(F, data.f),
                           std::make_shared<ZeroNonsmooth>()});
    blocks.push_back(Block{std::make_shared<EmbeddedIdentityOp>(n, n, 0, -1.0), std::make_shared<ZeroSmooth>(),
                           std::make_shared<ScaledL1>(beta)});
    return Problem(std::move(blocks), Vector::Zero(n));
}

Vector ista_oracle(const Matrix& F, const Vector& f, double beta, double tol, long maxit) {
    if (!(tol > 0.0)) {
        throw InvalidArgument("ista_oracle: tol must be positive");
    }
    if (F.rows() != f.size()) {
        throw DimensionMismatch("ista_oracle: F has " + std::to_string(F.rows()) + " rows but f has " +
                                std::to_string(f.size()) + " entries");
    }
    const Matrix G = F.transpose() * F;
    const double L = Eigen::SelfAdjointEigenSolver<Matrix>(G, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const Vector Ftf = F.transpose() * f;
    Vector u = Vector::Zero(F.cols());
    if (!(L > 0.0)) {
        return u;
    }
    const double t = 1.0 / L;
    for (long it = 0; it < maxit; ++it) {
        Vector next = soft_threshold(u - t * (G * u - Ftf), t * beta);
        const double res = (next - u).norm();
        u = std::move(next);
        if (res <= tol) {
            return u;
        }
    }
    throw MaxItersReached("ista_oracle: no convergence within " + std::to_string(maxit) + " iterations");
}

std::string significant(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*e", std::max(digits - 1, 0), v);
    return buf;
}

ReferenceObjective reference_objective(const Problem& p, const OuterParams& base, const ReferenceProtocol& protocol) {
    OuterParams params = base;
    params.schemes = {Scheme::Accelerated};
    params.stop_tol = 0.0;
    params.max_outer_iters = protocol.max_outer_iters;

    std::string last;
    int unchanged = 0;
    SolveCallbacks cb;
    cb.should_stop = [&](const TraceRecord& rec) {
        const std::string cur = significant(rec.objective, protocol.significant_digits);
        unchanged = (cur == last) ? unchanged + 1 : 0;
        last = cur;
        return unchanged >= protocol.stable_iters;
    };
    const SolveResult r = solve(p, params, std::nullopt, std::nullopt, cb);
    ReferenceObjective out;
    out.phi_star = r.trace.empty() ? r.objective : r.trace.back().objective;
    out.iterations = r.iterations;
    out.stabilized = r.status != SolveStatus::MaxItersReached;
    return out;
}

int exit_code_for(SolveStatus s) {
    return s == SolveStatus::MaxItersReached ? 2 : 0;
}

BenchmarkReport run_benchmark(const Problem& p, const OuterParams& params, const std::filesystem::path& out_dir,
                              const BenchmarkOptions& opts) {
    std::filesystem::create_directories(out_dir);
    BenchmarkReport rep;
    rep.result = solve(p, params);
    rep.exit_code = exit_code_for(rep.result.status);
    long ref_iters = 0;
    bool ref_stable = true;
    if (opts.phi_star) {
        rep.phi_star = *opts.phi_star;
    } else {
        const ReferenceObjective ref = reference_objective(p, params, opts.protocol);
        rep.phi_star = ref.phi_star;
        ref_iters = ref.iterations;
        ref_stable = ref.stabilized;
    }
    const double denom = rep.phi_star != 0.0 ? std::abs(rep.phi_star) : 1.0;
    const std::size_t m = p.num_blocks();

    {
        auto out = open_out(out_dir / (opts.tag + "_trace.csv"));
        write_trace_csv(out, rep.result.trace, m);
    }
    {
        auto out = open_out(out_dir / (opts.tag + "_plot.dat"));
        out << "# time_s log10_rel_error\n";
        char buf[96];
        for (const auto& rec : rep.result.trace) {
            const double rel = std::max(std::abs(rec.objective - rep.phi_star) / denom, 1e-16);
            std::snprintf(buf, sizeof buf, "%.9g %.9g\n", rec.time_s, std::log10(rel));
            out << buf;
        }
    }
    {
        nlohmann::json schemes = nlohmann::json::array();
        for (std::size_t i = 0; i < m; ++i) {
            schemes.push_back(std::string(to_string(params.scheme_for(i))));
        }
        long inner_total = 0;
        for (const auto& rec : rep.result.trace) {
            inner_total += rec.inner_iters_total();
        }
        const nlohmann::json summary = {
            {"status", std::string(to_string(rep.result.status))},
            {"schemes", schemes},
            {"schedule", std::string(to_string(params.schedule))},
            {"iterations", rep.result.iterations},
            {"objective", rep.result.objective},
            {"phi_star", rep.phi_star},
            {"relative_error", std::abs(rep.result.objective - rep.phi_star) / denom},
            {"reference_iterations", ref_iters},
            {"reference_stabilized", ref_stable},
            {"stop_tol", rep.result.stop_tol},
            {"time_s", rep.result.trace.empty() ? 0.0 : rep.result.trace.back().time_s},
            {"inner_iters_total", inner_total},
            {"params", params_to_json(params)}};
        auto out = open_out(out_dir / (opts.tag + "_summary.json"));
        out << summary.dump(2) << '\n';
    }
    return rep;
}

BenchmarkReport run_benchmark(const std::filesystem::path& problem_file, const OuterParams& params,
                              const std::filesystem::path& out_dir, const BenchmarkOptions& opts) {
    return run_benchmark(load_problem(problem_file), params, out_dir, opts);
}

unsigned max_parallel_runs() {
    if (const char* env = std::getenv("BOSVS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) {
            return static_cast<unsigned>(v);
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void run_matrix(const std::vector<std::function<void()>>& jobs) {
    const std::size_t workers = std::min<std::size_t>(max_parallel_runs(), jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                jobs[i]();
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace bosvs
