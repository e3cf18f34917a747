#include "bosvs/bench.hpp"
#include "bosvs/errors.hpp"
#include "bosvs/outer.hpp"
#include "bosvs/problem_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace {

using namespace bosvs;

/// Options shared by every subcommand that runs the solver.
struct SolverFlags {
    std::string config;
    std::string scheme;
    std::string schedule;
    std::optional<double> rho;
    std::optional<double> alpha;
    std::optional<double> tol;
    std::optional<long> max_iters;
    std::optional<bool> relaxed;
    std::optional<double> cg_tol;
    bool benchmark_thetas = false;

    void add_to(CLI::App* app) {
        app->add_option("--config", config, "JSON parameter file");
        app->add_option("--scheme", scheme,
                        "generalized | multistep | accelerated | exact, or a comma-separated list per block");
        app->add_option("--schedule", schedule, "accelerated step schedule: adaptive | constant");
        app->add_option("--rho", rho, "penalty parameter");
        app->add_option("--alpha", alpha, "back-substitution / multiplier relaxation in (0, 1)");
        app->add_option("--tol", tol, "stopping threshold on e^k");
        app->add_option("--max-iters", max_iters, "outer iteration cap");
        app->add_option("--relaxed", relaxed, "relaxed line search and inner stopping (true/false)");
        app->add_option("--cg-tol", cg_tol, "gradient-norm tolerance of the exact block solves");
        app->add_flag("--benchmark-thetas", benchmark_thetas, "use the imaging-experiment error weights");
    }

    OuterParams build(OuterParams p = {}) const {
        if (!config.empty()) {
            p = load_params(config, p);
        }
        if (!scheme.empty()) {
            p.schemes.clear();
            std::stringstream ss(scheme);
            std::string item;
            while (std::getline(ss, item, ',')) {
                p.schemes.push_back(parse_scheme(item));
            }
        }
        if (!schedule.empty()) {
            p.schedule = parse_schedule(schedule);
        }
        if (rho) {
            p.rho = *rho;
        }
        if (alpha) {
            p.alpha = *alpha;
        }
        if (tol) {
            p.stop_tol = *tol;
        }
        if (max_iters) {
            p.max_outer_iters = *max_iters;
        }
        if (relaxed) {
            p.relax.line_search = p.relax.stopping = *relaxed;
        }
        if (cg_tol) {
            p.exact_cg_tol = *cg_tol;
        }
        if (benchmark_thetas) {
            p.use_benchmark_thetas();
        }
        return p;
    }
};

void print_result(const SolveResult& r) {
    std::printf("status: %s\niterations: %ld\nobjective: %.12e\n", std::string(to_string(r.status)).c_str(),
                r.iterations, r.objective);
}

int cmd_solve(const std::string& problem_file, const SolverFlags& flags, const std::string& trace_path,
              const std::string& summary_path, const std::string& solution_path) {
    const Problem p = load_problem(problem_file);
    const OuterParams params = flags.build();
    const SolveResult r = solve(p, params);
    if (!trace_path.empty()) {
        std::ofstream out(trace_path);
        if (!out) {
            throw Error("cannot write " + trace_path);
        }
        write_trace_csv(out, r.trace, p.num_blocks());
    }
    if (!summary_path.empty()) {
        std::ofstream out(summary_path);
        if (!out) {
            throw Error("cannot write " + summary_path);
        }
        const nlohmann::json j = {{"status", std::string(to_string(r.status))},
                                  {"iterations", r.iterations},
                                  {"objective", r.objective},
                                  {"stop_tol", r.stop_tol},
                                  {"primal_residual", p.residual(r.x).norm()},
                                  {"time_s", r.trace.empty() ? 0.0 : r.trace.back().time_s},
                                  {"params", params_to_json(params)}};
        out << j.dump(2) << '\n';
    }
    if (!solution_path.empty()) {
        std::ofstream out(solution_path);
        if (!out) {
            throw Error("cannot write " + solution_path);
        }
        out << nlohmann::json{{"x", vector_to_json(r.x)}, {"lambda", vector_to_json(r.lambda)}}.dump() << '\n';
    }
    print_result(r);
    return exit_code_for(r.status);
}

int finish_bench(const Problem& p, const SolverFlags& flags, const std::string& out_dir,
                 const std::string& write_problem, const std::string& tag, OuterParams defaults) {
    if (!write_problem.empty()) {
        const std::filesystem::path parent = std::filesystem::path(write_problem).parent_path();
        if (!parent.empty()) {
            std::filesystem::create_directories(parent);
        }
        save_problem(p, write_problem);
    }
    const OuterParams params = flags.build(std::move(defaults));
    BenchmarkOptions opts;
    opts.tag = tag;
    const BenchmarkReport rep = run_benchmark(p, params, out_dir, opts);
    print_result(rep.result);
    std::printf("phi_star: %.12e\nrelative_error: %.3e\n", rep.phi_star,
                std::abs(rep.result.objective - rep.phi_star) / std::max(std::abs(rep.phi_star), 1e-300));
    return rep.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inexact multi-block ADMM (BOSVS) solver and benchmark driver"};
    app.require_subcommand(1);

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "solve a problem file");
    std::string problem_file;
    std::string trace_path;
    std::string summary_path;
    std::string solution_path;
    SolverFlags solve_flags;
    solve_cmd->add_option("--problem", problem_file, "problem JSON file")->required()->check(CLI::ExistingFile);
    solve_flags.add_to(solve_cmd);
    solve_cmd->add_option("--trace", trace_path, "per-iteration trace CSV");
    solve_cmd->add_option("--summary", summary_path, "summary JSON");
    solve_cmd->add_option("--solution", solution_path, "write final x and lambda as JSON");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "generate a synthetic instance and benchmark it");
    bench_cmd->require_subcommand(1);
    std::string out_dir = "bench_out";
    std::string write_problem;
    std::string tag = "run";

    DeblurInstance deblur;
    SolverFlags deblur_flags;
    auto* deblur_cmd = bench_cmd->add_subcommand("deblur", "TV + wavelet deblurring instance");
    Index size = 32;
    deblur_cmd->add_option("--size", size, "image side (power of two >= 8)");
    deblur_cmd->add_option("--seed", deblur.seed, "noise seed");
    deblur_cmd->add_option("--kernel", deblur.kernel_size, "uniform blur kernel side (odd)");
    deblur_cmd->add_option("--snr", deblur.snr_db, "noise level in dB");
    deblur_cmd->add_option("--alpha-tv", deblur.alpha_tv, "total-variation weight");
    deblur_cmd->add_option("--beta", deblur.beta_wav, "wavelet l1 weight");
    deblur_cmd->add_option("--levels", deblur.haar_levels, "Haar levels");
    deblur_flags.add_to(deblur_cmd);
    deblur_cmd->add_option("--out", out_dir, "output directory");
    deblur_cmd->add_option("--write-problem", write_problem, "also save the generated problem file");
    deblur_cmd->add_option("--tag", tag, "output file prefix");

    LassoInstance lasso;
    SolverFlags lasso_flags;
    auto* lasso_cmd = bench_cmd->add_subcommand("lasso", "sparse regression instance");
    lasso_cmd->add_option("--rows", lasso.rows, "observations");
    lasso_cmd->add_option("--cols", lasso.cols, "features");
    lasso_cmd->add_option("--sparsity", lasso.sparsity, "nonzeros of the planted signal");
    lasso_cmd->add_option("--noise", lasso.noise, "observation noise std");
    lasso_cmd->add_option("--beta", lasso.beta, "l1 weight");
    lasso_cmd->add_option("--seed", lasso.seed, "instance seed");
    lasso_flags.add_to(lasso_cmd);
    lasso_cmd->add_option("--out", out_dir, "output directory");
    lasso_cmd->add_option("--write-problem", write_problem, "also save the generated problem file");
    lasso_cmd->add_option("--tag", tag, "output file prefix");

    // refsolve
    auto* ref_cmd = app.add_subcommand("refsolve", "reference optimal value by digit stabilization");
    std::string ref_problem;
    SolverFlags ref_flags;
    ReferenceProtocol protocol;
    ref_cmd->add_option("--problem", ref_problem, "problem JSON file")->required()->check(CLI::ExistingFile);
    ref_flags.add_to(ref_cmd);
    ref_cmd->add_option("--digits", protocol.significant_digits, "significant digits that must settle");
    ref_cmd->add_option("--stable-iters", protocol.stable_iters, "consecutive unchanged iterations");
    ref_cmd->add_option("--cap", protocol.max_outer_iters, "outer iteration cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*solve_cmd) {
            return cmd_solve(problem_file, solve_flags, trace_path, summary_path, solution_path);
        }
        if (*deblur_cmd) {
            deblur.rows = deblur.cols = size;
            deblur.rho = deblur_flags.rho.value_or(deblur.rho);
            OuterParams defaults;
            defaults.rho = deblur.rho;
            defaults.use_benchmark_thetas();
            return finish_bench(make_deblur(deblur), deblur_flags, out_dir, write_problem, tag, defaults);
        }
        if (*lasso_cmd) {
            return finish_bench(make_lasso(lasso), lasso_flags, out_dir, write_problem, tag, OuterParams{});
        }
        if (*ref_cmd) {
            const Problem p = load_problem(ref_problem);
            const ReferenceObjective ref = reference_objective(p, ref_flags.build(), protocol);
            std::printf("phi_star: %.*e\niterations: %ld\nstabilized: %s\n", std::numeric_limits<double>::max_digits10,
                        ref.phi_star, ref.iterations, ref.stabilized ? "true" : "false");
            return ref.stabilized ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
