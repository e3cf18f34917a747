#pragma once

#include "bosvs/outer.hpp"
#include "bosvs/problem.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string_view>

namespace bosvs {

/// Current problem file schema tag.
inline constexpr std::string_view kProblemSchema = "bosvs.problem/1";

/// Problem file layout (JSON):
///
///   { "schema": "bosvs.problem/1",
///     "b": [...] | {"zeros": N},
///     "blocks": [ {"A": op, "f": smooth, "h": nonsmooth}, ... ] }
///
/// op:        dense {rows, cols, data: [[...], ...]} | identity/negidentity {n, rows?, offset?, scale?}
///            | haar {image_rows, image_cols, levels} | diff2d {image_rows, image_cols}
///            | blur {image_rows, image_cols, size | kernel} | stack {parts: [op, ...]}
/// smooth:    zero | quadratic_ls {F: op, data: [...], lipschitz?}
/// nonsmooth: zero | l1 {weight} | group_l2 {weight, group_size} | box {lo, hi}
Problem problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const Problem& p);

LinOpPtr linop_from_json(const nlohmann::json& j);
nlohmann::json linop_to_json(const LinOp& op);
SmoothPtr smooth_from_json(const nlohmann::json& j);
nlohmann::json smooth_to_json(const SmoothPart& f);
NonsmoothPtr nonsmooth_from_json(const nlohmann::json& j);
nlohmann::json nonsmooth_to_json(const NonsmoothPart& h);

Problem load_problem(const std::filesystem::path& path);
void save_problem(const Problem& p, const std::filesystem::path& path);

/// Solver parameters as a flat JSON object. Recognized keys: rho, alpha, theta ([3]),
/// benchmark_thetas (bool), stop_tol, max_outer_iters, schemes (name or list), schedule,
/// sigma, eta, delta_min, delta_max, tau, max_backtracks, relaxed (bool),
/// relaxed_line_search, relaxed_stopping, eps_scale, eps_power, exact_cg_tol,
/// exact_cg_maxit, max_inner_iters, report ("z" or "next"). Keys absent from `j` keep the
/// values of `base`; unknown keys raise ParseError.
OuterParams params_from_json(const nlohmann::json& j, OuterParams base = {});
nlohmann::json params_to_json(const OuterParams& p);
OuterParams load_params(const std::filesystem::path& path, OuterParams base = {});

nlohmann::json vector_to_json(VecCRef v);
Vector vector_from_json(const nlohmann::json& j);

}  // namespace bosvs
