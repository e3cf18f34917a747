#include "bosvs/problem_io.hpp"

#include "bosvs/errors.hpp"
#include "bosvs/prox.hpp"

#include <cmath>
#include <fstream>

namespace bosvs {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParseError(std::string("missing field '") + key + "'");
    }
    return j.at(key);
}

std::string type_of(const json& j) {
    return field(j, "type").get<std::string>();
}

Matrix matrix_from_rows(const json& rows) {
    if (!rows.is_array() || rows.empty()) {
        throw ParseError("matrix must be a non-empty array of rows");
    }
    const Index r = static_cast<Index>(rows.size());
    const Index c = static_cast<Index>(rows.front().size());
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i) {
        const json& row = rows.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Index>(row.size()) != c) {
            throw ParseError("matrix rows must all have the same length");
        }
        for (Index jx = 0; jx < c; ++jx) {
            m(i, jx) = row.at(static_cast<std::size_t>(jx)).get<double>();
        }
    }
    return m;
}

json matrix_to_rows(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index jx = 0; jx < m.cols(); ++jx) {
            row.push_back(m(i, jx));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

json vector_to_json(VecCRef v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        a.push_back(v[i]);
    }
    return a;
}

Vector vector_from_json(const json& j) {
    if (j.is_object() && j.contains("zeros")) {
        return Vector::Zero(j.at("zeros").get<Index>());
    }
    if (!j.is_array()) {
        throw ParseError("vector must be an array or {\"zeros\": n}");
    }
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Index>(i)] = j[i].get<double>();
    }
    return v;
}

LinOpPtr linop_from_json(const json& j) {
    const std::string t = type_of(j);
    if (t == "dense") {
        Matrix m = matrix_from_rows(field(j, "data"));
        if (j.contains("rows") && j.at("rows").get<Index>() != m.rows()) {
            throw ParseError("dense operator: 'rows' disagrees with data");
        }
        if (j.contains("cols") && j.at("cols").get<Index>() != m.cols()) {
            throw ParseError("dense operator: 'cols' disagrees with data");
        }
        return std::make_shared<DenseOp>(std::move(m));
    }
    if (t == "identity" || t == "negidentity") {
        const Index n = field(j, "n").get<Index>();
        const Index rows = j.value("rows", n);
        const Index offset = j.value("offset", Index{0});
        double scale = j.value("scale", 1.0);
        if (t == "negidentity") {
            scale = -scale;
        }
        return std::make_shared<EmbeddedIdentityOp>(n, rows, offset, scale);
    }
    if (t == "haar") {
        return std::make_shared<HaarOp>(field(j, "image_rows").get<Index>(), field(j, "image_cols").get<Index>(),
                                        field(j, "levels").get<int>());
    }
    if (t == "diff2d") {
        return std::make_shared<Diff2DOp>(field(j, "image_rows").get<Index>(), field(j, "image_cols").get<Index>());
    }
    if (t == "blur") {
        const Index r = field(j, "image_rows").get<Index>();
        const Index c = field(j, "image_cols").get<Index>();
        if (j.contains("kernel")) {
            return std::make_shared<BlurOp>(r, c, matrix_from_rows(j.at("kernel")));
        }
        return std::make_shared<BlurOp>(BlurOp::uniform(r, c, field(j, "size").get<Index>()));
    }
    if (t == "stack") {
        std::vector<LinOpPtr> parts;
        for (const auto& pj : field(j, "parts")) {
            parts.push_back(linop_from_json(pj));
        }
        return std::make_shared<StackOp>(std::move(parts));
    }
    throw ParseError("unknown operator type '" + t + "'");
}

json linop_to_json(const LinOp& op) {
    if (const auto* d = dynamic_cast<const DenseOp*>(&op)) {
        return {{"type", "dense"}, {"rows", d->rows()}, {"cols", d->cols()}, {"data", matrix_to_rows(d->matrix())}};
    }
    if (const auto* e = dynamic_cast<const EmbeddedIdentityOp*>(&op)) {
        const Embedding emb = *e->embedding();
        json j = {{"type", emb.scale < 0.0 ? "negidentity" : "identity"},
                  {"n", e->cols()},
                  {"rows", e->rows()},
                  {"offset", emb.offset}};
        const double mag = std::abs(emb.scale);
        if (mag != 1.0) {
            j["scale"] = mag;
        }
        return j;
    }
    if (const auto* h = dynamic_cast<const HaarOp*>(&op)) {
        return {{"type", "haar"},
                {"image_rows", h->image_rows()},
                {"image_cols", h->image_cols()},
                {"levels", h->levels()}};
    }
    if (const auto* df = dynamic_cast<const Diff2DOp*>(&op)) {
        return {{"type", "diff2d"}, {"image_rows", df->image_rows()}, {"image_cols", df->image_cols()}};
    }
    if (const auto* b = dynamic_cast<const BlurOp*>(&op)) {
        return {{"type", "blur"},
                {"image_rows", b->image_rows()},
                {"image_cols", b->image_cols()},
                {"kernel", matrix_to_rows(b->kernel())}};
    }
    if (const auto* s = dynamic_cast<const StackOp*>(&op)) {
        json parts = json::array();
        for (const auto& p : s->parts()) {
            parts.push_back(linop_to_json(*p));
        }
        return {{"type", "stack"}, {"parts", parts}};
    }
    return {{"type", "dense"}, {"rows", op.rows()}, {"cols", op.cols()}, {"data", matrix_to_rows(op.to_dense())}};
}

SmoothPtr smooth_from_json(const json& j) {
    const std::string t = type_of(j);
    if (t == "zero") {
        return std::make_shared<ZeroSmooth>();
    }
    if (t == "quadratic_ls") {
        std::optional<double> lip;
        if (j.contains("lipschitz")) {
            lip = j.at("lipschitz").get<double>();
        }
        return std::make_shared<QuadraticLS>(linop_from_json(field(j, "F")), vector_from_json(field(j, "data")), lip);
    }
    throw ParseError("unknown smooth part '" + t + "'");
}

json smooth_to_json(const SmoothPart& f) {
    if (f.is_zero()) {
        return {{"type", "zero"}};
    }
    if (const auto* q = dynamic_cast<const QuadraticLS*>(&f)) {
        json j = {{"type", "quadratic_ls"}, {"F", linop_to_json(q->op())}, {"data", vector_to_json(q->data())}};
        if (auto lip = q->lipschitz()) {
            j["lipschitz"] = *lip;
        }
        return j;
    }
    throw ParseError("smooth part '" + f.name() + "' cannot be serialized");
}

NonsmoothPtr nonsmooth_from_json(const json& j) {
    const std::string t = type_of(j);
    if (t == "zero") {
        return std::make_shared<ZeroNonsmooth>();
    }
    if (t == "l1") {
        return std::make_shared<ScaledL1>(field(j, "weight").get<double>());
    }
    if (t == "group_l2") {
        return std::make_shared<GroupL2>(field(j, "weight").get<double>(), j.value("group_size", Index{2}));
    }
    if (t == "box") {
        return std::make_shared<BoxIndicator>(vector_from_json(field(j, "lo")), vector_from_json(field(j, "hi")));
    }
    throw ParseError("unknown nonsmooth part '" + t + "'");
}

json nonsmooth_to_json(const NonsmoothPart& h) {
    if (h.is_zero()) {
        return {{"type", "zero"}};
    }
    if (const auto* l1 = dynamic_cast<const ScaledL1*>(&h)) {
        return {{"type", "l1"}, {"weight", l1->weight()}};
    }
    if (const auto* g = dynamic_cast<const GroupL2*>(&h)) {
        return {{"type", "group_l2"}, {"weight", g->weight()}, {"group_size", g->group_size()}};
    }
    if (const auto* b = dynamic_cast<const BoxIndicator*>(&h)) {
        return {{"type", "box"}, {"lo", vector_to_json(b->lo())}, {"hi", vector_to_json(b->hi())}};
    }
    throw ParseError("nonsmooth part '" + h.name() + "' cannot be serialized");
}

Problem problem_from_json(const json& j) {
    const std::string schema = field(j, "schema").get<std::string>();
    if (schema != kProblemSchema) {
        throw ParseError("unsupported problem schema '" + schema + "' (expected " + std::string(kProblemSchema) + ")");
    }
    std::vector<Block> blocks;
    for (const auto& bj : field(j, "blocks")) {
        blocks.push_back(Block{linop_from_json(field(bj, "A")), smooth_from_json(field(bj, "f")),
                               nonsmooth_from_json(field(bj, "h"))});
    }
    return Problem(std::move(blocks), vector_from_json(field(j, "b")));
}

json problem_to_json(const Problem& p) {
    json blocks = json::array();
    for (const auto& b : p.blocks()) {
        blocks.push_back({{"A", linop_to_json(*b.A)}, {"f", smooth_to_json(*b.f)}, {"h", nonsmooth_to_json(*b.h)}});
    }
    json bj = p.b().isZero(0.0) ? json{{"zeros", p.rows()}} : vector_to_json(p.b());
    return {{"schema", std::string(kProblemSchema)}, {"b", bj}, {"blocks", blocks}};
}

OuterParams params_from_json(const json& j, OuterParams p) {
    if (!j.is_object()) {
        throw ParseError("parameter config must be a JSON object");
    }
    bool benchmark_thetas = false;
    for (const auto& [key, v] : j.items()) {
        if (key == "rho") {
            p.rho = v.get<double>();
        } else if (key == "alpha") {
            p.alpha = v.get<double>();
        } else if (key == "theta") {
            const auto t = v.get<std::vector<double>>();
            if (t.size() != 3) {
                throw ParseError("'theta' needs exactly three entries");
            }
            p.theta = {t[0], t[1], t[2]};
        } else if (key == "benchmark_thetas") {
            benchmark_thetas = v.get<bool>();
        } else if (key == "stop_tol") {
            if (v.is_null()) {
                p.stop_tol.reset();
            } else {
                p.stop_tol = v.get<double>();
            }
        } else if (key == "max_outer_iters") {
            p.max_outer_iters = v.get<long>();
        } else if (key == "schemes" || key == "scheme") {
            p.schemes.clear();
            if (v.is_string()) {
                p.schemes.push_back(parse_scheme(v.get<std::string>()));
            } else {
                for (const auto& s : v) {
                    p.schemes.push_back(parse_scheme(s.get<std::string>()));
                }
            }
        } else if (key == "schedule") {
            p.schedule = parse_schedule(v.get<std::string>());
        } else if (key == "sigma") {
            p.line_search.sigma = v.get<double>();
        } else if (key == "eta") {
            p.line_search.eta = v.get<double>();
        } else if (key == "delta_min") {
            p.line_search.delta_min = v.get<double>();
        } else if (key == "delta_max") {
            p.line_search.delta_max = v.get<double>();
        } else if (key == "tau") {
            p.line_search.tau = v.get<double>();
        } else if (key == "max_backtracks") {
            p.line_search.max_backtracks = v.get<int>();
        } else if (key == "relaxed") {
            p.relax.line_search = p.relax.stopping = v.get<bool>();
        } else if (key == "relaxed_line_search") {
            p.relax.line_search = v.get<bool>();
        } else if (key == "relaxed_stopping") {
            p.relax.stopping = v.get<bool>();
        } else if (key == "eps_scale") {
            p.relax.eps_scale = v.get<double>();
        } else if (key == "eps_power") {
            p.relax.eps_power = v.get<double>();
        } else if (key == "exact_cg_tol") {
            p.exact_cg_tol = v.get<double>();
        } else if (key == "exact_cg_maxit") {
            p.exact_cg_maxit = v.get<long>();
        } else if (key == "max_inner_iters") {
            p.max_inner_iters = v.get<long>();
        } else if (key == "report") {
            const auto r = v.get<std::string>();
            if (r == "z") {
                p.report = ReportPoint::Z;
            } else if (r == "next") {
                p.report = ReportPoint::XNext;
            } else {
                throw ParseError("'report' must be \"z\" or \"next\"");
            }
        } else {
            throw ParseError("unknown parameter '" + key + "'");
        }
    }
    if (benchmark_thetas) {
        p.use_benchmark_thetas();
    }
    p.line_search.validate();
    return p;
}

json params_to_json(const OuterParams& p) {
    json schemes = json::array();
    for (Scheme s : p.schemes) {
        schemes.push_back(std::string(to_string(s)));
    }
    json j = {{"rho", p.rho},
              {"alpha", p.alpha},
              {"theta", p.theta},
              {"max_outer_iters", p.max_outer_iters},
              {"schemes", schemes},
              {"schedule", std::string(to_string(p.schedule))},
              {"sigma", p.line_search.sigma},
              {"eta", p.line_search.eta},
              {"delta_min", p.line_search.delta_min},
              {"delta_max", p.line_search.delta_max},
              {"tau", p.line_search.tau},
              {"max_backtracks", p.line_search.max_backtracks},
              {"relaxed_line_search", p.relax.line_search},
              {"relaxed_stopping", p.relax.stopping},
              {"eps_scale", p.relax.eps_scale},
              {"eps_power", p.relax.eps_power},
              {"exact_cg_tol", p.exact_cg_tol},
              {"exact_cg_maxit", p.exact_cg_maxit},
              {"max_inner_iters", p.max_inner_iters},
              {"report", p.report == ReportPoint::Z ? "z" : "next"}};
    j["stop_tol"] = p.stop_tol ? json(*p.stop_tol) : json(nullptr);
    return j;
}

OuterParams load_params(const std::filesystem::path& path, OuterParams base) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open parameter file " + path.string());
    }
    try {
        json j;
        in >> j;
        return params_from_json(j, std::move(base));
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

Problem load_problem(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open problem file " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    try {
        return problem_from_json(j);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_problem(const Problem& p, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write problem file " + path.string());
    }
    out << problem_to_json(p).dump() << '\n';
}

}  // namespace bosvs
