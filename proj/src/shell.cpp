#include "vch/shell.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "vch/branchstate.hpp"
#include "vch/models.hpp"
#include "vch/qmath.hpp"
#include "vch/tomlmini.hpp"

namespace vch::shell {

namespace {

using toml::ParseError;
using toml::Value;

[[noreturn]] void config_fail(const std::string& what) { throw ParseError("config: " + what); }

void check_keys(const Value& table, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [key, unused] : table.table) {
        (void)unused;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&key](const char* a) { return key == a; }) == allowed.end())
            config_fail("unknown key '" + key + "' in " + where);
    }
}

const Value& require_key(const Value& table, const std::string& key, const std::string& where) {
    const auto it = table.table.find(key);
    if (it == table.table.end()) config_fail("missing key '" + key + "' in " + where);
    return it->second;
}

// Matrices arrive as nested arrays: rows of cells, each cell a [re, im] pair.
Operator parse_matrix(const Value& v, const std::vector<int>& dims, const std::string& where) {
    if (!v.is_array()) config_fail(where + " must be an array of rows");
    Operator op = Operator::zero(dims);
    const int n = op.side();
    if (static_cast<int>(v.array.size()) != n)
        config_fail(where + ": expected " + std::to_string(n) + " rows, got " + std::to_string(v.array.size()));
    for (int r = 0; r < n; ++r) {
        const Value& row = v.array[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.array.size()) != n)
            config_fail(where + ": row " + std::to_string(r) + " must hold " + std::to_string(n) + " cells");
        for (int c = 0; c < n; ++c) {
            const Value& cell = row.array[static_cast<std::size_t>(c)];
            if (!cell.is_array() || cell.array.size() != 2 || !cell.array[0].is_number() || !cell.array[1].is_number())
                config_fail(where + ": cell (" + std::to_string(r) + ", " + std::to_string(c) +
                            ") must be a [re, im] pair");
            op.entries[static_cast<std::size_t>(r * n + c)] =
                cplx(cell.array[0].as_double(), cell.array[1].as_double());
        }
    }
    return op;
}

std::vector<int> parse_dims(const Value& v, const std::string& where) {
    if (!v.is_array() || v.array.empty()) config_fail(where + " must be a nonempty array of dimensions");
    std::vector<int> dims;
    for (const Value& d : v.array) {
        const long long x = d.as_int();
        if (x < 1 || x > 4096) config_fail(where + ": dimension out of range");
        dims.push_back(static_cast<int>(x));
    }
    return dims;
}

ModelSpec build_model(const Value& block) {
    const std::string name = require_key(block, "name", "[model]").as_string();
    if (name == "spin_field") {
        check_keys(block, {"name", "gamma_b_dt", "k"}, "[model]");
        SpinFieldConfig cfg;
        if (const Value* v = toml::find(block, "gamma_b_dt")) cfg.gamma_b_dt = v->as_double();
        if (const Value* v = toml::find(block, "k")) cfg.k = static_cast<int>(v->as_int());
        return spin_field_model(cfg);
    }
    if (name == "chiral") {
        check_keys(block, {"name", "theta_z", "theta_x", "collisions"}, "[model]");
        ChiralConfig cfg;
        cfg.theta_z = require_key(block, "theta_z", "[model]").as_double();
        cfg.theta_x = require_key(block, "theta_x", "[model]").as_double();
        if (const Value* v = toml::find(block, "collisions")) cfg.collisions = static_cast<int>(v->as_int());
        return chiral_model(cfg);
    }
    if (name == "custom") {
        check_keys(block, {"name", "s_dims", "e_dims", "rho", "segment"}, "[model]");
        ModelSpec model;
        model.s_dims = parse_dims(require_key(block, "s_dims", "[model]"), "[model] s_dims");
        if (const Value* v = toml::find(block, "e_dims")) model.e_dims = parse_dims(*v, "[model] e_dims");
        model.rho = parse_matrix(require_key(block, "rho", "[model]"), model.se_dims(), "[model] rho");
        const Value& segs = require_key(block, "segment", "[model]");
        if (!segs.is_array() || segs.array.empty()) config_fail("[model] needs at least one [[model.segment]]");
        for (std::size_t j = 0; j < segs.array.size(); ++j) {
            const Value& s = segs.array[j];
            const std::string where = "[[model.segment]] #" + std::to_string(j + 1);
            check_keys(s, {"unitary", "hamiltonian", "dt"}, where);
            const Value* u = toml::find(s, "unitary");
            const Value* h = toml::find(s, "hamiltonian");
            if ((u != nullptr) == (h != nullptr)) config_fail(where + " needs exactly one of unitary | hamiltonian");
            Segment segment;
            if (u != nullptr) {
                segment.op = parse_matrix(*u, model.se_dims(), where + " unitary");
            } else {
                segment.op = parse_matrix(*h, model.se_dims(), where + " hamiltonian");
                segment.dt = require_key(s, "dt", where).as_double();
            }
            model.segments.push_back(std::move(segment));
        }
        model.validate();
        return model;
    }
    config_fail("[model] name must be spin_field | chiral | custom, got '" + name + "'");
}

AnsatzKind parse_ansatz_kind(std::string kind) {
    std::replace(kind.begin(), kind.end(), '-', '_');
    if (kind == "azimuth_xy") return AnsatzKind::azimuth_xy;
    if (kind == "single_qubit_general") return AnsatzKind::single_qubit_general;
    if (kind == "stationary") return AnsatzKind::stationary;
    if (kind == "layered_multi_qubit") return AnsatzKind::layered_multi_qubit;
    config_fail("[ansatz] kind must be azimuth_xy | single_qubit_general | stationary | layered_multi_qubit");
}

AnsatzSpec build_ansatz(const Value& block) {
    check_keys(block, {"kind", "params", "layers"}, "[ansatz]");
    AnsatzSpec ansatz;
    ansatz.kind = parse_ansatz_kind(require_key(block, "kind", "[ansatz]").as_string());
    if (const Value* v = toml::find(block, "layers")) ansatz.layers = static_cast<int>(v->as_int());
    if (const Value* v = toml::find(block, "params")) {
        if (!v->is_array()) config_fail("[ansatz] params must be an array");
        for (const Value& p : v->array) ansatz.params.push_back(p.as_double());
    }
    return ansatz;
}

CostMode parse_cost_mode(const std::string& mode) {
    if (mode == "full") return CostMode::full;
    if (mode == "partial") return CostMode::partial;
    if (mode == "both") return CostMode::both;
    if (mode == "tilde") return CostMode::tilde;
    config_fail("[cost] mode must be full | partial | both | tilde, got '" + mode + "'");
}

const char* cost_mode_name(CostMode m) {
    switch (m) {
        case CostMode::full: return "full";
        case CostMode::partial: return "partial";
        case CostMode::both: return "both";
        case CostMode::tilde: return "tilde";
    }
    return "full";
}

HistoryLabel parse_label(const std::string& s, const std::string& where) {
    if (s.empty()) config_fail(where + " must be a nonempty outcome string like \"01\"");
    HistoryLabel label;
    for (char c : s) {
        if (c < '0' || c > '9') config_fail(where + ": outcome characters must be digits");
        label.push_back(c - '0');
    }
    return label;
}

std::string label_string(const HistoryLabel& label) {
    std::string s;
    for (int a : label) s += static_cast<char>('0' + a);
    return s;
}

void validate_label(const HistoryLabel& label, const FamilySpec& family, const std::string& where) {
    if (static_cast<int>(label.size()) != family.k())
        config_fail(where + ": label length must equal the number of times (" + std::to_string(family.k()) + ")");
    for (int j = 0; j < family.k(); ++j)
        if (label[static_cast<std::size_t>(j)] < 0 || label[static_cast<std::size_t>(j)] >= family.outcomes(j))
            config_fail(where + ": outcome " + std::to_string(label[static_cast<std::size_t>(j)]) +
                        " out of range at time " + std::to_string(j + 1));
}

// --- serialization ---------------------------------------------------------

class JsonWriter {
public:
    void begin_object() {
        prefix();
        out_ += '{';
        fresh_.push_back(true);
    }
    void end_object() {
        out_ += '}';
        fresh_.pop_back();
    }
    void begin_array() {
        prefix();
        out_ += '[';
        fresh_.push_back(true);
    }
    void end_array() {
        out_ += ']';
        fresh_.pop_back();
    }
    void key(const std::string& k) {
        prefix();
        quote(k);
        out_ += ':';
        after_key_ = true;
    }
    void string(const std::string& s) {
        prefix();
        quote(s);
    }
    void number(double v) {
        prefix();
        out_ += std::isfinite(v) ? format_number(v) : "null";
    }
    void integer(long long v) {
        prefix();
        out_ += std::to_string(v);
    }
    void boolean(bool v) {
        prefix();
        out_ += v ? "true" : "false";
    }
    const std::string& str() const { return out_; }

private:
    void prefix() {
        if (after_key_) {
            after_key_ = false;
            return;
        }
        if (!fresh_.empty()) {
            if (!fresh_.back()) out_ += ',';
            fresh_.back() = false;
        }
    }
    void quote(const std::string& s) {
        out_ += '"';
        for (char c : s) {
            switch (c) {
                case '"': out_ += "\\\""; break;
                case '\\': out_ += "\\\\"; break;
                case '\n': out_ += "\\n"; break;
                case '\t': out_ += "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "\\u%04x", c);
                        out_ += buf;
                    } else {
                        out_ += c;
                    }
            }
        }
        out_ += '"';
    }

    std::string out_;
    std::vector<bool> fresh_;
    bool after_key_ = false;
};

void write_cost_json(JsonWriter& w, const CostValue& v) {
    w.begin_object();
    w.key("c");
    w.number(v.c);
    w.key("c_stderr");
    w.number(v.c_stderr);
    if (v.c_pt) {
        w.key("c_pt");
        w.number(*v.c_pt);
        w.key("c_pt_stderr");
        w.number(v.c_pt_stderr);
    }
    w.key("p_diag");
    w.number(v.p_diag);
    w.key("p_diag_stderr");
    w.number(v.p_diag_stderr);
    if (v.c_tilde) {
        w.key("c_tilde");
        w.number(*v.c_tilde);
        w.key("c_tilde_stderr");
        w.number(v.c_tilde_stderr);
    }
    w.end_object();
}

void write_report_json(JsonWriter& w, const ConsistencyReport& report) {
    w.begin_object();
    w.key("retained");
    w.begin_array();
    for (const RetainedHistory& r : report.retained) {
        w.begin_object();
        w.key("label");
        w.string(label_string(r.label));
        w.key("probability");
        w.number(r.probability);
        w.key("count");
        w.integer(r.count);
        w.end_object();
    }
    w.end_array();
    w.key("remainder_probability");
    w.number(report.remainder_probability);
    w.key("n_readout");
    w.integer(report.n_readout);
    w.key("epsilon_pairs");
    w.begin_array();
    for (const EpsilonPairEntry& e : report.epsilon_pairs) {
        w.begin_object();
        w.key("a");
        w.string(label_string(e.a));
        w.key("b");
        w.string(label_string(e.b));
        w.key("eps");
        w.number(e.eps);
        w.key("defined");
        w.boolean(e.defined);
        w.end_object();
    }
    w.end_array();
    w.key("delta");
    w.number(report.delta);
    w.key("epsilon_bound");
    w.number(report.epsilon_bound);
    w.key("high_entropy");
    w.boolean(report.high_entropy);
    w.key("cost");
    write_cost_json(w, report.cost_at_solution);
    w.end_object();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) config_fail("cannot open output file '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) config_fail("failed writing output file '" + path + "'");
}

}  // namespace

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

RunConfig load_config(const std::string& path) {
    const Value root = toml::parse_file(path);
    check_keys(root, {"model", "ansatz", "cost", "shots", "grid", "optimizer", "readout", "element", "output"},
               "the top level");

    RunConfig cfg;
    const Value* model = toml::find(root, "model");
    if (model == nullptr) config_fail("[model] block is required");
    cfg.model = build_model(*model);

    if (const Value* v = toml::find(root, "ansatz")) {
        cfg.ansatz = build_ansatz(*v);
        cfg.has_ansatz = true;
    }
    if (const Value* v = toml::find(root, "cost")) {
        check_keys(*v, {"mode"}, "[cost]");
        cfg.which = parse_cost_mode(require_key(*v, "mode", "[cost]").as_string());
    }
    if (const Value* v = toml::find(root, "shots")) {
        check_keys(*v, {"shots", "seed"}, "[shots]");
        if (const Value* s = toml::find(*v, "shots")) {
            if (s->kind == Value::Kind::string) {
                if (s->as_string() != "exact") config_fail("[shots] shots must be an integer or \"exact\"");
                cfg.plan.shots = 0;
            } else {
                const long long n = s->as_int();
                if (n < 0) config_fail("[shots] shots must be >= 0 (0 means exact)");
                cfg.plan.shots = n;
            }
        }
        if (const Value* s = toml::find(*v, "seed")) cfg.plan.seed = static_cast<std::uint64_t>(s->as_int());
    }
    if (const Value* v = toml::find(root, "grid")) {
        check_keys(*v, {"mesh", "subdivisions", "axis"}, "[grid]");
        if (const Value* mesh = toml::find(*v, "mesh")) {
            if (mesh->as_string() != "icosphere") config_fail("[grid] mesh must be \"icosphere\"");
            cfg.sphere_mesh = true;
            if (const Value* s = toml::find(*v, "subdivisions")) cfg.mesh_subdivisions = static_cast<int>(s->as_int());
            if (toml::find(*v, "axis") != nullptr) config_fail("[grid] mesh and [[grid.axis]] are exclusive");
        } else {
            const Value* axes = toml::find(*v, "axis");
            if (axes == nullptr || !axes->is_array() || axes->array.empty())
                config_fail("[grid] needs [[grid.axis]] entries or mesh = \"icosphere\"");
            for (std::size_t i = 0; i < axes->array.size(); ++i) {
                const Value& ax = axes->array[i];
                const std::string where = "[[grid.axis]] #" + std::to_string(i + 1);
                check_keys(ax, {"start", "stop", "count"}, where);
                GridAxis axis;
                axis.start = require_key(ax, "start", where).as_double();
                axis.stop = require_key(ax, "stop", where).as_double();
                axis.count = static_cast<int>(require_key(ax, "count", where).as_int());
                if (axis.count < 1) config_fail(where + ": count must be >= 1");
                cfg.grid.push_back(axis);
            }
        }
    }
    if (const Value* v = toml::find(root, "optimizer")) {
        check_keys(*v, {"restarts", "max_evals", "accept_threshold", "dedup_radius", "simplex_scale"}, "[optimizer]");
        if (const Value* s = toml::find(*v, "restarts")) cfg.optimizer.restarts = static_cast<int>(s->as_int());
        if (const Value* s = toml::find(*v, "max_evals")) cfg.optimizer.max_evals_per_restart = s->as_int();
        if (const Value* s = toml::find(*v, "accept_threshold")) cfg.optimizer.accept_threshold = s->as_double();
        if (const Value* s = toml::find(*v, "dedup_radius")) cfg.optimizer.dedup_radius = s->as_double();
        if (const Value* s = toml::find(*v, "simplex_scale")) cfg.optimizer.simplex_scale = s->as_double();
        if (cfg.optimizer.restarts < 1) config_fail("[optimizer] restarts must be >= 1");
        if (cfg.optimizer.max_evals_per_restart < 8) config_fail("[optimizer] max_evals must be >= 8");
    }
    if (const Value* v = toml::find(root, "readout")) {
        check_keys(*v, {"n", "eps_max", "sampled", "rule"}, "[readout]");
        if (const Value* s = toml::find(*v, "n")) cfg.readout.n_readout = s->as_int();
        if (const Value* s = toml::find(*v, "eps_max")) cfg.readout.eps_max = s->as_double();
        if (const Value* s = toml::find(*v, "sampled")) cfg.readout.sampled = s->as_bool();
        if (const Value* s = toml::find(*v, "rule")) {
            const std::string rule = s->as_string();
            if (rule == "poisson")
                cfg.readout.rule = RetentionRule::poisson_count;
            else if (rule == "sqrt_n")
                cfg.readout.rule = RetentionRule::sqrt_n_frequency;
            else
                config_fail("[readout] rule must be poisson | sqrt_n");
        }
    }
    if (const Value* v = toml::find(root, "element")) {
        check_keys(*v, {"a", "b", "part"}, "[element]");
        cfg.element_a = parse_label(require_key(*v, "a", "[element]").as_string(), "[element] a");
        cfg.element_b = parse_label(require_key(*v, "b", "[element]").as_string(), "[element] b");
        if (const Value* s = toml::find(*v, "part")) {
            const std::string part = s->as_string();
            if (part == "real")
                cfg.element_part = ElementPart::real_part;
            else if (part == "imag" || part == "imaginary")
                cfg.element_part = ElementPart::imaginary_part;
            else
                config_fail("[element] part must be real | imag");
        }
    }
    if (const Value* v = toml::find(root, "output")) {
        check_keys(*v, {"path"}, "[output]");
        if (const Value* s = toml::find(*v, "path")) cfg.out_path = s->as_string();
    }

    cfg.readout.seed = cfg.plan.seed;
    return cfg;
}

namespace {

void require_out(const RunConfig& cfg) {
    if (cfg.out_path.empty()) config_fail("an output path is required (--out or [output] path)");
}

void require_ansatz(const RunConfig& cfg, bool with_params) {
    if (!cfg.has_ansatz) config_fail("[ansatz] block is required for this command");
    if (with_params && cfg.ansatz.params.empty()) config_fail("[ansatz] params are required for this command");
}

}  // namespace

int cmd_landscape(const RunConfig& cfg) {
    require_out(cfg);
    std::vector<LandscapeRow> rows;
    std::size_t n_params = 0;
    if (cfg.sphere_mesh) {
        if (cfg.has_ansatz && cfg.ansatz.kind != AnsatzKind::stationary)
            config_fail("a sphere-mesh landscape uses the stationary ansatz");
        const SphereMesh mesh = icosphere(cfg.mesh_subdivisions);
        rows = sphere_scan(cfg.model, mesh.vertices, cfg.which, cfg.plan);
        n_params = 3;
    } else {
        if (cfg.grid.empty()) config_fail("[grid] block is required for landscape");
        require_ansatz(cfg, false);
        rows = landscape_scan(cfg.model, cfg.ansatz, cfg.grid, cfg.which, cfg.plan);
        n_params = cfg.grid.size();
    }

    std::string csv;
    for (std::size_t i = 0; i < n_params; ++i) csv += "param_" + std::to_string(i + 1) + ",";
    csv += "cost,cost_stderr\n";
    for (const LandscapeRow& row : rows) {
        for (double p : row.params) {
            csv += format_number(p);
            csv += ',';
        }
        csv += format_number(row.value.objective(cfg.which));
        csv += ',';
        csv += format_number(row.value.objective_stderr(cfg.which));
        csv += '\n';
    }
    write_file(cfg.out_path, csv);
    return 0;
}

int cmd_optimize(const RunConfig& cfg) {
    require_out(cfg);
    require_ansatz(cfg, false);
    const OptimizeResult result = optimize(cfg.model, cfg.ansatz, cfg.which, cfg.plan, cfg.optimizer);

    JsonWriter w;
    w.begin_object();
    w.key("command");
    w.string("optimize");
    w.key("seed");
    w.integer(static_cast<long long>(cfg.plan.seed));
    w.key("shots");
    w.integer(cfg.plan.shots);
    w.key("cost_mode");
    w.string(cost_mode_name(cfg.which));
    w.key("restarts");
    w.integer(result.restarts);
    w.key("total_evaluations");
    w.integer(result.total_evaluations);
    w.key("accepted_before_dedup");
    w.integer(result.accepted_before_dedup);
    w.key("minima");
    w.begin_array();
    for (std::size_t i = 0; i < result.minima.size(); ++i) {
        const Minimum& m = result.minima[i];
        w.begin_object();
        w.key("params");
        w.begin_array();
        for (double p : m.params) w.number(p);
        w.end_array();
        w.key("cost");
        write_cost_json(w, m.value);
        w.key("evaluations");
        w.integer(m.evaluations);
        w.key("budget_exhausted");
        w.boolean(m.budget_exhausted);
        w.key("report");
        const FamilySpec family = family_from_ansatz(cfg.ansatz.with_params(m.params), cfg.model);
        const ShotPlan report_plan = cfg.plan.with_tag_index((1ull << 48) + i);
        ReadoutConfig readout = cfg.readout;
        readout.seed = report_plan.seed;
        write_report_json(w, consistency_report(cfg.model, family, cfg.which, report_plan, readout));
        w.end_object();
    }
    w.end_array();
    w.end_object();
    write_file(cfg.out_path, w.str() + "\n");
    return 0;
}

int cmd_probabilities(const RunConfig& cfg) {
    require_out(cfg);
    require_ansatz(cfg, true);
    const FamilySpec family = family_from_ansatz(cfg.ansatz, cfg.model);
    const ConsistencyReport report = consistency_report(cfg.model, family, cfg.which, cfg.plan, cfg.readout);

    JsonWriter w;
    w.begin_object();
    w.key("command");
    w.string("probabilities");
    w.key("seed");
    w.integer(static_cast<long long>(cfg.plan.seed));
    w.key("shots");
    w.integer(cfg.plan.shots);
    w.key("cost_mode");
    w.string(cost_mode_name(cfg.which));
    w.key("params");
    w.begin_array();
    for (double p : cfg.ansatz.params) w.number(p);
    w.end_array();
    w.key("report");
    write_report_json(w, report);
    w.end_object();
    write_file(cfg.out_path, w.str() + "\n");
    return 0;
}

int cmd_element(const RunConfig& cfg, std::ostream& echo) {
    require_ansatz(cfg, true);
    if (cfg.element_a.empty() || cfg.element_b.empty()) config_fail("[element] block with labels a and b is required");
    const FamilySpec family = family_from_ansatz(cfg.ansatz, cfg.model);
    validate_label(cfg.element_a, family, "[element] a");
    validate_label(cfg.element_b, family, "[element] b");

    const BranchedState state = build_branched_state(cfg.model, family);
    const ElementEstimate est =
        element_readout(state, family, cfg.element_a, cfg.element_b, cfg.element_part, cfg.plan);

    const char* part = cfg.element_part == ElementPart::real_part ? "real" : "imag";
    echo << "D[" << label_string(cfg.element_a) << "," << label_string(cfg.element_b) << "] " << part << " = "
         << format_number(est.value) << " +/- " << format_number(est.stderr_) << "\n";

    if (!cfg.out_path.empty()) {
        JsonWriter w;
        w.begin_object();
        w.key("command");
        w.string("element");
        w.key("seed");
        w.integer(static_cast<long long>(cfg.plan.seed));
        w.key("shots");
        w.integer(cfg.plan.shots);
        w.key("a");
        w.string(label_string(cfg.element_a));
        w.key("b");
        w.string(label_string(cfg.element_b));
        w.key("part");
        w.string(part);
        w.key("value");
        w.number(est.value);
        w.key("stderr");
        w.number(est.stderr_);
        w.end_object();
        write_file(cfg.out_path, w.str() + "\n");
    }
    return 0;
}

int cmd_verify(std::ostream& echo) {
    // Route equivalence: the operator-product and record-circuit constructions
    // must agree entrywise, and the purity-difference costs must match the
    // off-diagonal sums, over a seeded random corpus with coarse graining and
    // branch dependence included.
    constexpr int kSeeds = 40;
    double worst_full = 0.0, worst_partial = 0.0, worst_cost_full = 0.0, worst_cost_partial = 0.0;
    for (int seed = 1; seed <= kSeeds; ++seed) {
        const int s_dim = 2 + seed % 3;
        const int e_dim = 1 + seed % 4;
        const int k = 1 + seed % 3;
        const RandomModel rm = random_model(s_dim, e_dim, k, static_cast<std::uint64_t>(seed));

        const DecoherenceMatrix d_full = decoherence_matrix(rm.model, rm.family, DecoherenceMatrix::Mode::full);
        const DecoherenceMatrix d_part = decoherence_matrix(rm.model, rm.family, DecoherenceMatrix::Mode::partial);
        const BranchedState state = build_branched_state(rm.model, rm.family);

        const std::vector<HistoryLabel> labels = all_labels(rm.family);
        double c_full_oracle = 0.0, c_part_oracle = 0.0;
        for (std::size_t a = 0; a < labels.size(); ++a) {
            for (std::size_t b = 0; b < labels.size(); ++b) {
                const cplx lhs = element_full(state, rm.family, labels[a], labels[b]);
                worst_full = std::max(worst_full,
                                      std::abs(lhs - d_full.full_at(static_cast<long long>(a), static_cast<long long>(b))));
                const Operator blk = element_partial(state, rm.family, labels[a], labels[b]);
                worst_partial = std::max(
                    worst_partial,
                    std::sqrt(hs_distance_sq(blk, d_part.block_at(static_cast<long long>(a), static_cast<long long>(b)))));
                if (a != b) {
                    c_full_oracle += std::norm(d_full.full_at(static_cast<long long>(a), static_cast<long long>(b)));
                    const Operator& pb = d_part.block_at(static_cast<long long>(a), static_cast<long long>(b));
                    for (const cplx& v : pb.entries) c_part_oracle += std::norm(v);
                }
            }
        }
        if (worst_full >= 1e-12) {
            echo << "FAIL record-circuit route equivalence (full trace): seed " << seed << " deviation "
                 << format_number(worst_full) << "\n";
            return 1;
        }
        if (worst_partial >= 1e-12) {
            echo << "FAIL record-circuit route equivalence (partial trace): seed " << seed << " deviation "
                 << format_number(worst_partial) << "\n";
            return 1;
        }

        const CostValue cv = cost(rm.model, rm.family, CostMode::both, ShotPlan{});
        worst_cost_full = std::max(worst_cost_full, std::abs(cv.c - c_full_oracle));
        worst_cost_partial = std::max(worst_cost_partial, std::abs(*cv.c_pt - c_part_oracle));
        if (worst_cost_full >= 1e-12) {
            echo << "FAIL purity-difference cost identity (full trace): seed " << seed << " deviation "
                 << format_number(worst_cost_full) << "\n";
            return 1;
        }
        if (worst_cost_partial >= 1e-12) {
            echo << "FAIL purity-difference cost identity (partial trace): seed " << seed << " deviation "
                 << format_number(worst_cost_partial) << "\n";
            return 1;
        }
    }
    echo << "PASS record-circuit route equivalence (full trace), " << kSeeds << " seeds, max deviation "
         << format_number(worst_full) << "\n";
    echo << "PASS record-circuit route equivalence (partial trace), " << kSeeds << " seeds, max deviation "
         << format_number(worst_partial) << "\n";
    echo << "PASS purity-difference cost identity (full trace), " << kSeeds << " seeds, max deviation "
         << format_number(worst_cost_full) << "\n";
    echo << "PASS purity-difference cost identity (partial trace), " << kSeeds << " seeds, max deviation "
         << format_number(worst_cost_partial) << "\n";
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"variational consistent-histories simulator"};
    app.require_subcommand(1);

    std::string config_path, out_path, shots_arg;
    std::optional<std::uint64_t> seed_arg;
    int workers = 0;

    struct SubSpec {
        const char* name;
        const char* blurb;
        bool needs_config;
    };
    const SubSpec subs[] = {
        {"landscape", "scan the cost over a parameter grid or sphere mesh into a CSV table", true},
        {"optimize", "run the restarted simplex search and report minima as JSON", true},
        {"probabilities", "report probabilities and epsilon bounds at fixed parameters as JSON", true},
        {"element", "estimate one decoherence-functional element", true},
        {"verify", "run the route-equivalence and cost-identity property suites", false},
    };
    for (const SubSpec& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.blurb);
        auto* config_opt = sub->add_option("--config", config_path, "TOML config file");
        if (s.needs_config) config_opt->required();
        sub->add_option("--seed", seed_arg, "override the config seed");
        sub->add_option("--shots", shots_arg, "override the shot budget: a count, or \"exact\"");
        sub->add_option("--workers", workers, "worker threads for the parallel kernels");
        sub->add_option("--out", out_path, "output file path");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
#ifdef _OPENMP
        if (workers > 0) omp_set_num_threads(workers);
#endif
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "verify") return cmd_verify(std::cout);

        RunConfig cfg = load_config(config_path);
        if (seed_arg) {
            cfg.plan.seed = *seed_arg;
            cfg.readout.seed = *seed_arg;
        }
        if (!shots_arg.empty()) {
            if (shots_arg == "exact") {
                cfg.plan.shots = 0;
            } else {
                std::size_t used = 0;
                long long n = 0;
                try {
                    n = std::stoll(shots_arg, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != shots_arg.size() || n < 0) config_fail("--shots must be a nonnegative count or \"exact\"");
                cfg.plan.shots = n;
            }
        }
        if (!out_path.empty()) cfg.out_path = out_path;

        if (cmd == "landscape") return cmd_landscape(cfg);
        if (cmd == "optimize") return cmd_optimize(cfg);
        if (cmd == "probabilities") return cmd_probabilities(cfg);
        if (cmd == "element") return cmd_element(cfg, std::cout);
        config_fail("unknown command '" + cmd + "'");
    } catch (const ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 3;
    }
}

}  // namespace vch::shell
