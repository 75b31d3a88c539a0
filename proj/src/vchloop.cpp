#include "vch/vchloop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vch/branchstate.hpp"
#include "vch/kernels.hpp"
#include "vch/qmath.hpp"
#include "vch/rng.hpp"

namespace vch {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool all_qubits(const std::vector<int>& dims) {
    return std::all_of(dims.begin(), dims.end(), [](int d) { return d == 2; });
}

Operator azimuth_basis(double phi) {
    const double s = 1.0 / std::sqrt(2.0);
    const cplx w = std::exp(cplx(0.0, phi));
    Operator b;
    b.dims = {2};
    b.entries = {s, s, s * w, -s * w};
    return b;
}

Operator u3_basis(double theta, double phi, double lambda) {
    const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
    Operator b;
    b.dims = {2};
    b.entries = {cplx(c, 0.0), -std::exp(cplx(0.0, lambda)) * s, std::exp(cplx(0.0, phi)) * s,
                 std::exp(cplx(0.0, phi + lambda)) * c};
    return b;
}

// exp(-i (t1 XX + t2 YY + t3 ZZ)) on one qubit pair.
Operator heisenberg_block(double t1, double t2, double t3) {
    Operator h = Operator::zero({2, 2});
    auto add = [&h](int r, int c, cplx v) { h.entries[static_cast<std::size_t>(r * 4 + c)] += v; };
    // XX
    add(0, 3, t1);
    add(1, 2, t1);
    add(2, 1, t1);
    add(3, 0, t1);
    // YY
    add(0, 3, -t2);
    add(1, 2, t2);
    add(2, 1, t2);
    add(3, 0, -t2);
    // ZZ
    add(0, 0, t3);
    add(1, 1, -t3);
    add(2, 2, -t3);
    add(3, 3, t3);
    return evolve_unitary(h, 1.0);
}

// Embed a two-qubit gate on adjacent qubits (q, q+1) of an n-qubit register.
Operator embed_pair(const Operator& g, int q, int n) {
    Operator u = (q == 0) ? g : Operator::identity(std::vector<int>(static_cast<std::size_t>(q), 2));
    if (q != 0) u = tensor(u, g);
    const int rest = n - q - 2;
    if (rest > 0) u = tensor(u, Operator::identity(std::vector<int>(static_cast<std::size_t>(rest), 2)));
    return u;
}

std::vector<std::pair<int, int>> brick_pairs(int layer, int n_qubits) {
    std::vector<std::pair<int, int>> pairs;
    for (int q = layer % 2; q + 1 < n_qubits; q += 2) pairs.emplace_back(q, q + 1);
    return pairs;
}

Operator layered_basis(const double* block_params, int layers, int n_qubits) {
    Operator u = Operator::identity(std::vector<int>(static_cast<std::size_t>(n_qubits), 2));
    std::size_t off = 0;
    for (int l = 0; l < layers; ++l) {
        for (auto [q, q2] : brick_pairs(l, n_qubits)) {
            (void)q2;
            const Operator g = heisenberg_block(block_params[off], block_params[off + 1], block_params[off + 2]);
            off += 3;
            u = kernels::mul(embed_pair(g, q, n_qubits), u);
        }
    }
    return u;
}

int layered_params_per_time(int layers, int n_qubits) {
    int count = 0;
    for (int l = 0; l < layers; ++l) count += 3 * static_cast<int>(brick_pairs(l, n_qubits).size());
    return count;
}

double wrap_into(double x, double period) {
    double r = std::fmod(x, period);
    if (r < 0.0) r += period;
    return r;
}

double periodic_dist(double a, double b, double period) {
    const double d = wrap_into(a - b, period);
    return std::min(d, period - d);
}

}  // namespace

int AnsatzSpec::block_count(const ModelSpec& model) const {
    return kind == AnsatzKind::stationary ? 1 : model.k();
}

int AnsatzSpec::params_per_block(const ModelSpec& model) const {
    switch (kind) {
        case AnsatzKind::azimuth_xy:
            return 1;
        case AnsatzKind::single_qubit_general:
        case AnsatzKind::stationary:
            return 3;
        case AnsatzKind::layered_multi_qubit:
            return layered_params_per_time(layers, static_cast<int>(model.s_dims.size()));
    }
    throw std::logic_error("unreachable ansatz kind");
}

int AnsatzSpec::expected_params(const ModelSpec& model) const {
    return block_count(model) * params_per_block(model);
}

double AnsatzSpec::period() const { return kind == AnsatzKind::azimuth_xy ? kPi : 2.0 * kPi; }

void AnsatzSpec::validate(const ModelSpec& model) const {
    const bool single_qubit_kind =
        kind == AnsatzKind::azimuth_xy || kind == AnsatzKind::single_qubit_general || kind == AnsatzKind::stationary;
    if (single_qubit_kind && model.s_dim() != 2)
        throw std::invalid_argument("ansatz: single-qubit parameterization needs a qubit system");
    if (kind == AnsatzKind::layered_multi_qubit) {
        if (!all_qubits(model.s_dims) || model.s_dims.size() < 2)
            throw std::invalid_argument("ansatz: layered parameterization needs >= 2 system qubits");
        if (layers < 1) throw std::invalid_argument("ansatz: layers must be >= 1");
    }
    if (static_cast<int>(params.size()) != expected_params(model))
        throw std::invalid_argument("ansatz: parameter count does not match kind and times");
}

AnsatzSpec AnsatzSpec::with_params(std::vector<double> p) const {
    AnsatzSpec out = *this;
    out.params = std::move(p);
    return out;
}

FamilySpec family_from_ansatz(const AnsatzSpec& ansatz, const ModelSpec& model) {
    ansatz.validate(model);
    const int per_block = ansatz.params_per_block(model);
    FamilySpec family;
    family.steps.resize(static_cast<std::size_t>(model.k()));
    for (int j = 0; j < model.k(); ++j) {
        const int block = ansatz.kind == AnsatzKind::stationary ? 0 : j;
        const double* p = ansatz.params.data() + static_cast<std::ptrdiff_t>(block) * per_block;
        Operator basis;
        switch (ansatz.kind) {
            case AnsatzKind::azimuth_xy:
                basis = azimuth_basis(p[0]);
                break;
            case AnsatzKind::single_qubit_general:
            case AnsatzKind::stationary:
                basis = u3_basis(p[0], p[1], p[2]);
                break;
            case AnsatzKind::layered_multi_qubit:
                basis = layered_basis(p, ansatz.layers, static_cast<int>(model.s_dims.size()));
                break;
        }
        TimeStep& step = family.steps[static_cast<std::size_t>(j)];
        step.basis = std::move(basis);
        step.rank_partition.resize(static_cast<std::size_t>(model.s_dim()));
        for (int a = 0; a < model.s_dim(); ++a) step.rank_partition[static_cast<std::size_t>(a)] = {a};
    }
    family.validate(model.s_dim());
    return family;
}

std::vector<double> stationary_params_for_axis(const std::array<double, 3>& axis) {
    const double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (norm < 1e-12) throw std::invalid_argument("axis must be nonzero");
    const double z = std::clamp(axis[2] / norm, -1.0, 1.0);
    const double theta = std::acos(z);
    const double phi = (std::abs(axis[0]) + std::abs(axis[1]) < 1e-15) ? 0.0 : std::atan2(axis[1], axis[0]);
    return {theta, phi, 0.0};
}

double CostValue::objective(CostMode which) const {
    switch (which) {
        case CostMode::partial:
            return c_pt.value_or(c);
        case CostMode::tilde:
            return c_tilde.value_or(c);
        default:
            return c;
    }
}

double CostValue::objective_stderr(CostMode which) const {
    switch (which) {
        case CostMode::partial:
            return c_pt ? c_pt_stderr : c_stderr;
        case CostMode::tilde:
            return c_tilde ? c_tilde_stderr : c_stderr;
        default:
            return c_stderr;
    }
}

CostValue cost_from_state(const BranchedState& state, int n_system_factors, CostMode which, const ShotPlan& plan) {
    SubsystemSelector all_a;
    all_a.indices.resize(state.ancilla_dims.size());
    std::iota(all_a.indices.begin(), all_a.indices.end(), 0);

    CostValue out;
    const PurityEstimate pur_a = purity(state.sigma_a, plan, "cost_purity_a");
    const PurityEstimate dia_a = dephased_purity(state.sigma_a, all_a, plan, "cost_dip_a");
    out.c = pur_a.value - dia_a.value;
    out.c_stderr = std::sqrt(pur_a.stderr_ * pur_a.stderr_ + dia_a.stderr_ * dia_a.stderr_);
    out.p_diag = dia_a.value;
    out.p_diag_stderr = dia_a.stderr_;

    if (plan.exact() && out.c < -1e-12) throw NumericalError("cost: exact full-trace cost negative beyond tolerance");

    if (which == CostMode::partial || which == CostMode::both) {
        SubsystemSelector a_in_sa;
        a_in_sa.indices.resize(state.ancilla_dims.size());
        std::iota(a_in_sa.indices.begin(), a_in_sa.indices.end(), n_system_factors);
        const PurityEstimate pur_sa = purity(state.sigma_sa, plan, "cost_purity_sa");
        const PurityEstimate dia_sa = dephased_purity(state.sigma_sa, a_in_sa, plan, "cost_pdip_sa");
        out.c_pt = pur_sa.value - dia_sa.value;
        out.c_pt_stderr = std::sqrt(pur_sa.stderr_ * pur_sa.stderr_ + dia_sa.stderr_ * dia_sa.stderr_);
        if (plan.exact() && *out.c_pt < -1e-12)
            throw NumericalError("cost: exact partial-trace cost negative beyond tolerance");
    }

    if (which == CostMode::tilde && out.p_diag > 0.0) {
        // c_tilde = (purity - P) / P; propagate through both estimates.
        const double p = out.p_diag;
        out.c_tilde = out.c / p;
        const double d_pur = pur_a.stderr_ / p;
        const double d_p = pur_a.value * dia_a.stderr_ / (p * p);
        out.c_tilde_stderr = std::sqrt(d_pur * d_pur + d_p * d_p);
    }
    return out;
}

CostValue cost(const ModelSpec& model, const FamilySpec& family, CostMode which, const ShotPlan& plan) {
    return cost_from_state(build_branched_state(model, family), static_cast<int>(model.s_dims.size()), which, plan);
}

CostValue cost(const ModelSpec& model, const AnsatzSpec& ansatz, CostMode which, const ShotPlan& plan) {
    return cost(model, family_from_ansatz(ansatz, model), which, plan);
}

std::vector<LandscapeRow> landscape_scan(const ModelSpec& model, const AnsatzSpec& ansatz_template,
                                         const std::vector<GridAxis>& grid, CostMode which, const ShotPlan& plan) {
    if (grid.empty()) throw std::invalid_argument("landscape_scan: empty grid");
    if (static_cast<int>(grid.size()) != ansatz_template.expected_params(model))
        throw std::invalid_argument("landscape_scan: one grid axis per ansatz parameter required");
    long long total = 1;
    for (const GridAxis& ax : grid) {
        if (ax.count < 1) throw std::invalid_argument("landscape_scan: axis count must be >= 1");
        total *= ax.count;
    }

    std::vector<LandscapeRow> rows;
    rows.reserve(static_cast<std::size_t>(total));
    std::vector<int> idx(grid.size(), 0);
    for (long long flat = 0; flat < total; ++flat) {
        std::vector<double> params(grid.size());
        for (std::size_t d = 0; d < grid.size(); ++d) params[d] = grid[d].at(idx[d]);
        LandscapeRow row;
        row.params = params;
        row.value = cost(model, ansatz_template.with_params(std::move(params)), which,
                         plan.with_tag_index(static_cast<std::uint64_t>(flat)));
        rows.push_back(std::move(row));
        for (int d = static_cast<int>(grid.size()) - 1; d >= 0; --d) {
            if (++idx[static_cast<std::size_t>(d)] < grid[static_cast<std::size_t>(d)].count) break;
            idx[static_cast<std::size_t>(d)] = 0;
        }
    }
    return rows;
}

std::vector<LandscapeRow> sphere_scan(const ModelSpec& model, const std::vector<std::array<double, 3>>& axes,
                                      CostMode which, const ShotPlan& plan) {
    AnsatzSpec tmpl;
    tmpl.kind = AnsatzKind::stationary;
    std::vector<LandscapeRow> rows;
    rows.reserve(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) {
        LandscapeRow row;
        row.params = {axes[i][0], axes[i][1], axes[i][2]};
        row.value = cost(model, tmpl.with_params(stationary_params_for_axis(axes[i])), which,
                         plan.with_tag_index(static_cast<std::uint64_t>(i)));
        rows.push_back(std::move(row));
    }
    return rows;
}

SimplexResult nelder_mead(const NoisyObjective& f, const std::vector<double>& start, double scale,
                          long long max_evals) {
    const std::size_t n = start.size();
    if (n == 0) throw std::invalid_argument("nelder_mead: empty start point");

    struct Vertex {
        std::vector<double> x;
        NoisyValue v;
    };
    long long evals = 0;
    auto eval = [&](std::vector<double> x) {
        ++evals;
        NoisyValue v = f(x);
        return Vertex{std::move(x), v};
    };

    std::vector<Vertex> simplex;
    simplex.reserve(n + 1);
    simplex.push_back(eval(start));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x = start;
        x[i] += scale;
        simplex.push_back(eval(std::move(x)));
    }
    auto by_value = [](const Vertex& a, const Vertex& b) { return a.v.value < b.v.value; };
    std::stable_sort(simplex.begin(), simplex.end(), by_value);

    bool converged = false;
    while (evals < max_evals) {
        const double spread = simplex.back().v.value - simplex.front().v.value;
        const double tol = std::max(1e-10, 2.0 * simplex.front().v.stderr_);
        if (spread < tol) {
            converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i].x[d];
        }
        for (double& cd : centroid) cd /= static_cast<double>(n);
        const Vertex& worst = simplex.back();

        auto blend = [&](double t) {
            std::vector<double> x(n);
            for (std::size_t d = 0; d < n; ++d) x[d] = centroid[d] + t * (centroid[d] - worst.x[d]);
            return x;
        };

        Vertex reflected = eval(blend(1.0));
        if (reflected.v.value < simplex.front().v.value) {
            Vertex expanded = eval(blend(2.0));
            simplex.back() = expanded.v.value < reflected.v.value ? std::move(expanded) : std::move(reflected);
        } else if (reflected.v.value < simplex[n - 1].v.value) {
            simplex.back() = std::move(reflected);
        } else {
            const bool outside = reflected.v.value < worst.v.value;
            Vertex contracted = eval(blend(outside ? 0.5 : -0.5));
            const double bar = outside ? reflected.v.value : worst.v.value;
            if (contracted.v.value < bar) {
                simplex.back() = std::move(contracted);
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    std::vector<double> x(n);
                    for (std::size_t d = 0; d < n; ++d) x[d] = simplex[0].x[d] + 0.5 * (simplex[i].x[d] - simplex[0].x[d]);
                    simplex[i] = eval(std::move(x));
                }
            }
        }
        std::stable_sort(simplex.begin(), simplex.end(), by_value);
    }

    return {simplex.front().x, simplex.front().v, evals, converged};
}

OptimizeResult optimize(const ModelSpec& model, const AnsatzSpec& ansatz_template, CostMode which,
                        const ShotPlan& plan, const OptimizerConfig& opt) {
    const int n_params = ansatz_template.expected_params(model);
    // An empty template means no preferred start point; every restart random.
    ansatz_template
        .with_params(ansatz_template.params.empty() ? std::vector<double>(static_cast<std::size_t>(n_params), 0.0)
                                                    : ansatz_template.params)
        .validate(model);
    const double period = ansatz_template.period();

    OptimizeResult result;
    result.restarts = opt.restarts;
    std::vector<Minimum> accepted;

    for (int r = 0; r < opt.restarts; ++r) {
        std::vector<double> start;
        if (r == 0 && !ansatz_template.params.empty()) {
            start = ansatz_template.params;
        } else {
            RngStream rng = RngStream::derive(plan.seed, "optimize_start", static_cast<std::uint64_t>(r));
            start.resize(static_cast<std::size_t>(n_params));
            for (double& p : start) p = rng.next_uniform() * period;
        }

        long long eval_serial = 0;
        auto objective = [&](const std::vector<double>& x) {
            const std::uint64_t ix =
                (static_cast<std::uint64_t>(r) << 32) | static_cast<std::uint64_t>(eval_serial++);
            const CostValue v = cost(model, ansatz_template.with_params(x), which, plan.with_tag_index(ix));
            return NoisyValue{v.objective(which), v.objective_stderr(which)};
        };

        SimplexResult run = nelder_mead(objective, start, opt.simplex_scale, opt.max_evals_per_restart);
        result.total_evaluations += run.evaluations;

        // Fresh evaluation at the terminal point for the reported value.
        const std::uint64_t ix = (static_cast<std::uint64_t>(r) << 32) | static_cast<std::uint64_t>(eval_serial++);
        const CostValue terminal = cost(model, ansatz_template.with_params(run.point), which, plan.with_tag_index(ix));
        result.total_evaluations += 1;

        const double threshold = opt.accept_threshold
                                     ? *opt.accept_threshold
                                     : (plan.exact() ? 1e-8 : 3.0 * terminal.objective_stderr(which));
        if (terminal.objective(which) <= threshold) {
            accepted.push_back(Minimum{run.point, terminal, run.evaluations + 1, !run.converged});
        }
    }

    result.accepted_before_dedup = static_cast<int>(accepted.size());
    std::stable_sort(accepted.begin(), accepted.end(),
                     [which](const Minimum& a, const Minimum& b) { return a.value.objective(which) < b.value.objective(which); });
    for (const Minimum& cand : accepted) {
        const bool duplicate = std::any_of(result.minima.begin(), result.minima.end(), [&](const Minimum& kept) {
            double dist = 0.0;
            for (std::size_t d = 0; d < cand.params.size(); ++d)
                dist = std::max(dist, periodic_dist(cand.params[d], kept.params[d], period));
            return dist < opt.dedup_radius;
        });
        if (!duplicate) result.minima.push_back(cand);
    }
    return result;
}

}  // namespace vch
