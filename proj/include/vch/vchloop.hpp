#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "vch/estimators.hpp"
#include "vch/histories.hpp"

namespace vch {

// Projector-basis parameterizations. azimuth_xy: one angle per time, basis
// states (|0> +- e^{i phi}|1>)/sqrt(2). single_qubit_general: three angles
// (theta, phi, lambda) per time. stationary: one shared three-angle block for
// every time. layered_multi_qubit: per time, `layers` brick layers of
// two-qubit blocks exp(-i(t1 XX + t2 YY + t3 ZZ)) over adjacent qubit pairs.
enum class AnsatzKind { azimuth_xy, single_qubit_general, stationary, layered_multi_qubit };

struct AnsatzSpec {
    AnsatzKind kind = AnsatzKind::azimuth_xy;
    std::vector<double> params;  // flat, radians
    int layers = 1;              // layered_multi_qubit only

    int block_count(const ModelSpec& model) const;   // k, or 1 for stationary
    int params_per_block(const ModelSpec& model) const;
    int expected_params(const ModelSpec& model) const;
    // Cost period per parameter: pi for azimuth angles (the projector pair is
    // unordered), 2 pi otherwise.
    double period() const;
    void validate(const ModelSpec& model) const;

    AnsatzSpec with_params(std::vector<double> p) const;
};

// Fine-grained family realized by the ansatz: one basis per time, singleton
// rank partition, no branch dependence.
FamilySpec family_from_ansatz(const AnsatzSpec& ansatz, const ModelSpec& model);

// Stationary-family parameters whose first basis column points along the
// given Bloch axis: (theta, phi, lambda) = (acos z, atan2(y, x), 0).
std::vector<double> stationary_params_for_axis(const std::array<double, 3>& axis);

enum class CostMode { full, partial, both, tilde };

// Inconsistency costs. c compares the ancilla state to its dephasing; c_pt
// does the same on the joint system-ancilla state with ancilla-only
// dephasing; p_diag is the purity of the dephased ancilla state and
// c_tilde = c / p_diag. Every entry carries its sampling stderr (0 exact).
struct CostValue {
    double c = 0.0;
    double c_stderr = 0.0;
    std::optional<double> c_pt;
    double c_pt_stderr = 0.0;
    double p_diag = 0.0;
    double p_diag_stderr = 0.0;
    std::optional<double> c_tilde;
    double c_tilde_stderr = 0.0;

    // The entry an optimizer in the given mode minimizes.
    double objective(CostMode which) const;
    double objective_stderr(CostMode which) const;
};

// Build the branched state for the family and assemble the requested costs as
// purity differences. c and p_diag are always filled; c_pt is added for
// partial/both, c_tilde for tilde (when p_diag > 0).
CostValue cost(const ModelSpec& model, const FamilySpec& family, CostMode which, const ShotPlan& plan);
CostValue cost(const ModelSpec& model, const AnsatzSpec& ansatz, CostMode which, const ShotPlan& plan);

// Same assembly from an already-built branched state; n_system_factors is the
// number of leading sigma_sa factors that belong to the system.
CostValue cost_from_state(const BranchedState& state, int n_system_factors, CostMode which, const ShotPlan& plan);

// Linear grid axis: `count` points start + j * (stop - start) / count,
// j in [0, count). The stop value itself is excluded.
struct GridAxis {
    double start = 0.0;
    double stop = 0.0;
    int count = 1;

    double at(int j) const { return start + static_cast<double>(j) * (stop - start) / static_cast<double>(count); }
};

struct LandscapeRow {
    std::vector<double> params;
    CostValue value;
};

// Full-factorial scan, row-major (last axis fastest), one derived shot plan
// per point so the table is independent of evaluation order.
std::vector<LandscapeRow> landscape_scan(const ModelSpec& model, const AnsatzSpec& ansatz_template,
                                         const std::vector<GridAxis>& grid, CostMode which, const ShotPlan& plan);

// Stationary-family scan over explicit Bloch axes (e.g. a sphere mesh); each
// row's params are the axis components (x, y, z).
std::vector<LandscapeRow> sphere_scan(const ModelSpec& model, const std::vector<std::array<double, 3>>& axes,
                                      CostMode which, const ShotPlan& plan);

struct OptimizerConfig {
    int restarts = 20;
    long long max_evals_per_restart = 4000;
    std::optional<double> accept_threshold;  // default 1e-8 exact, 3x stderr sampled
    double dedup_radius = 0.1;               // max-norm, modulo the ansatz period
    double simplex_scale = 0.3;
};

struct Minimum {
    std::vector<double> params;
    CostValue value;
    long long evaluations = 0;      // spent by the restart that found it
    bool budget_exhausted = false;  // stopped on evals, not convergence
};

struct OptimizeResult {
    std::vector<Minimum> minima;  // accepted, deduplicated, cost-ascending
    long long total_evaluations = 0;
    int restarts = 0;
    int accepted_before_dedup = 0;
};

// Random-restart simplex search over the ansatz parameters. Start points are
// uniform over one period per parameter (restart 0 starts at the template's
// own params); candidates are accepted below the threshold and deduplicated
// by periodic max-norm distance, keeping the lowest cost per cluster.
OptimizeResult optimize(const ModelSpec& model, const AnsatzSpec& ansatz_template, CostMode which,
                        const ShotPlan& plan, const OptimizerConfig& opt);

// Derivative-free simplex minimizer (exposed for self-tests). The objective
// returns a value and its sampling stderr; convergence is declared when the
// simplex value spread falls below max(1e-10, 2 * stderr at the best vertex).
struct NoisyValue {
    double value = 0.0;
    double stderr_ = 0.0;
};
using NoisyObjective = std::function<NoisyValue(const std::vector<double>&)>;

struct SimplexResult {
    std::vector<double> point;
    NoisyValue value;
    long long evaluations = 0;
    bool converged = false;
};

SimplexResult nelder_mead(const NoisyObjective& f, const std::vector<double>& start, double scale,
                          long long max_evals);

}  // namespace vch
