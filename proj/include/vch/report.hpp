#pragma once

#include <cstdint>
#include <vector>

#include "vch/branchstate.hpp"
#include "vch/histories.hpp"
#include "vch/vchloop.hpp"

namespace vch {

// Which histories survive the readout budget. poisson_count keeps counts
// f >= ceil(1/eps_max^2), the relative-precision criterion; sqrt_n_frequency
// keeps f >= sqrt(n_readout)/eps_max and exists as a compatibility mode (it
// ties the cutoff to the budget rather than the precision, so the two rules
// disagree except when n_readout = 1/eps_max^4).
enum class RetentionRule { poisson_count, sqrt_n_frequency };

struct RetainedHistory {
    HistoryLabel label;
    double probability = 0.0;
    long long count = 0;  // draw count; expected count on the exact path
};

struct ReadoutConfig {
    long long n_readout = 1000000;
    bool sampled = false;  // false: retention thresholds exact diagonals
    double eps_max = 0.1;  // in (0, 1]
    std::uint64_t seed = 0;
    RetentionRule rule = RetentionRule::poisson_count;
};

struct ReadoutResult {
    std::vector<RetainedHistory> retained;  // probability-descending
    double remainder_probability = 1.0;     // everything not retained
    long long n_readout = 0;
};

// Sampled mode draws n_readout history labels from the ancilla diagonal and
// keeps those over the retention threshold, reporting p = f / n_readout.
// Exact mode keeps labels whose exact diagonal clears threshold/n_readout.
ReadoutResult probability_readout(const BranchedState& state, const ReadoutConfig& cfg);

struct EpsilonPairEntry {
    HistoryLabel a;
    HistoryLabel b;
    double eps = 0.0;
    bool defined = true;  // false when a diagonal underflows
};

struct EpsilonBounds {
    std::vector<EpsilonPairEntry> pairs;  // retained-pair order (i < j)
    double delta = 0.0;
    double bound = 0.0;  // max(pairs, delta)
};

// Bound chain from the scalar cost: every off-diagonal obeys |D|^2 <= C/2,
// so eps(a, b) = sqrt(C / (2 p_a p_b)); delta^2 = remainder / least retained.
// Negative sampled costs are clamped to zero. Requires nonempty retained.
EpsilonBounds epsilon_bounds(double cost_c, const std::vector<RetainedHistory>& retained,
                             double remainder_probability);
// Same chain with C derived from a full-mode decoherence matrix.
EpsilonBounds epsilon_bounds(const DecoherenceMatrix& d, const std::vector<RetainedHistory>& retained,
                             double remainder_probability);

struct ConsistencyReport {
    std::vector<RetainedHistory> retained;
    double remainder_probability = 1.0;
    long long n_readout = 0;
    std::vector<EpsilonPairEntry> epsilon_pairs;
    double delta = 1.0;
    double epsilon_bound = 1.0;
    CostValue cost_at_solution;
    // Set when nothing cleared the retention threshold; the bound chain then
    // degenerates to delta = bound = 1 over an empty retained list.
    bool high_entropy = false;
};

// Full report for one family: cost, readout, bound chain. The epsilon chain
// always uses the full-trace cost c, whatever `which` adds on top.
ConsistencyReport consistency_report(const ModelSpec& model, const FamilySpec& family, CostMode which,
                                     const ShotPlan& plan, const ReadoutConfig& readout);

// Report for a family found by a partial-trace optimization: recomputes the
// full-trace cost at that family (alongside c_pt) and derives probabilities
// and epsilon bounds from the full-trace object.
ConsistencyReport partial_trace_handoff(const ModelSpec& model, const FamilySpec& family,
                                        const ReadoutConfig& readout, const ShotPlan& plan = ShotPlan{});

}  // namespace vch
