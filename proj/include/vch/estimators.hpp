#pragma once

#include <cstdint>
#include <string_view>

#include "vch/branchstate.hpp"
#include "vch/operator.hpp"

namespace vch {

// Sampling budget. shots == 0 means exact evaluation; the seed and a
// per-call-site tag derive an independent random stream for every estimate,
// so results are reproducible bit-for-bit regardless of evaluation order.
struct ShotPlan {
    long long shots = 0;  // 0 => exact
    std::uint64_t seed = 0;

    bool exact() const { return shots == 0; }
    ShotPlan with_tag_index(std::uint64_t index) const;  // derived sub-plan for scan points
};

enum class Primitive { swap_test, dip, pdip };

struct PurityEstimate {
    double value = 0.0;
    double stderr_ = 0.0;  // 0 when exact
    Primitive primitive = Primitive::swap_test;
};

// Tr(state^2). Sampled mode draws per-shot +-1 parities with
// P(+1) = (1 + Tr(state^2)) / 2 and reports their mean.
PurityEstimate purity(const Operator& state, const ShotPlan& plan, std::string_view tag = "purity");

// Tr(dephase(state, on)^2). When `on` covers every factor this is the
// diagonal collision probability and sampling is a Bernoulli draw per shot
// (DIP); when `on` is a proper subset the per-shot estimator is {-1, 0, +1}:
// an ancilla match fires with probability q = sum_a p_a^2 and a matched draw
// contributes a parity whose conditional mean is Tr(M_a^2)/p_a^2 (PDIP).
PurityEstimate dephased_purity(const Operator& state, const SubsystemSelector& on, const ShotPlan& plan,
                               std::string_view tag = "dephased_purity");

// One decoherence-functional element from the branched state. Off-diagonal
// elements use the controlled-superposition readout: the control collapses
// into (|a> + w |b>)/sqrt(2) with w = +-1 (real part) or -+i (imaginary
// part), and a swap-test parity against sigma_a estimates each branch
// overlap; the element is half the branch difference. Diagonal elements use
// the plain swap test against |a><a|.
struct ElementEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

enum class ElementPart { real_part, imaginary_part };

ElementEstimate element_readout(const BranchedState& state, const FamilySpec& family, const HistoryLabel& a,
                                const HistoryLabel& b, ElementPart part, const ShotPlan& plan,
                                std::string_view tag = "element");

}  // namespace vch
