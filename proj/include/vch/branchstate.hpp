#pragma once

#include "vch/histories.hpp"
#include "vch/operator.hpp"

namespace vch {

// Output of the state-preparation sweep: the joint system-ancilla state with
// the environment already traced out, and its ancilla marginal. Ancilla
// factor j has dimension m_j (one level per outcome), ordered so that the
// composite ancilla index enumerates history labels lexicographically.
struct BranchedState {
    Operator sigma_sa;               // dims = s_dims + ancilla_dims
    Operator sigma_a;                // dims = ancilla_dims
    std::vector<int> ancilla_dims;

    int s_dim() const;
    long long label_count() const;
    // Both states PSD within 1e-10 with unit trace within 1e-10.
    void validate() const;
};

// Run the preparation sweep: rho (x) |0..0><0..0| evolves segment by segment,
// and after each segment the outcome is recorded into a fresh ancilla via the
// isometry sum_a P_j^a (x) |a>; E is traced out once at the end. The result
// satisfies <a| sigma_a |b> = D(a,b) entrywise, and the S-blocks of sigma_sa
// give the partial-trace functional.
BranchedState build_branched_state(const ModelSpec& model, const FamilySpec& family);

// Matrix element lookup. Full mode returns <a| sigma_a |b>; partial mode
// returns the S-operator block of sigma_sa between ancilla labels a and b.
cplx element_full(const BranchedState& state, const FamilySpec& family, const HistoryLabel& a, const HistoryLabel& b);
Operator element_partial(const BranchedState& state, const FamilySpec& family, const HistoryLabel& a, const HistoryLabel& b);

}  // namespace vch
