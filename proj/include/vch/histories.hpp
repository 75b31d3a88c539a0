#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vch/operator.hpp"

namespace vch {

// One inter-time evolution interval: either a fixed unitary or a Hermitian
// generator with an angle, resolved to exp(-i h dt) on demand.
struct Segment {
    Operator op;
    std::optional<double> dt;  // set => op is a Hamiltonian

    Operator unitary() const;
};

// Physical model: initial state on S(x)E and one segment per time step;
// segment j evolves from the t_{j-1} event to t_j.
struct ModelSpec {
    Operator rho;
    std::vector<Segment> segments;
    std::vector<int> s_dims;
    std::vector<int> e_dims;

    int k() const { return static_cast<int>(segments.size()); }
    int s_dim() const;
    int e_dim() const;
    std::vector<int> se_dims() const;
    // rho PSD within 1e-12, unit trace within 1e-12, segments act on S(x)E.
    void validate() const;
    std::vector<Operator> resolved_segments() const;
};

// Projector schedule for one time: a basis change on S, an ordered partition
// of the S basis indices into outcome groups (group ranks = coarse graining),
// and an optional map from outcome prefixes to extra unitaries.
struct TimeStep {
    Operator basis;
    std::vector<std::vector<int>> rank_partition;
    std::map<std::vector<int>, Operator> branch_map;
};

struct FamilySpec {
    std::vector<TimeStep> steps;

    int k() const { return static_cast<int>(steps.size()); }
    int outcomes(int j) const { return static_cast<int>(steps[static_cast<std::size_t>(j)].rank_partition.size()); }
    std::vector<int> outcome_dims() const;
    long long label_count() const;
    // Partitions cover every S basis index exactly once; bases are unitary.
    void validate(int s_dim) const;
};

// Outcome sequence (alpha_1 .. alpha_k).
using HistoryLabel = std::vector<int>;

// All labels of a family in lexicographic order; fixes matrix row order and
// the ancilla basis order used by the circuit route.
std::vector<HistoryLabel> all_labels(const FamilySpec& family);
long long label_index(const FamilySpec& family, const HistoryLabel& label);

// D(a,b) for every label pair. Full mode stores complex scalars; partial mode
// stores S-operator blocks (the environment is traced out, S is kept).
struct DecoherenceMatrix {
    enum class Mode { full, partial };

    Mode mode = Mode::full;
    std::vector<HistoryLabel> labels;
    std::vector<cplx> entries;      // full mode, labels^2 row-major
    std::vector<Operator> blocks;   // partial mode, labels^2 row-major
    std::vector<int> s_dims;

    long long size() const { return static_cast<long long>(labels.size()); }
    cplx full_at(long long a, long long b) const { return entries[static_cast<std::size_t>(a * size() + b)]; }
    const Operator& block_at(long long a, long long b) const { return blocks[static_cast<std::size_t>(a * size() + b)]; }

    // Hermitian structure; full-mode diagonal real and nonnegative within
    // 1e-12, summing to 1 within 1e-10.
    void validate() const;
};

enum class ConsistencyFlavor { real_part, strong, partial };

struct ConsistencyCheck {
    bool passed = false;
    double max_violation = 0.0;
};

// Pairwise interference-to-probability ratios; pairs whose diagonal falls
// below 1e-14 are flagged undefined instead of divided.
struct EpsilonTable {
    long long n = 0;
    std::vector<double> eps;      // n^2 row-major, 0 on diagonal
    std::vector<bool> defined;    // n^2 row-major

    double at(long long a, long long b) const { return eps[static_cast<std::size_t>(a * n + b)]; }
    bool is_defined(long long a, long long b) const { return defined[static_cast<std::size_t>(a * n + b)]; }
};

// P_j^a for the given outcome prefix: basis * (sum of group-a basis
// projectors) * basis^dagger, with the prefix's branch unitary composed in.
Operator projector(const FamilySpec& family, int j, const HistoryLabel& prefix, int a);

// Time-ordered product of projected evolution, built by one forward sweep:
// apply segment j, then the projector for outcome alpha_j, for j = 1..k.
Operator class_operator(const ModelSpec& model, const FamilySpec& family, const HistoryLabel& label);

DecoherenceMatrix decoherence_matrix(const ModelSpec& model, const FamilySpec& family, DecoherenceMatrix::Mode mode);

ConsistencyCheck check_consistency(const DecoherenceMatrix& d, double tol, ConsistencyFlavor flavor);

EpsilonTable pairwise_epsilon(const DecoherenceMatrix& d);

}  // namespace vch
