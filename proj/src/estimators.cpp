#include "vch/estimators.hpp"

#include <cmath>
#include <string>

#include "vch/kernels.hpp"
#include "vch/qmath.hpp"
#include "vch/rng.hpp"

namespace vch {

ShotPlan ShotPlan::with_tag_index(std::uint64_t index) const {
    return ShotPlan{shots, RngStream::mix(seed ^ RngStream::mix(index))};
}

namespace {

void require_state(const Operator& state) {
    if (!state.is_hermitian(1e-10)) throw NumericalError("estimator: state not Hermitian");
    if (!state.is_unit_trace(1e-10)) throw NumericalError("estimator: state trace differs from 1");
}

double exact_purity(const Operator& state) {
    // Tr(M^2) = sum_ij M_ij M_ji = sum_ij |M_ij|^2 for Hermitian M.
    return kernels::frobenius_inner(state.entries.data(), state.entries.data(), state.entries.size()).real();
}

double sample_stderr(double mean_sq_of_draws, double mean, long long n) {
    const double var = std::max(0.0, mean_sq_of_draws - mean * mean);
    return std::sqrt(var / static_cast<double>(n));
}

}  // namespace

PurityEstimate purity(const Operator& state, const ShotPlan& plan, std::string_view tag) {
    require_state(state);
    const double exact = exact_purity(state);
    if (plan.exact()) return {exact, 0.0, Primitive::swap_test};
    RngStream rng = RngStream::derive(plan.seed, tag);
    const double p_plus = (1.0 + exact) / 2.0;
    long long sum = 0;
    for (long long i = 0; i < plan.shots; ++i) sum += rng.bernoulli(p_plus) ? 1 : -1;
    const double mean = static_cast<double>(sum) / static_cast<double>(plan.shots);
    return {mean, sample_stderr(1.0, mean, plan.shots), Primitive::swap_test};
}

PurityEstimate dephased_purity(const Operator& state, const SubsystemSelector& on, const ShotPlan& plan,
                               std::string_view tag) {
    require_state(state);
    on.validate(state.dims);
    const Operator z = dephase(state, on);
    const bool full_dephase = on.indices.size() == state.dims.size();
    const double exact = exact_purity(z);
    if (plan.exact()) return {exact, 0.0, full_dephase ? Primitive::dip : Primitive::pdip};

    RngStream rng = RngStream::derive(plan.seed, tag);
    if (full_dephase) {
        // Bernoulli success probability = collision probability of the diagonal.
        long long hits = 0;
        for (long long i = 0; i < plan.shots; ++i) hits += rng.bernoulli(exact) ? 1 : 0;
        const double mean = static_cast<double>(hits) / static_cast<double>(plan.shots);
        return {mean, sample_stderr(mean, mean, plan.shots), Primitive::dip};
    }

    // PDIP: per-shot estimator in {-1, 0, +1}. Match probability q = sum p_a^2
    // over the dephased factors; a matched draw picks block a with weight
    // p_a^2/q and contributes a parity with conditional mean Tr(M_a^2)/p_a^2.
    const auto strides = dim_strides(state.dims);
    const int n = state.side();
    std::vector<long long> key(static_cast<std::size_t>(n));
    long long blocks = 1;
    for (int ix : on.indices) blocks *= state.dims[static_cast<std::size_t>(ix)];
    for (int i = 0; i < n; ++i) {
        long long k = 0;
        for (int ix : on.indices)
            k = k * state.dims[static_cast<std::size_t>(ix)] +
                (i / strides[static_cast<std::size_t>(ix)]) % state.dims[static_cast<std::size_t>(ix)];
        key[static_cast<std::size_t>(i)] = k;
    }
    std::vector<double> p(static_cast<std::size_t>(blocks), 0.0);       // block traces
    std::vector<double> pur(static_cast<std::size_t>(blocks), 0.0);     // block Tr(M_a^2)
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(key[static_cast<std::size_t>(i)])] += state.at(i, i).real();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (key[static_cast<std::size_t>(i)] == key[static_cast<std::size_t>(j)])
                pur[static_cast<std::size_t>(key[static_cast<std::size_t>(i)])] += std::norm(state.at(i, j));

    double q = 0.0;
    for (double pa : p) q += pa * pa;
    std::vector<double> cum(p.size(), 0.0);
    double acc = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        acc += (q > 0.0) ? p[a] * p[a] / q : 0.0;
        cum[a] = acc;
    }

    long long sum = 0, sum_sq = 0;
    for (long long s = 0; s < plan.shots; ++s) {
        if (!rng.bernoulli(q)) continue;  // no ancilla match: contributes 0
        const double u = rng.next_uniform();
        std::size_t a = 0;
        while (a + 1 < cum.size() && u >= cum[a]) ++a;
        const double parity_mean = (p[a] > 0.0) ? pur[a] / (p[a] * p[a]) : 0.0;
        const int draw = rng.bernoulli((1.0 + parity_mean) / 2.0) ? 1 : -1;
        sum += draw;
        sum_sq += 1;
    }
    const double mean = static_cast<double>(sum) / static_cast<double>(plan.shots);
    const double mean_sq = static_cast<double>(sum_sq) / static_cast<double>(plan.shots);
    return {mean, sample_stderr(mean_sq, mean, plan.shots), Primitive::pdip};
}

ElementEstimate element_readout(const BranchedState& state, const FamilySpec& family, const HistoryLabel& a,
                                const HistoryLabel& b, ElementPart part, const ShotPlan& plan, std::string_view tag) {
    const long long ia = label_index(family, a), ib = label_index(family, b);
    const Operator& sigma = state.sigma_a;
    const double daa = sigma.at(static_cast<int>(ia), static_cast<int>(ia)).real();
    const double dbb = sigma.at(static_cast<int>(ib), static_cast<int>(ib)).real();
    const cplx dab = sigma.at(static_cast<int>(ia), static_cast<int>(ib));

    if (ia == ib) {
        // Diagonal: plain swap test against |a><a|; the imaginary part is zero.
        const double exact = (part == ElementPart::real_part) ? daa : 0.0;
        if (plan.exact()) return {exact, 0.0};
        RngStream rng = RngStream::derive(plan.seed, tag);
        long long sum = 0;
        for (long long s = 0; s < plan.shots; ++s) sum += rng.bernoulli((1.0 + exact) / 2.0) ? 1 : -1;
        const double mean = static_cast<double>(sum) / static_cast<double>(plan.shots);
        return {mean, sample_stderr(1.0, mean, plan.shots)};
    }

    // Branch overlaps: v0 = <psi_0| sigma |psi_0>, v1 = <psi_1| sigma |psi_1>
    // with psi_c = (|a> + w_c |b>)/sqrt(2); w = +-1 (real) or -+i (imaginary).
    double v0 = 0.0, v1 = 0.0;
    if (part == ElementPart::real_part) {
        v0 = 0.5 * (daa + dbb) + dab.real();
        v1 = 0.5 * (daa + dbb) - dab.real();
    } else {
        v0 = 0.5 * (daa + dbb) - dab.imag();
        v1 = 0.5 * (daa + dbb) + dab.imag();
    }
    const double exact = (part == ElementPart::real_part) ? 0.5 * (v0 - v1) : 0.5 * (v1 - v0);
    if (plan.exact()) return {exact, 0.0};

    RngStream rng = RngStream::derive(plan.seed, tag);
    long long n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (long long s = 0; s < plan.shots; ++s) {
        const bool branch1 = rng.bernoulli(0.5);  // control outcome
        const double v = branch1 ? v1 : v0;
        const int draw = rng.bernoulli((1.0 + v) / 2.0) ? 1 : -1;
        if (branch1) {
            ++n1;
            s1 += draw;
        } else {
            ++n0;
            s0 += draw;
        }
    }
    const double m0 = (n0 > 0) ? static_cast<double>(s0) / static_cast<double>(n0) : 0.0;
    const double m1 = (n1 > 0) ? static_cast<double>(s1) / static_cast<double>(n1) : 0.0;
    const double var0 = (n0 > 0) ? (1.0 - m0 * m0) / static_cast<double>(n0) : 1.0;
    const double var1 = (n1 > 0) ? (1.0 - m1 * m1) / static_cast<double>(n1) : 1.0;
    const double value = (part == ElementPart::real_part) ? 0.5 * (m0 - m1) : 0.5 * (m1 - m0);
    return {value, 0.5 * std::sqrt(var0 + var1)};
}

}  // namespace vch
