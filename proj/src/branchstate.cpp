#include "vch/branchstate.hpp"

#include <cmath>

#include "vch/kernels.hpp"
#include "vch/qmath.hpp"

namespace vch {

int BranchedState::s_dim() const {
    int d = 1;
    for (std::size_t i = 0; i + ancilla_dims.size() < sigma_sa.dims.size(); ++i) d *= sigma_sa.dims[i];
    return d;
}

long long BranchedState::label_count() const {
    long long n = 1;
    for (int m : ancilla_dims) n *= m;
    return n;
}

void BranchedState::validate() const {
    if (!sigma_sa.is_hermitian(1e-10) || !sigma_a.is_hermitian(1e-10))
        throw NumericalError("BranchedState: non-Hermitian state");
    if (!sigma_sa.is_unit_trace(1e-10) || !sigma_a.is_unit_trace(1e-10))
        throw NumericalError("BranchedState: trace differs from 1 beyond 1e-10");
    if (sigma_sa.min_eigenvalue() < -1e-10 || sigma_a.min_eigenvalue() < -1e-10)
        throw NumericalError("BranchedState: state not PSD within 1e-10");
}

namespace {

// Record step: append a fresh ancilla of dimension m and store the outcome of
// projecting the leading S factor. Two one-sided passes keep the cost at
// O(n^2 m d_s) while allowing the projector to depend on the ancilla prefix
// of the acted-on side (branch-dependent families).
//
// Index layout of x: row = (s, rest) with rest = (e, prefix), prefix size a_dim.
// projs is indexed [prefix][outcome]; prefix index is the composite ancilla
// value in lexicographic order.
std::vector<cplx> record_step(const std::vector<cplx>& x, int n, int s_dim, long long a_dim,
                              const std::vector<std::vector<Operator>>& projs, int m) {
    const int rest = n / s_dim;
    const long long nn = static_cast<long long>(n) * m;

    // Left pass: l[(s_out, r, a), col] = sum_t P^{a|pre(r)}[s_out, t] x[(t, r), col].
    std::vector<cplx> l(static_cast<std::size_t>(nn) * n);
#pragma omp parallel for schedule(static)
    for (long long row = 0; row < nn; ++row) {
        const int a = static_cast<int>(row % m);
        const long long i = row / m;             // original row index
        const int s_out = static_cast<int>(i / rest);
        const long long r = i % rest;
        const long long prefix = r % a_dim;
        const Operator& p = projs[static_cast<std::size_t>(prefix)][static_cast<std::size_t>(a)];
        cplx* lrow = l.data() + static_cast<std::size_t>(row) * n;
        for (int col = 0; col < n; ++col) lrow[col] = 0.0;
        for (int t = 0; t < s_dim; ++t) {
            const cplx w = p.at(s_out, t);
            if (w == cplx(0.0)) continue;
            const cplx* xrow = x.data() + (static_cast<std::size_t>(t) * rest + static_cast<std::size_t>(r)) * n;
            for (int col = 0; col < n; ++col) lrow[col] += w * xrow[col];
        }
    }

    // Right pass: y[row, (s_out, r, a)] = sum_t l[row, (t, r)] conj(P^{a|pre(r)}[s_out, t]).
    std::vector<cplx> y(static_cast<std::size_t>(nn) * nn);
#pragma omp parallel for schedule(static)
    for (long long row = 0; row < nn; ++row) {
        const cplx* lrow = l.data() + static_cast<std::size_t>(row) * n;
        cplx* yrow = y.data() + static_cast<std::size_t>(row) * nn;
        for (long long col = 0; col < nn; ++col) {
            const int a = static_cast<int>(col % m);
            const long long j = col / m;
            const int s_out = static_cast<int>(j / rest);
            const long long r = j % rest;
            const long long prefix = r % a_dim;
            const Operator& p = projs[static_cast<std::size_t>(prefix)][static_cast<std::size_t>(a)];
            cplx acc = 0.0;
            for (int t = 0; t < s_dim; ++t) {
                const cplx w = std::conj(p.at(s_out, t));
                if (w == cplx(0.0)) continue;
                acc += lrow[static_cast<std::size_t>(t) * rest + static_cast<std::size_t>(r)] * w;
            }
            yrow[col] = acc;
        }
    }
    return y;
}

HistoryLabel decode_prefix(long long prefix, const std::vector<int>& m_so_far) {
    HistoryLabel out(m_so_far.size(), 0);
    for (int j = static_cast<int>(m_so_far.size()) - 1; j >= 0; --j) {
        out[static_cast<std::size_t>(j)] = static_cast<int>(prefix % m_so_far[static_cast<std::size_t>(j)]);
        prefix /= m_so_far[static_cast<std::size_t>(j)];
    }
    return out;
}

}  // namespace

BranchedState build_branched_state(const ModelSpec& model, const FamilySpec& family) {
    model.validate();
    family.validate(model.s_dim());
    if (family.k() != model.k()) throw std::invalid_argument("build_branched_state: time counts disagree");

    const int s_dim = model.s_dim();
    const int se = model.rho.side();
    const auto segs = model.resolved_segments();

    std::vector<cplx> state = model.rho.entries;
    int n = se;
    long long a_dim = 1;
    std::vector<int> m_so_far;

    for (int j = 0; j < model.k(); ++j) {
        // Segment evolution acts on the leading S(x)E block, identity on ancillas.
        {
            const Operator& u = segs[static_cast<std::size_t>(j)];
            std::vector<cplx> tmp(state.size());
            kernels::apply_left_prefix(u.entries.data(), state.data(), tmp.data(), se, n);
            kernels::apply_right_prefix_adjoint(u.entries.data(), tmp.data(), state.data(), se, n);
        }
        // Projectors for every prefix value reachable at this time.
        const int m = family.outcomes(j);
        std::vector<std::vector<Operator>> projs(static_cast<std::size_t>(a_dim));
        for (long long pre = 0; pre < a_dim; ++pre) {
            const HistoryLabel prefix = decode_prefix(pre, m_so_far);
            auto& row = projs[static_cast<std::size_t>(pre)];
            row.reserve(static_cast<std::size_t>(m));
            for (int a = 0; a < m; ++a) row.push_back(projector(family, j, prefix, a));
        }
        state = record_step(state, n, s_dim, a_dim, projs, m);
        n *= m;
        a_dim *= m;
        m_so_far.push_back(m);
    }

    // Assemble dims [s_dims..., e_dims..., m_1..m_k] and trace out E.
    std::vector<int> dims = model.se_dims();
    for (int m : m_so_far) dims.push_back(m);
    Operator full(dims, std::move(state));

    SubsystemSelector e_sel;
    for (std::size_t i = 0; i < model.e_dims.size(); ++i)
        e_sel.indices.push_back(static_cast<int>(model.s_dims.size() + i));

    BranchedState out;
    out.ancilla_dims = m_so_far;
    out.sigma_sa = model.e_dims.empty() ? std::move(full) : partial_trace(full, e_sel);
    SubsystemSelector s_sel;
    for (std::size_t i = 0; i < model.s_dims.size(); ++i) s_sel.indices.push_back(static_cast<int>(i));
    out.sigma_a = partial_trace(out.sigma_sa, s_sel);
    out.validate();
    return out;
}

cplx element_full(const BranchedState& state, const FamilySpec& family, const HistoryLabel& a, const HistoryLabel& b) {
    const long long ia = label_index(family, a), ib = label_index(family, b);
    return state.sigma_a.at(static_cast<int>(ia), static_cast<int>(ib));
}

Operator element_partial(const BranchedState& state, const FamilySpec& family, const HistoryLabel& a,
                         const HistoryLabel& b) {
    const long long ia = label_index(family, a), ib = label_index(family, b);
    const int s = state.s_dim();
    const long long na = state.label_count();
    std::vector<int> s_dims(state.sigma_sa.dims.begin(),
                            state.sigma_sa.dims.end() - static_cast<long long>(state.ancilla_dims.size()));
    Operator blk(s_dims);
    for (int s1 = 0; s1 < s; ++s1)
        for (int s2 = 0; s2 < s; ++s2)
            blk.at(s1, s2) = state.sigma_sa.at(static_cast<int>(s1 * na + ia), static_cast<int>(s2 * na + ib));
    return blk;
}

}  // namespace vch
