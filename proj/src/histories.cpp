#include "vch/histories.hpp"

#include <algorithm>
#include <cmath>

#include "vch/kernels.hpp"
#include "vch/qmath.hpp"

namespace vch {

Operator Segment::unitary() const {
    if (dt) return evolve_unitary(op, *dt);
    return op;
}

int ModelSpec::s_dim() const {
    int d = 1;
    for (int x : s_dims) d *= x;
    return d;
}

int ModelSpec::e_dim() const {
    int d = 1;
    for (int x : e_dims) d *= x;
    return d;
}

std::vector<int> ModelSpec::se_dims() const {
    std::vector<int> d = s_dims;
    d.insert(d.end(), e_dims.begin(), e_dims.end());
    return d;
}

void ModelSpec::validate() const {
    const int n = s_dim() * e_dim();
    if (rho.side() != n) throw std::invalid_argument("ModelSpec: rho side does not match S(x)E");
    if (!rho.is_hermitian(1e-12)) throw NumericalError("ModelSpec: rho is not Hermitian within 1e-12");
    if (!rho.is_unit_trace(1e-12)) throw NumericalError("ModelSpec: rho trace differs from 1 beyond 1e-12");
    if (rho.min_eigenvalue() < -1e-12) throw NumericalError("ModelSpec: rho has eigenvalue below -1e-12");
    for (const auto& seg : segments)
        if (seg.op.side() != n) throw std::invalid_argument("ModelSpec: segment does not act on S(x)E");
}

std::vector<Operator> ModelSpec::resolved_segments() const {
    std::vector<Operator> out;
    out.reserve(segments.size());
    for (const auto& seg : segments) out.push_back(seg.unitary());
    return out;
}

std::vector<int> FamilySpec::outcome_dims() const {
    std::vector<int> m;
    m.reserve(steps.size());
    for (const auto& st : steps) m.push_back(static_cast<int>(st.rank_partition.size()));
    return m;
}

long long FamilySpec::label_count() const {
    long long n = 1;
    for (const auto& st : steps) n *= static_cast<long long>(st.rank_partition.size());
    return n;
}

void FamilySpec::validate(int s_dim) const {
    for (const auto& st : steps) {
        if (st.basis.side() != s_dim) throw std::invalid_argument("FamilySpec: basis side does not match S");
        if (!st.basis.is_unitary(1e-12)) throw NumericalError("FamilySpec: basis is not unitary within 1e-12");
        std::vector<int> seen(static_cast<std::size_t>(s_dim), 0);
        for (const auto& group : st.rank_partition) {
            if (group.empty()) throw std::invalid_argument("FamilySpec: empty partition group");
            for (int ix : group) {
                if (ix < 0 || ix >= s_dim) throw std::invalid_argument("FamilySpec: partition index out of range");
                ++seen[static_cast<std::size_t>(ix)];
            }
        }
        for (int c : seen)
            if (c != 1) throw std::invalid_argument("FamilySpec: partition does not cover S basis indices exactly once");
        for (const auto& [prefix, extra] : st.branch_map) {
            (void)prefix;
            if (extra.side() != s_dim) throw std::invalid_argument("FamilySpec: branch unitary side does not match S");
            if (!extra.is_unitary(1e-12)) throw NumericalError("FamilySpec: branch unitary is not unitary within 1e-12");
        }
    }
}

std::vector<HistoryLabel> all_labels(const FamilySpec& family) {
    const auto m = family.outcome_dims();
    std::vector<HistoryLabel> labels;
    labels.reserve(static_cast<std::size_t>(family.label_count()));
    HistoryLabel cur(m.size(), 0);
    while (true) {
        labels.push_back(cur);
        int j = static_cast<int>(m.size()) - 1;
        while (j >= 0) {
            if (++cur[static_cast<std::size_t>(j)] < m[static_cast<std::size_t>(j)]) break;
            cur[static_cast<std::size_t>(j)] = 0;
            --j;
        }
        if (j < 0) break;
    }
    return labels;
}

long long label_index(const FamilySpec& family, const HistoryLabel& label) {
    const auto m = family.outcome_dims();
    if (label.size() != m.size()) throw std::invalid_argument("label_index: wrong label length");
    long long ix = 0;
    for (std::size_t j = 0; j < m.size(); ++j) {
        if (label[j] < 0 || label[j] >= m[j]) throw std::invalid_argument("label_index: outcome out of range");
        ix = ix * m[j] + label[j];
    }
    return ix;
}

Operator projector(const FamilySpec& family, int j, const HistoryLabel& prefix, int a) {
    if (j < 0 || j >= family.k()) throw std::invalid_argument("projector: time index out of range");
    const TimeStep& st = family.steps[static_cast<std::size_t>(j)];
    if (a < 0 || a >= static_cast<int>(st.rank_partition.size())) throw std::invalid_argument("projector: outcome out of range");

    const int n = st.basis.side();
    Operator btilde = st.basis;
    if (!st.branch_map.empty()) {
        const auto it = st.branch_map.find(prefix);
        if (it == st.branch_map.end()) throw std::invalid_argument("projector: prefix missing from branch map");
        btilde = kernels::mul(it->second, st.basis);
    }
    // btilde * Pi_a * btilde^dagger with Pi_a a diagonal 0/1 mask: the product
    // reduces to a sum of selected-column outer products.
    Operator out(btilde.dims);
    for (int col : st.rank_partition[static_cast<std::size_t>(a)])
        for (int r = 0; r < n; ++r) {
            const cplx vr = btilde.at(r, col);
            if (vr == cplx(0.0)) continue;
            for (int c = 0; c < n; ++c) out.at(r, c) += vr * std::conj(btilde.at(c, col));
        }
    return out;
}

namespace {

// Extend an S operator by identity on E and apply from the left.
Operator apply_projector_left(const Operator& p, const Operator& x, int s_dim) {
    Operator y(x.dims);
    kernels::apply_left_prefix(p.entries.data(), x.entries.data(), y.entries.data(), s_dim, x.side());
    return y;
}

}  // namespace

Operator class_operator(const ModelSpec& model, const FamilySpec& family, const HistoryLabel& label) {
    if (static_cast<int>(label.size()) != model.k() || family.k() != model.k())
        throw std::invalid_argument("class_operator: time counts disagree");
    const int s = model.s_dim();
    const auto segs = model.resolved_segments();
    Operator m = Operator::identity(model.se_dims());
    HistoryLabel prefix;
    for (int j = 0; j < model.k(); ++j) {
        m = kernels::mul(segs[static_cast<std::size_t>(j)], m);
        m = apply_projector_left(projector(family, j, prefix, label[static_cast<std::size_t>(j)]), m, s);
        prefix.push_back(label[static_cast<std::size_t>(j)]);
    }
    return m;
}

namespace {

// All class operators by a shared-prefix sweep: one segment multiply and m_j
// projections per tree node instead of per label.
std::vector<Operator> all_class_operators(const ModelSpec& model, const FamilySpec& family) {
    const int s = model.s_dim();
    const auto segs = model.resolved_segments();
    std::vector<Operator> level{Operator::identity(model.se_dims())};
    std::vector<HistoryLabel> prefixes{{}};
    for (int j = 0; j < model.k(); ++j) {
        const int m = family.outcomes(j);
        std::vector<Operator> next;
        std::vector<HistoryLabel> next_prefixes;
        next.reserve(level.size() * static_cast<std::size_t>(m));
        next_prefixes.reserve(next.capacity());
        for (std::size_t t = 0; t < level.size(); ++t) {
            const Operator evolved = kernels::mul(segs[static_cast<std::size_t>(j)], level[t]);
            for (int a = 0; a < m; ++a) {
                next.push_back(apply_projector_left(projector(family, j, prefixes[t], a), evolved, s));
                HistoryLabel p = prefixes[t];
                p.push_back(a);
                next_prefixes.push_back(std::move(p));
            }
        }
        level = std::move(next);
        prefixes = std::move(next_prefixes);
    }
    return level;
}

}  // namespace

DecoherenceMatrix decoherence_matrix(const ModelSpec& model, const FamilySpec& family, DecoherenceMatrix::Mode mode) {
    model.validate();
    family.validate(model.s_dim());
    DecoherenceMatrix d;
    d.mode = mode;
    d.labels = all_labels(family);
    d.s_dims = model.s_dims;
    const long long nl = d.size();
    const int n = model.rho.side();
    const int s = model.s_dim();
    const int e = n / s;

    const auto cls = all_class_operators(model, family);
    std::vector<Operator> right(cls.size());  // C_a * rho
    for (std::size_t a = 0; a < cls.size(); ++a) right[a] = kernels::mul(cls[a], model.rho);

    if (mode == DecoherenceMatrix::Mode::full) {
        d.entries.assign(static_cast<std::size_t>(nl * nl), cplx(0.0));
        // Tr(C_a rho C_b^dagger) = <C_b, C_a rho>_HS; fill the upper triangle
        // and mirror so Hermitian structure is exact.
        for (long long a = 0; a < nl; ++a)
            for (long long b = a; b < nl; ++b) {
                const cplx v = kernels::frobenius_inner(right[static_cast<std::size_t>(a)].entries.data(),
                                                        cls[static_cast<std::size_t>(b)].entries.data(),
                                                        right[static_cast<std::size_t>(a)].entries.size());
                d.entries[static_cast<std::size_t>(a * nl + b)] = v;
                d.entries[static_cast<std::size_t>(b * nl + a)] = std::conj(v);
            }
        for (long long a = 0; a < nl; ++a) {
            auto& diag = d.entries[static_cast<std::size_t>(a * nl + a)];
            diag = cplx(diag.real(), 0.0);
        }
    } else {
        d.blocks.assign(static_cast<std::size_t>(nl * nl), Operator(model.s_dims));
        // Block(a,b)[s,s'] = sum_e sum_col (C_a rho)[(s,e),col] * conj(C_b[(s',e),col]).
        for (long long a = 0; a < nl; ++a)
            for (long long b = a; b < nl; ++b) {
                Operator blk(model.s_dims);
                const cplx* ra = right[static_cast<std::size_t>(a)].entries.data();
                const cplx* cb = cls[static_cast<std::size_t>(b)].entries.data();
                for (int s1 = 0; s1 < s; ++s1)
                    for (int s2 = 0; s2 < s; ++s2) {
                        cplx acc = 0.0;
                        for (int ee = 0; ee < e; ++ee)
                            acc += kernels::frobenius_inner(ra + static_cast<std::size_t>(s1 * e + ee) * n,
                                                            cb + static_cast<std::size_t>(s2 * e + ee) * n,
                                                            static_cast<std::size_t>(n));
                        blk.at(s1, s2) = acc;
                    }
                d.blocks[static_cast<std::size_t>(a * nl + b)] = blk;
                d.blocks[static_cast<std::size_t>(b * nl + a)] = blk.dagger();
            }
    }
    d.validate();
    return d;
}

void DecoherenceMatrix::validate() const {
    const long long nl = size();
    if (mode == Mode::full) {
        double diag_sum = 0.0;
        for (long long a = 0; a < nl; ++a) {
            const cplx dv = full_at(a, a);
            if (std::abs(dv.imag()) > 1e-12) throw NumericalError("DecoherenceMatrix: complex diagonal");
            if (dv.real() < -1e-12) throw NumericalError("DecoherenceMatrix: negative diagonal");
            diag_sum += dv.real();
            for (long long b = 0; b < nl; ++b)
                if (std::abs(full_at(a, b) - std::conj(full_at(b, a))) > 1e-12)
                    throw NumericalError("DecoherenceMatrix: Hermitian structure broken");
        }
        if (std::abs(diag_sum - 1.0) > 1e-10) throw NumericalError("DecoherenceMatrix: diagonal does not sum to 1");
    } else {
        for (long long a = 0; a < nl; ++a)
            for (long long b = 0; b < nl; ++b) {
                const Operator adj = block_at(b, a).dagger();
                if (hs_distance_sq(block_at(a, b), adj) > 1e-24)
                    throw NumericalError("DecoherenceMatrix: blockwise adjoint structure broken");
            }
    }
}

ConsistencyCheck check_consistency(const DecoherenceMatrix& d, double tol, ConsistencyFlavor flavor) {
    if ((flavor == ConsistencyFlavor::partial) != (d.mode == DecoherenceMatrix::Mode::partial))
        throw std::invalid_argument("check_consistency: flavor does not match matrix mode");
    const long long nl = d.size();
    double worst = 0.0;
    for (long long a = 0; a < nl; ++a)
        for (long long b = 0; b < nl; ++b) {
            if (a == b) continue;
            double v = 0.0;
            switch (flavor) {
                case ConsistencyFlavor::real_part: v = std::abs(d.full_at(a, b).real()); break;
                case ConsistencyFlavor::strong: v = std::abs(d.full_at(a, b)); break;
                case ConsistencyFlavor::partial: {
                    const Operator& blk = d.block_at(a, b);
                    v = std::sqrt(kernels::distance_sq(blk.entries.data(),
                                                       Operator(blk.dims).entries.data(), blk.entries.size()));
                    break;
                }
            }
            worst = std::max(worst, v);
        }
    return {worst <= tol, worst};
}

EpsilonTable pairwise_epsilon(const DecoherenceMatrix& d) {
    if (d.mode != DecoherenceMatrix::Mode::full) throw std::invalid_argument("pairwise_epsilon: full mode required");
    const long long nl = d.size();
    EpsilonTable t;
    t.n = nl;
    t.eps.assign(static_cast<std::size_t>(nl * nl), 0.0);
    t.defined.assign(static_cast<std::size_t>(nl * nl), true);
    for (long long a = 0; a < nl; ++a)
        for (long long b = 0; b < nl; ++b) {
            if (a == b) continue;
            const double pa = d.full_at(a, a).real();
            const double pb = d.full_at(b, b).real();
            if (pa < 1e-14 || pb < 1e-14) {
                t.defined[static_cast<std::size_t>(a * nl + b)] = false;
                continue;
            }
            t.eps[static_cast<std::size_t>(a * nl + b)] = std::abs(d.full_at(a, b)) / std::sqrt(pa * pb);
        }
    return t;
}

}  // namespace vch
