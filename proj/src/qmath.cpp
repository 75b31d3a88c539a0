#include "vch/qmath.hpp"

#include <Eigen/Dense>
#include <algorithm>

#include "vch/kernels.hpp"

namespace vch {

namespace {

using EigenMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

EigenMat to_eigen(const Operator& m) {
    return Eigen::Map<const EigenMat>(m.entries.data(), m.side(), m.side());
}

// Composite index contributions of a subsystem subset: index = sum over
// factors of digit * stride, so any subset's contribution is additive.
std::vector<long long> subset_offsets(const std::vector<int>& dims, const std::vector<long long>& strides,
                                      const std::vector<int>& subset) {
    long long count = 1;
    for (int ix : subset) count *= dims[static_cast<std::size_t>(ix)];
    std::vector<long long> offs(static_cast<std::size_t>(count));
    for (long long v = 0; v < count; ++v) {
        long long rem = v, off = 0;
        for (auto it = subset.rbegin(); it != subset.rend(); ++it) {
            const int d = dims[static_cast<std::size_t>(*it)];
            off += (rem % d) * strides[static_cast<std::size_t>(*it)];
            rem /= d;
        }
        offs[static_cast<std::size_t>(v)] = off;
    }
    return offs;
}

std::vector<int> complement(const std::vector<int>& dims, const std::vector<int>& subset) {
    std::vector<bool> in(dims.size(), false);
    for (int ix : subset) in[static_cast<std::size_t>(ix)] = true;
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(dims.size()); ++i)
        if (!in[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
}

}  // namespace

std::vector<long long> dim_strides(const std::vector<int>& dims) {
    std::vector<long long> strides(dims.size());
    long long s = 1;
    for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
        strides[static_cast<std::size_t>(i)] = s;
        s *= dims[static_cast<std::size_t>(i)];
    }
    return strides;
}

double Operator::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<EigenMat> solver(to_eigen(*this), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("min_eigenvalue: eigensolver failed");
    return solver.eigenvalues().minCoeff();
}

bool Operator::is_unitary(double tol) const {
    const Operator d = dagger();
    Operator prod(dims);
    kernels::matmul(d.entries.data(), entries.data(), prod.entries.data(), side());
    const Operator id = Operator::identity(dims);
    return hs_distance_sq(prod, id) < tol;
}

Operator tensor(const Operator& a, const Operator& b) {
    std::vector<int> dims = a.dims;
    dims.insert(dims.end(), b.dims.begin(), b.dims.end());
    Operator out(std::move(dims));
    const int na = a.side(), nb = b.side(), n = out.side();
    for (int ra = 0; ra < na; ++ra)
        for (int rb = 0; rb < nb; ++rb) {
            const int r = ra * nb + rb;
            const cplx* arow = a.entries.data() + static_cast<std::size_t>(ra) * na;
            const cplx* brow = b.entries.data() + static_cast<std::size_t>(rb) * nb;
            cplx* orow = out.entries.data() + static_cast<std::size_t>(r) * n;
            for (int ca = 0; ca < na; ++ca) {
                const cplx av = arow[ca];
                if (av == cplx(0.0)) continue;
                cplx* block = orow + static_cast<std::size_t>(ca) * nb;
                for (int cb = 0; cb < nb; ++cb) block[cb] = av * brow[cb];
            }
        }
    return out;
}

Operator evolve_unitary(const Operator& h, double dt) {
    if (!h.is_hermitian(1e-12)) throw std::invalid_argument("evolve_unitary: generator is not Hermitian within 1e-12");
    const int n = h.side();
    // Symmetrize so the solver sees an exactly Hermitian matrix.
    EigenMat hm = to_eigen(h);
    hm = (hm + hm.adjoint().eval()) / 2.0;
    Eigen::SelfAdjointEigenSolver<EigenMat> solver(hm);
    if (solver.info() != Eigen::Success) throw NumericalError("evolve_unitary: eigensolver failed");
    Eigen::VectorXcd phases(n);
    for (int i = 0; i < n; ++i) phases(i) = std::exp(cplx(0.0, -solver.eigenvalues()(i) * dt));
    EigenMat u = solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
    Operator out(h.dims);
    Eigen::Map<EigenMat>(out.entries.data(), n, n) = u;
    return out;
}

Operator partial_trace(const Operator& m, const SubsystemSelector& discard) {
    discard.validate(m.dims);
    const auto strides = dim_strides(m.dims);
    const std::vector<int> kept = complement(m.dims, discard.indices);
    const auto kept_offs = subset_offsets(m.dims, strides, kept);
    const auto dis_offs = subset_offsets(m.dims, strides, discard.indices);

    std::vector<int> out_dims;
    for (int ix : kept) out_dims.push_back(m.dims[static_cast<std::size_t>(ix)]);
    if (out_dims.empty()) out_dims.push_back(1);
    Operator out(std::move(out_dims));
    const int kn = out.side();
    const int n = m.side();
    const cplx* src = m.entries.data();
#pragma omp parallel for schedule(static)
    for (int ki = 0; ki < kn; ++ki) {
        const long long ri = kept_offs[static_cast<std::size_t>(ki)];
        for (int kj = 0; kj < kn; ++kj) {
            const long long cj = kept_offs[static_cast<std::size_t>(kj)];
            cplx s = 0.0;
            for (long long doff : dis_offs) s += src[(ri + doff) * n + (cj + doff)];
            out.at(ki, kj) = s;
        }
    }
    return out;
}

Operator dephase(const Operator& m, const SubsystemSelector& on) {
    on.validate(m.dims);
    const auto strides = dim_strides(m.dims);
    const int n = m.side();
    // Digit pattern of the selected subsystems for every composite index.
    std::vector<long long> key(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        long long k = 0;
        for (std::size_t t = 0; t < on.indices.size(); ++t) {
            const int ix = on.indices[t];
            const long long digit = (i / strides[static_cast<std::size_t>(ix)]) % m.dims[static_cast<std::size_t>(ix)];
            k = k * m.dims[static_cast<std::size_t>(ix)] + digit;
        }
        key[static_cast<std::size_t>(i)] = k;
    }
    Operator out(m.dims);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const cplx* srow = m.entries.data() + static_cast<std::size_t>(i) * n;
        cplx* drow = out.entries.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j)
            drow[j] = (key[static_cast<std::size_t>(i)] == key[static_cast<std::size_t>(j)]) ? srow[j] : cplx(0.0);
    }
    return out;
}

double hs_distance_sq(const Operator& a, const Operator& b) {
    if (a.dims != b.dims && a.side() != b.side()) throw std::invalid_argument("hs_distance_sq: shape mismatch");
    if (a.side() != b.side()) throw std::invalid_argument("hs_distance_sq: shape mismatch");
    return kernels::distance_sq(a.entries.data(), b.entries.data(), a.entries.size());
}

}  // namespace vch
