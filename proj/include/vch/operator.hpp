#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace vch {

using cplx = std::complex<double>;

// Thrown when a state drifts outside numerical tolerances (non-PSD, trace loss).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense square complex matrix over a labeled tensor-product space.
// dims lists subsystem dimensions outermost-first; entries are row-major
// with the composite index i = ((i_0*d_1 + i_1)*d_2 + i_2)*...
// Hermiticity, positivity and unit trace are checkable predicates, never
// silent assumptions.
struct Operator {
    std::vector<int> dims;
    std::vector<cplx> entries;

    Operator() = default;
    explicit Operator(std::vector<int> d)
        : dims(std::move(d)), entries(static_cast<std::size_t>(side_of(dims)) * side_of(dims)) {}
    Operator(std::vector<int> d, std::vector<cplx> e) : dims(std::move(d)), entries(std::move(e)) {
        const auto s = static_cast<std::size_t>(side());
        if (entries.size() != s * s) throw std::invalid_argument("Operator: entry count does not match dims");
    }

    static int side_of(const std::vector<int>& d) {
        long long s = 1;
        for (int x : d) {
            if (x < 1) throw std::invalid_argument("Operator: nonpositive subsystem dimension");
            s *= x;
            if (s > (1 << 13)) throw std::invalid_argument("Operator: side exceeds dense size limit");
        }
        return static_cast<int>(s);
    }

    int side() const { return side_of(dims); }

    cplx& at(int r, int c) { return entries[static_cast<std::size_t>(r) * side() + c]; }
    const cplx& at(int r, int c) const { return entries[static_cast<std::size_t>(r) * side() + c]; }

    static Operator identity(std::vector<int> d) {
        Operator m(std::move(d));
        const int n = m.side();
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    static Operator zero(std::vector<int> d) { return Operator(std::move(d)); }

    cplx trace() const {
        cplx t = 0.0;
        const int n = side();
        for (int i = 0; i < n; ++i) t += at(i, i);
        return t;
    }

    Operator dagger() const {
        Operator out(dims);
        const int n = side();
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) out.at(c, r) = std::conj(at(r, c));
        return out;
    }

    // max_{ij} |a_ij - conj(a_ji)|
    double hermiticity_defect() const {
        double worst = 0.0;
        const int n = side();
        for (int r = 0; r < n; ++r)
            for (int c = r; c < n; ++c) worst = std::max(worst, std::abs(at(r, c) - std::conj(at(c, r))));
        return worst;
    }

    bool is_hermitian(double tol = 1e-12) const { return hermiticity_defect() <= tol; }

    // Smallest eigenvalue of the Hermitian part; PSD check support (Eigen-backed).
    double min_eigenvalue() const;
    bool is_psd(double tol = 1e-12) const { return min_eigenvalue() >= -tol; }
    bool is_unit_trace(double tol = 1e-12) const { return std::abs(trace() - cplx(1.0)) <= tol; }
    bool is_unitary(double tol = 1e-12) const;
};

// Distinct positions into Operator.dims; addresses a subset of tensor factors.
struct SubsystemSelector {
    std::vector<int> indices;

    void validate(const std::vector<int>& dims) const {
        std::vector<bool> seen(dims.size(), false);
        for (int ix : indices) {
            if (ix < 0 || ix >= static_cast<int>(dims.size())) throw std::invalid_argument("SubsystemSelector: index out of range");
            if (seen[static_cast<std::size_t>(ix)]) throw std::invalid_argument("SubsystemSelector: duplicate index");
            seen[static_cast<std::size_t>(ix)] = true;
        }
    }
};

}  // namespace vch
