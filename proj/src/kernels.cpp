#include "vch/kernels.hpp"

#include <atomic>

namespace vch::kernels {

namespace {
std::atomic<Exec> g_exec{Exec::openmp};
}

void set_execution(Exec mode) { g_exec.store(mode, std::memory_order_relaxed); }
Exec execution() { return g_exec.load(std::memory_order_relaxed); }

// Each output row is produced by exactly one thread with a fixed inner loop
// order, so serial and OpenMP results are bit-identical.

void matmul_serial(const cplx* a, const cplx* b, cplx* c, int n) {
    for (int i = 0; i < n; ++i) {
        cplx* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] = 0.0;
        const cplx* arow = a + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < n; ++k) {
            const cplx aik = arow[k];
            if (aik == cplx(0.0)) continue;
            const cplx* brow = b + static_cast<std::size_t>(k) * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

void matmul_openmp(const cplx* a, const cplx* b, cplx* c, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        cplx* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] = 0.0;
        const cplx* arow = a + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < n; ++k) {
            const cplx aik = arow[k];
            if (aik == cplx(0.0)) continue;
            const cplx* brow = b + static_cast<std::size_t>(k) * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

void matmul(const cplx* a, const cplx* b, cplx* c, int n) {
    execution() == Exec::serial ? matmul_serial(a, b, c, n) : matmul_openmp(a, b, c, n);
}

// Row index decomposes as i = s*rest + r with s < d_lead.
// y[(s,r), j] = sum_t g[s,t] * x[(t,r), j].
namespace {
inline void apply_left_row(const cplx* g, const cplx* x, cplx* y, int d_lead, int n, int rest, int i) {
    const int s = i / rest;
    const int r = i - s * rest;
    cplx* yrow = y + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) yrow[j] = 0.0;
    const cplx* grow = g + static_cast<std::size_t>(s) * d_lead;
    for (int t = 0; t < d_lead; ++t) {
        const cplx gst = grow[t];
        if (gst == cplx(0.0)) continue;
        const cplx* xrow = x + (static_cast<std::size_t>(t) * rest + r) * n;
        for (int j = 0; j < n; ++j) yrow[j] += gst * xrow[j];
    }
}

// y[i, (s,r)] = sum_t x[i, (t,r)] * conj(g[s,t]).
inline void apply_right_row(const cplx* g, const cplx* x, cplx* y, int d_lead, int n, int rest, int i) {
    const cplx* xrow = x + static_cast<std::size_t>(i) * n;
    cplx* yrow = y + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) yrow[j] = 0.0;
    for (int s = 0; s < d_lead; ++s) {
        const cplx* grow = g + static_cast<std::size_t>(s) * d_lead;
        for (int t = 0; t < d_lead; ++t) {
            const cplx w = std::conj(grow[t]);
            if (w == cplx(0.0)) continue;
            const cplx* xs = xrow + static_cast<std::size_t>(t) * rest;
            cplx* ys = yrow + static_cast<std::size_t>(s) * rest;
            for (int r = 0; r < rest; ++r) ys[r] += xs[r] * w;
        }
    }
}
}  // namespace

void apply_left_prefix_serial(const cplx* g, const cplx* x, cplx* y, int d_lead, int n) {
    const int rest = n / d_lead;
    for (int i = 0; i < n; ++i) apply_left_row(g, x, y, d_lead, n, rest, i);
}

void apply_left_prefix_openmp(const cplx* g, const cplx* x, cplx* y, int d_lead, int n) {
    const int rest = n / d_lead;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) apply_left_row(g, x, y, d_lead, n, rest, i);
}

void apply_left_prefix(const cplx* g, const cplx* x, cplx* y, int d_lead, int n) {
    execution() == Exec::serial ? apply_left_prefix_serial(g, x, y, d_lead, n)
                                : apply_left_prefix_openmp(g, x, y, d_lead, n);
}

void apply_right_prefix_adjoint_serial(const cplx* g, const cplx* x, cplx* y, int d_lead, int n) {
    const int rest = n / d_lead;
    for (int i = 0; i < n; ++i) apply_right_row(g, x, y, d_lead, n, rest, i);
}

void apply_right_prefix_adjoint_openmp(const cplx* g, const cplx* x, cplx* y, int d_lead, int n) {
    const int rest = n / d_lead;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) apply_right_row(g, x, y, d_lead, n, rest, i);
}

void apply_right_prefix_adjoint(const cplx* g, const cplx* x, cplx* y, int d_lead, int n) {
    execution() == Exec::serial ? apply_right_prefix_adjoint_serial(g, x, y, d_lead, n)
                                : apply_right_prefix_adjoint_openmp(g, x, y, d_lead, n);
}

// Reductions accumulate fixed-size row partials and combine them in row order,
// keeping the summation order independent of thread count.
namespace {
template <typename T, typename RowFn>
T reduce_rows_serial(std::size_t rows, std::size_t cols, RowFn row) {
    T total{};
    for (std::size_t i = 0; i < rows; ++i) total += row(i, cols);
    return total;
}

template <typename T, typename RowFn>
T reduce_rows_openmp(std::size_t rows, std::size_t cols, RowFn row) {
    std::vector<T> partial(rows);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(rows); ++i)
        partial[static_cast<std::size_t>(i)] = row(static_cast<std::size_t>(i), cols);
    T total{};
    for (std::size_t i = 0; i < rows; ++i) total += partial[i];
    return total;
}

// Reductions treat the flat buffer as 1024-element rows.
constexpr std::size_t kChunk = 1024;

inline std::size_t chunk_rows(std::size_t count) { return (count + kChunk - 1) / kChunk; }
}  // namespace

cplx frobenius_inner_serial(const cplx* a, const cplx* b, std::size_t count) {
    auto row = [&](std::size_t i, std::size_t) {
        cplx s = 0.0;
        const std::size_t lo = i * kChunk, hi = std::min(count, lo + kChunk);
        for (std::size_t k = lo; k < hi; ++k) s += a[k] * std::conj(b[k]);
        return s;
    };
    return reduce_rows_serial<cplx>(chunk_rows(count), kChunk, row);
}

cplx frobenius_inner_openmp(const cplx* a, const cplx* b, std::size_t count) {
    auto row = [&](std::size_t i, std::size_t) {
        cplx s = 0.0;
        const std::size_t lo = i * kChunk, hi = std::min(count, lo + kChunk);
        for (std::size_t k = lo; k < hi; ++k) s += a[k] * std::conj(b[k]);
        return s;
    };
    return reduce_rows_openmp<cplx>(chunk_rows(count), kChunk, row);
}

cplx frobenius_inner(const cplx* a, const cplx* b, std::size_t count) {
    return execution() == Exec::serial ? frobenius_inner_serial(a, b, count)
                                       : frobenius_inner_openmp(a, b, count);
}

double distance_sq_serial(const cplx* a, const cplx* b, std::size_t count) {
    auto row = [&](std::size_t i, std::size_t) {
        double s = 0.0;
        const std::size_t lo = i * kChunk, hi = std::min(count, lo + kChunk);
        for (std::size_t k = lo; k < hi; ++k) s += std::norm(a[k] - b[k]);
        return s;
    };
    return reduce_rows_serial<double>(chunk_rows(count), kChunk, row);
}

double distance_sq_openmp(const cplx* a, const cplx* b, std::size_t count) {
    auto row = [&](std::size_t i, std::size_t) {
        double s = 0.0;
        const std::size_t lo = i * kChunk, hi = std::min(count, lo + kChunk);
        for (std::size_t k = lo; k < hi; ++k) s += std::norm(a[k] - b[k]);
        return s;
    };
    return reduce_rows_openmp<double>(chunk_rows(count), kChunk, row);
}

double distance_sq(const cplx* a, const cplx* b, std::size_t count) {
    return execution() == Exec::serial ? distance_sq_serial(a, b, count)
                                       : distance_sq_openmp(a, b, count);
}

Operator mul(const Operator& a, const Operator& b) {
    if (a.side() != b.side()) throw std::invalid_argument("mul: shape mismatch");
    Operator c(a.dims);
    matmul(a.entries.data(), b.entries.data(), c.entries.data(), a.side());
    return c;
}

Operator mul_adjoint_right(const Operator& a, const Operator& b) {
    if (a.side() != b.side()) throw std::invalid_argument("mul_adjoint_right: shape mismatch");
    const Operator bd = b.dagger();
    Operator c(a.dims);
    matmul(a.entries.data(), bd.entries.data(), c.entries.data(), a.side());
    return c;
}

}  // namespace vch::kernels
