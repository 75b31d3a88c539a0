#pragma once

#include <complex>
#include <vector>

#include "vch/operator.hpp"

// Dense kernels in two variants: a serial reference implementation and an
// OpenMP one. Both orders of arithmetic are fixed per output element, so the
// variants produce bit-identical results for any thread count; tests and the
// benchmark target compare them. The process-wide execution mode selects
// which variant the dispatching entry points use.

namespace vch::kernels {

enum class Exec { serial, openmp };

void set_execution(Exec mode);
Exec execution();

// C = A * B, n x n row-major.
void matmul_serial(const cplx* a, const cplx* b, cplx* c, int n);
void matmul_openmp(const cplx* a, const cplx* b, cplx* c, int n);
void matmul(const cplx* a, const cplx* b, cplx* c, int n);

// Y = (G (x) 1_rest) X where G is d_lead x d_lead acting on the leading
// tensor factor(s) of the row index; X is n x n with n = d_lead * rest.
void apply_left_prefix_serial(const cplx* g, const cplx* x, cplx* y, int d_lead, int n);
void apply_left_prefix_openmp(const cplx* g, const cplx* x, cplx* y, int d_lead, int n);
void apply_left_prefix(const cplx* g, const cplx* x, cplx* y, int d_lead, int n);

// Y = X (G (x) 1_rest)^dagger, same shape conventions.
void apply_right_prefix_adjoint_serial(const cplx* g, const cplx* x, cplx* y, int d_lead, int n);
void apply_right_prefix_adjoint_openmp(const cplx* g, const cplx* x, cplx* y, int d_lead, int n);
void apply_right_prefix_adjoint(const cplx* g, const cplx* x, cplx* y, int d_lead, int n);

// sum_ij a_ij * conj(b_ij)  (Hilbert-Schmidt inner product <B, A>).
cplx frobenius_inner_serial(const cplx* a, const cplx* b, std::size_t count);
cplx frobenius_inner_openmp(const cplx* a, const cplx* b, std::size_t count);
cplx frobenius_inner(const cplx* a, const cplx* b, std::size_t count);

// sum_ij |a_ij - b_ij|^2.
double distance_sq_serial(const cplx* a, const cplx* b, std::size_t count);
double distance_sq_openmp(const cplx* a, const cplx* b, std::size_t count);
double distance_sq(const cplx* a, const cplx* b, std::size_t count);

// Convenience wrappers over Operator.
Operator mul(const Operator& a, const Operator& b);
Operator mul_adjoint_right(const Operator& a, const Operator& b);  // a * b^dagger

}  // namespace vch::kernels
