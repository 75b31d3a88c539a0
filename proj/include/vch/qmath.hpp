#pragma once

#include "vch/operator.hpp"

namespace vch {

// Kronecker product; dims concatenate, a's factors outermost.
Operator tensor(const Operator& a, const Operator& b);

// exp(-i h dt) via eigendecomposition of the Hermitian generator.
// Rejects h with hermiticity defect above 1e-12.
Operator evolve_unitary(const Operator& h, double dt);

// Trace out the selected subsystems; remaining dims keep their order.
Operator partial_trace(const Operator& m, const SubsystemSelector& discard);

// Zero every entry whose row and column indices differ on the selected
// subsystems; identity on the complement.
Operator dephase(const Operator& m, const SubsystemSelector& on);

// Tr((a-b)^dagger (a-b)) = sum |a_ij - b_ij|^2.
double hs_distance_sq(const Operator& a, const Operator& b);

// Strides of each tensor factor for row-major composite indices.
std::vector<long long> dim_strides(const std::vector<int>& dims);

}  // namespace vch
