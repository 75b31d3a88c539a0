#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vch/histories.hpp"

namespace vch {

// Single spin precessing in a magnetic field: one qubit, no environment,
// rho = |+><+|, and each of the k segments advances the Bloch azimuth by
// gamma_b_dt radians.
struct SpinFieldConfig {
    double gamma_b_dt = 2.0;
    int k = 2;
};

ModelSpec spin_field_model(const SpinFieldConfig& cfg = {});

// Chiral molecule in a collisional environment: one system qubit with
// chirality basis |R/L> = |+/->, plus one fresh environment qubit per
// collision. Each interval applies a z-rotation by theta_z (tunneling), then
// an x-rotation by theta_x on that interval's environment qubit, applied only
// on the |+> chirality component. Projections sit just after each collision.
struct ChiralConfig {
    double theta_z = 0.0;
    double theta_x = 0.0;
    int collisions = 5;
};

ModelSpec chiral_model(const ChiralConfig& cfg);

// Seed-determined random corpus entry: random Hermitian-generated segments,
// random pure or mixed initial state, random projector bases, and (at random)
// coarse rank partitions and branch-dependent basis changes.
struct RandomModel {
    ModelSpec model;
    FamilySpec family;
};

RandomModel random_model(int s_dim, int e_dim, int k, std::uint64_t seed);

// Geodesic sphere from a subdivided icosahedron. The icosahedron's standard
// orientation has two-fold axes along x, y, z, so after one subdivision the
// six +-axis points are exact vertices; they persist at every deeper level.
struct SphereMesh {
    std::vector<std::array<double, 3>> vertices;  // unit norm
    std::vector<std::array<int, 3>> faces;
    std::vector<std::vector<int>> neighbors;  // sorted per vertex

    int vertex_index(const std::array<double, 3>& axis, double tol = 1e-9) const;  // -1 when absent
};

SphereMesh icosphere(int subdivisions);

}  // namespace vch
