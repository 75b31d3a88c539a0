#include "vch/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "vch/kernels.hpp"
#include "vch/qmath.hpp"
#include "vch/rng.hpp"

namespace vch {

namespace {

Operator plus_projector() {
    Operator p;
    p.dims = {2};
    p.entries = {0.5, 0.5, 0.5, 0.5};
    return p;
}

Operator rz(double t) {
    Operator u;
    u.dims = {2};
    u.entries = {std::exp(cplx(0.0, -0.5 * t)), 0.0, 0.0, std::exp(cplx(0.0, 0.5 * t))};
    return u;
}

Operator rx(double t) {
    const double c = std::cos(t / 2.0), s = std::sin(t / 2.0);
    Operator u;
    u.dims = {2};
    u.entries = {cplx(c, 0.0), cplx(0.0, -s), cplx(0.0, -s), cplx(c, 0.0)};
    return u;
}

Operator random_hermitian(const std::vector<int>& dims, RngStream& rng) {
    Operator h = Operator::zero(dims);
    const int n = h.side();
    for (int r = 0; r < n; ++r) {
        h.entries[static_cast<std::size_t>(r * n + r)] = rng.next_normal();
        for (int c = r + 1; c < n; ++c) {
            const cplx v(rng.next_normal() * 0.5, rng.next_normal() * 0.5);
            h.entries[static_cast<std::size_t>(r * n + c)] = v;
            h.entries[static_cast<std::size_t>(c * n + r)] = std::conj(v);
        }
    }
    return h;
}

Operator random_unitary(const std::vector<int>& dims, RngStream& rng) {
    return evolve_unitary(random_hermitian(dims, rng), 1.0);
}

Operator random_state(const std::vector<int>& dims, bool pure, RngStream& rng) {
    Operator rho = Operator::zero(dims);
    const int n = rho.side();
    if (pure) {
        std::vector<cplx> psi(static_cast<std::size_t>(n));
        double norm_sq = 0.0;
        for (cplx& a : psi) {
            a = cplx(rng.next_normal(), rng.next_normal());
            norm_sq += std::norm(a);
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                rho.entries[static_cast<std::size_t>(r * n + c)] = psi[static_cast<std::size_t>(r)] * inv *
                                                                   std::conj(psi[static_cast<std::size_t>(c)]) * inv;
        return rho;
    }
    // A A^dagger / Tr for a square Ginibre-style A.
    std::vector<cplx> a(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (cplx& v : a) v = cplx(rng.next_normal(), rng.next_normal());
    double tr = 0.0;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            cplx s = 0.0;
            for (int t = 0; t < n; ++t)
                s += a[static_cast<std::size_t>(r * n + t)] * std::conj(a[static_cast<std::size_t>(c * n + t)]);
            rho.entries[static_cast<std::size_t>(r * n + c)] = s;
        }
        tr += rho.entries[static_cast<std::size_t>(r * n + r)].real();
    }
    for (cplx& v : rho.entries) v /= tr;
    return rho;
}

// Ordered partition of {0..s_dim-1} into m nonempty groups: the first m
// indices pin one group each, the rest land uniformly.
std::vector<std::vector<int>> random_partition(int s_dim, int m, RngStream& rng) {
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(m));
    for (int i = 0; i < s_dim; ++i) {
        const int g = (i < m) ? i : static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(m));
        groups[static_cast<std::size_t>(g)].push_back(i);
    }
    return groups;
}

}  // namespace

ModelSpec spin_field_model(const SpinFieldConfig& cfg) {
    if (cfg.k < 1) throw std::invalid_argument("spin_field_model: k must be >= 1");
    Operator u = Operator::identity({2});
    u.entries[3] = std::exp(cplx(0.0, cfg.gamma_b_dt));

    ModelSpec model;
    model.rho = plus_projector();
    model.s_dims = {2};
    model.segments.assign(static_cast<std::size_t>(cfg.k), Segment{u, std::nullopt});
    model.validate();
    return model;
}

ModelSpec chiral_model(const ChiralConfig& cfg) {
    if (cfg.collisions < 1) throw std::invalid_argument("chiral_model: collisions must be >= 1");
    const int nc = cfg.collisions;

    ModelSpec model;
    model.s_dims = {2};
    model.e_dims.assign(static_cast<std::size_t>(nc), 2);

    Operator e_ground = Operator::zero(model.e_dims);
    e_ground.entries[0] = 1.0;
    model.rho = tensor(plus_projector(), e_ground);

    const Operator p_plus = plus_projector();
    Operator p_minus = Operator::identity({2});
    for (std::size_t i = 0; i < 4; ++i) p_minus.entries[i] -= p_plus.entries[i];

    const Operator tunneling = tensor(rz(cfg.theta_z), Operator::identity(model.e_dims));
    for (int j = 0; j < nc; ++j) {
        // Collision j: x-rotation on environment qubit j for the |+> chirality
        // component, identity for |->.
        Operator kicked = p_plus;
        for (int l = 0; l < nc; ++l) kicked = tensor(kicked, l == j ? rx(cfg.theta_x) : Operator::identity({2}));
        Operator idle = tensor(p_minus, Operator::identity(model.e_dims));
        for (std::size_t i = 0; i < kicked.entries.size(); ++i) kicked.entries[i] += idle.entries[i];
        model.segments.push_back(Segment{kernels::mul(kicked, tunneling), std::nullopt});
    }
    model.validate();
    return model;
}

RandomModel random_model(int s_dim, int e_dim, int k, std::uint64_t seed) {
    if (s_dim < 2 || s_dim > 4 || e_dim < 1 || e_dim > 4 || k < 1 || k > 3)
        throw std::invalid_argument("random_model: supported ranges are dim S in [2,4], dim E in [1,4], k in [1,3]");
    RngStream rng = RngStream::derive(seed, "random_model");

    RandomModel out;
    out.model.s_dims = {s_dim};
    if (e_dim > 1) out.model.e_dims = {e_dim};
    const std::vector<int> se = out.model.se_dims();

    out.model.rho = random_state(se, rng.next_u64() % 2 == 0, rng);
    for (int j = 0; j < k; ++j) out.model.segments.push_back(Segment{random_hermitian(se, rng), 1.0});

    std::vector<int> outcome_counts;
    for (int j = 0; j < k; ++j) {
        TimeStep step;
        step.basis = random_unitary({s_dim}, rng);
        const bool coarse = rng.next_u64() % 2 == 0;
        const int m = coarse ? 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(s_dim)) : s_dim;
        step.rank_partition = random_partition(s_dim, m, rng);
        // Branch dependence: every outcome prefix gets its own extra rotation.
        if (j > 0 && rng.next_u64() % 2 == 0) {
            std::vector<int> prefix(static_cast<std::size_t>(j), 0);
            for (;;) {
                step.branch_map[prefix] = random_unitary({s_dim}, rng);
                int d = j - 1;
                for (; d >= 0; --d) {
                    if (++prefix[static_cast<std::size_t>(d)] < outcome_counts[static_cast<std::size_t>(d)]) break;
                    prefix[static_cast<std::size_t>(d)] = 0;
                }
                if (d < 0) break;
            }
        }
        outcome_counts.push_back(m);
        out.family.steps.push_back(std::move(step));
    }

    out.model.validate();
    out.family.validate(s_dim);
    return out;
}

namespace {

std::array<double, 3> normalized(std::array<double, 3> v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    return {v[0] / n, v[1] / n, v[2] / n};
}

double dist_sq(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace

SphereMesh icosphere(int subdivisions) {
    if (subdivisions < 0 || subdivisions > 6) throw std::invalid_argument("icosphere: subdivisions in [0, 6]");
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;

    SphereMesh mesh;
    for (double a : {-1.0, 1.0})
        for (double b : {-phi, phi}) {
            mesh.vertices.push_back(normalized({0.0, a, b}));
            mesh.vertices.push_back(normalized({a, b, 0.0}));
            mesh.vertices.push_back(normalized({b, 0.0, a}));
        }
    // Faces: vertex triples that are pairwise one un-normalized edge apart.
    const double edge_sq = 4.0 / (phi * phi + 1.0);
    const int n0 = static_cast<int>(mesh.vertices.size());
    for (int i = 0; i < n0; ++i)
        for (int j = i + 1; j < n0; ++j)
            for (int l = j + 1; l < n0; ++l) {
                const bool edge_ij = std::abs(dist_sq(mesh.vertices[static_cast<std::size_t>(i)],
                                                      mesh.vertices[static_cast<std::size_t>(j)]) - edge_sq) < 1e-9;
                const bool edge_jl = std::abs(dist_sq(mesh.vertices[static_cast<std::size_t>(j)],
                                                      mesh.vertices[static_cast<std::size_t>(l)]) - edge_sq) < 1e-9;
                const bool edge_il = std::abs(dist_sq(mesh.vertices[static_cast<std::size_t>(i)],
                                                      mesh.vertices[static_cast<std::size_t>(l)]) - edge_sq) < 1e-9;
                if (edge_ij && edge_jl && edge_il) mesh.faces.push_back({i, j, l});
            }

    for (int pass = 0; pass < subdivisions; ++pass) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int i, int j) {
            const auto key = std::minmax(i, j);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const auto& a = mesh.vertices[static_cast<std::size_t>(i)];
            const auto& b = mesh.vertices[static_cast<std::size_t>(j)];
            mesh.vertices.push_back(normalized({(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0}));
            const int ix = static_cast<int>(mesh.vertices.size()) - 1;
            midpoint.emplace(key, ix);
            return ix;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(mesh.faces.size() * 4);
        for (const auto& [i, j, l] : mesh.faces) {
            const int a = mid(i, j), b = mid(j, l), c = mid(i, l);
            next.push_back({i, a, c});
            next.push_back({j, b, a});
            next.push_back({l, c, b});
            next.push_back({a, b, c});
        }
        mesh.faces = std::move(next);
    }

    std::vector<std::set<int>> adj(mesh.vertices.size());
    for (const auto& [i, j, l] : mesh.faces) {
        adj[static_cast<std::size_t>(i)].insert({j, l});
        adj[static_cast<std::size_t>(j)].insert({i, l});
        adj[static_cast<std::size_t>(l)].insert({i, j});
    }
    mesh.neighbors.reserve(adj.size());
    for (const auto& s : adj) mesh.neighbors.emplace_back(s.begin(), s.end());
    return mesh;
}

int SphereMesh::vertex_index(const std::array<double, 3>& axis, double tol) const {
    for (std::size_t i = 0; i < vertices.size(); ++i)
        if (std::sqrt(dist_sq(vertices[i], axis)) < tol) return static_cast<int>(i);
    return -1;
}

}  // namespace vch
