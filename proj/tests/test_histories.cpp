#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "support/naive_matrix.hpp"
#include "vch/histories.hpp"
#include "vch/kernels.hpp"
#include "vch/qmath.hpp"
#include "vch/rng.hpp"

using vch::cplx;
using vch::DecoherenceMatrix;
using vch::FamilySpec;
using vch::HistoryLabel;
using vch::ModelSpec;
using vch::Operator;
using vch::Segment;
using vch::TimeStep;

namespace {

// Random unitary by Gram-Schmidt on Gaussian columns; independent of the
// library's linear algebra.
naive::Matrix random_unitary(int n, vch::RngStream& rng) {
    naive::Matrix m = naive::Matrix::zero(n);
    for (int c = 0; c < n; ++c) {
        std::vector<cplx> v(static_cast<std::size_t>(n));
        for (cplx& x : v) x = cplx(rng.next_normal(), rng.next_normal());
        for (int prev = 0; prev < c; ++prev) {
            cplx overlap = 0.0;
            for (int r = 0; r < n; ++r) overlap += std::conj(m.at(r, prev)) * v[static_cast<std::size_t>(r)];
            for (int r = 0; r < n; ++r) v[static_cast<std::size_t>(r)] -= overlap * m.at(r, prev);
        }
        double norm = 0.0;
        for (const cplx& x : v) norm += std::norm(x);
        norm = std::sqrt(norm);
        for (int r = 0; r < n; ++r) m.at(r, c) = v[static_cast<std::size_t>(r)] / norm;
    }
    return m;
}

naive::Matrix random_density_naive(int n, vch::RngStream& rng) {
    naive::Matrix g = naive::Matrix::zero(n);
    for (cplx& x : g.a) x = cplx(rng.next_normal(), rng.next_normal());
    naive::Matrix rho = naive::mul(g, naive::dagger(g));
    const cplx t = naive::trace(rho);
    for (cplx& x : rho.a) x /= t;
    return rho;
}

Operator to_op(const naive::Matrix& m, std::vector<int> dims) {
    return Operator(std::move(dims), m.a);
}

naive::Matrix to_naive(const Operator& m) {
    naive::Matrix out = naive::Matrix::zero(m.side());
    out.a = m.entries;
    return out;
}

// Projector onto the span of the selected columns of b.
naive::Matrix columns_projector(const naive::Matrix& b, const std::vector<int>& cols) {
    naive::Matrix p = naive::Matrix::zero(b.n);
    for (int col : cols)
        for (int r = 0; r < b.n; ++r)
            for (int c = 0; c < b.n; ++c) p.at(r, c) += b.at(r, col) * std::conj(b.at(c, col));
    return p;
}

struct OracleSetup {
    ModelSpec model;
    FamilySpec family;
    naive::Matrix rho;
    naive::Matrix u1, u2;          // segment unitaries on S(x)E
    naive::Matrix v0, v1, w0, w1;  // bases and prefix branches on S
};

// Two-time qubit-system model with a three-level environment and a
// prefix-dependent second measurement.
OracleSetup make_oracle_setup(std::uint64_t seed) {
    vch::RngStream rng(seed);
    OracleSetup s{.model = {},
                  .family = {},
                  .rho = random_density_naive(6, rng),
                  .u1 = random_unitary(6, rng),
                  .u2 = random_unitary(6, rng),
                  .v0 = random_unitary(2, rng),
                  .v1 = random_unitary(2, rng),
                  .w0 = random_unitary(2, rng),
                  .w1 = random_unitary(2, rng)};

    s.model.rho = to_op(s.rho, {2, 3});
    s.model.segments = {Segment{to_op(s.u1, {2, 3}), std::nullopt}, Segment{to_op(s.u2, {2, 3}), std::nullopt}};
    s.model.s_dims = {2};
    s.model.e_dims = {3};

    TimeStep t0{to_op(s.v0, {2}), {{0}, {1}}, {}};
    TimeStep t1{to_op(s.v1, {2}), {{0}, {1}}, {}};
    t1.branch_map[{0}] = to_op(s.w0, {2});
    t1.branch_map[{1}] = to_op(s.w1, {2});
    s.family.steps = {t0, t1};
    return s;
}

// C(a0,a1) = (P1 (x) 1) U2 (P0 (x) 1) U1 with the branch for prefix a0
// folded into the second basis.
naive::Matrix oracle_class_operator(const OracleSetup& s, int a0, int a1) {
    const naive::Matrix e3 = naive::Matrix::eye(3);
    const naive::Matrix p0 = columns_projector(s.v0, {a0});
    const naive::Matrix btilde = naive::mul(a0 == 0 ? s.w0 : s.w1, s.v1);
    const naive::Matrix p1 = columns_projector(btilde, {a1});
    naive::Matrix m = naive::mul(naive::kron(p0, e3), s.u1);
    m = naive::mul(s.u2, m);
    return naive::mul(naive::kron(p1, e3), m);
}

}  // namespace

TEST_CASE("all_labels runs lexicographically and label_index inverts it") {
    FamilySpec fam;
    fam.steps = {TimeStep{Operator::identity({2}), {{0}, {1}}, {}},
                 TimeStep{Operator::identity({2}), {{0}, {1}, {0}}, {}}};
    // outcome_dims only counts groups; the second step's shape is irrelevant here.
    CHECK(fam.outcome_dims() == std::vector<int>{2, 3});
    CHECK(fam.label_count() == 6);

    const auto labels = vch::all_labels(fam);
    REQUIRE(labels.size() == 6);
    CHECK(labels[0] == HistoryLabel{0, 0});
    CHECK(labels[1] == HistoryLabel{0, 1});
    CHECK(labels[2] == HistoryLabel{0, 2});
    CHECK(labels[3] == HistoryLabel{1, 0});
    CHECK(labels[5] == HistoryLabel{1, 2});
    for (long long i = 0; i < 6; ++i) CHECK(vch::label_index(fam, labels[static_cast<std::size_t>(i)]) == i);

    CHECK_THROWS_AS(vch::label_index(fam, HistoryLabel{0}), std::invalid_argument);
    CHECK_THROWS_AS(vch::label_index(fam, HistoryLabel{0, 3}), std::invalid_argument);
}

TEST_CASE("projector in the computational basis selects partition groups") {
    FamilySpec fam;
    fam.steps = {TimeStep{Operator::identity({4}), {{0, 3}, {1, 2}}, {}}};

    const Operator p0 = vch::projector(fam, 0, {}, 0);
    const Operator p1 = vch::projector(fam, 0, {}, 1);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            const double want0 = (r == c && (r == 0 || r == 3)) ? 1.0 : 0.0;
            const double want1 = (r == c && (r == 1 || r == 2)) ? 1.0 : 0.0;
            CHECK(p0.at(r, c) == cplx(want0));
            CHECK(p1.at(r, c) == cplx(want1));
        }
}

TEST_CASE("projectors in a rotated basis are idempotent, hermitian and complete") {
    vch::RngStream rng(21);
    const naive::Matrix b = random_unitary(3, rng);
    FamilySpec fam;
    fam.steps = {TimeStep{to_op(b, {3}), {{1}, {0, 2}}, {}}};

    Operator sum = Operator::zero({3});
    for (int a = 0; a < 2; ++a) {
        const Operator p = vch::projector(fam, 0, {}, a);
        CHECK(p.is_hermitian(1e-13));
        const Operator pp = vch::kernels::mul(p, p);
        CHECK(vch::hs_distance_sq(pp, p) < 1e-26);
        const std::vector<int> cols = a == 0 ? std::vector<int>{1} : std::vector<int>{0, 2};
        CHECK(naive::max_abs_diff(to_naive(p), columns_projector(b, cols)) < 1e-14);
        for (std::size_t i = 0; i < sum.entries.size(); ++i) sum.entries[i] += p.entries[i];
    }
    CHECK(vch::hs_distance_sq(sum, Operator::identity({3})) < 1e-26);
}

TEST_CASE("projector composes the prefix branch unitary into the basis") {
    vch::RngStream rng(22);
    const naive::Matrix v = random_unitary(2, rng);
    const naive::Matrix w = random_unitary(2, rng);
    TimeStep st{to_op(v, {2}), {{0}, {1}}, {}};
    st.branch_map[{0}] = to_op(w, {2});
    FamilySpec fam;
    fam.steps = {TimeStep{Operator::identity({2}), {{0}, {1}}, {}}, st};

    const Operator p = vch::projector(fam, 1, {0}, 1);
    const naive::Matrix want = columns_projector(naive::mul(w, v), {1});
    CHECK(naive::max_abs_diff(to_naive(p), want) < 1e-14);

    // A nonempty branch map must cover every prefix it is asked about.
    CHECK_THROWS_AS(vch::projector(fam, 1, {1}, 0), std::invalid_argument);
}

TEST_CASE("class_operator with full coarse graining is the plain segment product") {
    vch::RngStream rng(23);
    const naive::Matrix u1 = random_unitary(4, rng);
    const naive::Matrix u2 = random_unitary(4, rng);
    ModelSpec model;
    model.rho = to_op(random_density_naive(4, rng), {2, 2});
    model.segments = {Segment{to_op(u1, {2, 2}), std::nullopt}, Segment{to_op(u2, {2, 2}), std::nullopt}};
    model.s_dims = {2};
    model.e_dims = {2};

    FamilySpec fam;
    fam.steps = {TimeStep{Operator::identity({2}), {{0, 1}}, {}}, TimeStep{Operator::identity({2}), {{0, 1}}, {}}};

    const Operator c = vch::class_operator(model, fam, {0, 0});
    CHECK(naive::max_abs_diff(to_naive(c), naive::mul(u2, u1)) < 1e-13);
}

TEST_CASE("class_operator matches the naive oracle with prefix branching") {
    const OracleSetup s = make_oracle_setup(24);
    for (int a0 = 0; a0 < 2; ++a0)
        for (int a1 = 0; a1 < 2; ++a1) {
            const Operator got = vch::class_operator(s.model, s.family, {a0, a1});
            CHECK(naive::max_abs_diff(to_naive(got), oracle_class_operator(s, a0, a1)) < 1e-13);
        }

    // Class operators resolve over the whole family: summed, they give back
    // the uninterrupted evolution.
    naive::Matrix sum = naive::Matrix::zero(6);
    for (int a0 = 0; a0 < 2; ++a0)
        for (int a1 = 0; a1 < 2; ++a1) {
            const Operator c = vch::class_operator(s.model, s.family, {a0, a1});
            for (int i = 0; i < 36; ++i) sum.a[static_cast<std::size_t>(i)] += c.entries[static_cast<std::size_t>(i)];
        }
    CHECK(naive::max_abs_diff(sum, naive::mul(s.u2, s.u1)) < 1e-13);
}

TEST_CASE("class_operator rejects a label whose branch prefix is unmapped") {
    OracleSetup s = make_oracle_setup(25);
    s.family.steps[1].branch_map.erase({1});
    CHECK_THROWS_AS(vch::class_operator(s.model, s.family, {1, 0}), std::invalid_argument);
    // The mapped branch still works.
    CHECK_NOTHROW(vch::class_operator(s.model, s.family, {0, 0}));
}

TEST_CASE("full decoherence matrix matches the naive oracle entry for entry") {
    const OracleSetup s = make_oracle_setup(26);
    const DecoherenceMatrix d = vch::decoherence_matrix(s.model, s.family, DecoherenceMatrix::Mode::full);
    REQUIRE(d.size() == 4);
    REQUIRE(d.labels.size() == 4);

    std::vector<naive::Matrix> cls;
    for (const HistoryLabel& lab : d.labels) cls.push_back(oracle_class_operator(s, lab[0], lab[1]));

    double probability_sum = 0.0;
    for (long long a = 0; a < 4; ++a)
        for (long long b = 0; b < 4; ++b) {
            const naive::Matrix prod =
                naive::mul(naive::mul(cls[static_cast<std::size_t>(a)], s.rho), naive::dagger(cls[static_cast<std::size_t>(b)]));
            const cplx want = naive::trace(prod);
            CHECK(std::abs(d.full_at(a, b) - want) < 1e-13);
            if (a == b) {
                CHECK(d.full_at(a, a).imag() == 0.0);
                probability_sum += d.full_at(a, a).real();
            }
        }
    CHECK(std::abs(probability_sum - 1.0) < 1e-10);

    // The matrix is a Gram matrix, so it is positive semidefinite.
    Operator as_op({static_cast<int>(d.size())}, d.entries);
    CHECK(as_op.min_eigenvalue() >= -1e-10);
}

TEST_CASE("partial decoherence matrix blocks trace down to the full entries") {
    const OracleSetup s = make_oracle_setup(27);
    const DecoherenceMatrix dp = vch::decoherence_matrix(s.model, s.family, DecoherenceMatrix::Mode::partial);
    const DecoherenceMatrix df = vch::decoherence_matrix(s.model, s.family, DecoherenceMatrix::Mode::full);

    for (long long a = 0; a < dp.size(); ++a)
        for (long long b = 0; b < dp.size(); ++b) {
            const Operator& blk = dp.block_at(a, b);
            CHECK(blk.side() == 2);
            CHECK(std::abs(blk.trace() - df.full_at(a, b)) < 1e-13);

            // Adjoint structure: block(b,a) = block(a,b)^dagger.
            CHECK(vch::hs_distance_sq(blk, dp.block_at(b, a).dagger()) < 1e-24);

            // Oracle: the block is the environment trace of C_a rho C_b^dagger.
            const naive::Matrix big = naive::mul(naive::mul(oracle_class_operator(s, dp.labels[static_cast<std::size_t>(a)][0],
                                                                                  dp.labels[static_cast<std::size_t>(a)][1]),
                                                            s.rho),
                                                 naive::dagger(oracle_class_operator(s, dp.labels[static_cast<std::size_t>(b)][0],
                                                                                     dp.labels[static_cast<std::size_t>(b)][1])));
            const naive::Matrix want = naive::trace_out_inner(big, 2, 3);
            CHECK(naive::max_abs_diff(to_naive(blk), want) < 1e-13);
        }
}

TEST_CASE("a single fully coarse history is exactly consistent") {
    vch::RngStream rng(28);
    ModelSpec model;
    model.rho = to_op(random_density_naive(2, rng), {2});
    model.segments = {Segment{to_op(random_unitary(2, rng), {2}), std::nullopt}};
    model.s_dims = {2};
    model.e_dims = {};

    FamilySpec fam;
    fam.steps = {TimeStep{Operator::identity({2}), {{0, 1}}, {}}};

    const DecoherenceMatrix d = vch::decoherence_matrix(model, fam, DecoherenceMatrix::Mode::full);
    REQUIRE(d.size() == 1);
    CHECK(std::abs(d.full_at(0, 0) - cplx(1.0)) < 1e-12);
    const auto check = vch::check_consistency(d, 1e-12, vch::ConsistencyFlavor::strong);
    CHECK(check.passed);
    CHECK(check.max_violation == 0.0);
}

TEST_CASE("hamiltonian segments resolve to the same matrix as their precomputed unitaries") {
    vch::RngStream rng(29);
    Operator h({2, 2});
    for (int r = 0; r < 4; ++r) {
        h.at(r, r) = rng.next_normal();
        for (int c = r + 1; c < 4; ++c) {
            h.at(r, c) = cplx(rng.next_normal(), rng.next_normal());
            h.at(c, r) = std::conj(h.at(r, c));
        }
    }
    const double dt = 0.37;
    const Operator u = vch::evolve_unitary(h, dt);

    ModelSpec via_h, via_u;
    via_h.rho = via_u.rho = to_op(random_density_naive(4, rng), {2, 2});
    via_h.segments = {Segment{h, dt}};
    via_u.segments = {Segment{u, std::nullopt}};
    via_h.s_dims = via_u.s_dims = {2};
    via_h.e_dims = via_u.e_dims = {2};

    FamilySpec fam;
    fam.steps = {TimeStep{Operator::identity({2}), {{0}, {1}}, {}}};

    const DecoherenceMatrix dh = vch::decoherence_matrix(via_h, fam, DecoherenceMatrix::Mode::full);
    const DecoherenceMatrix du = vch::decoherence_matrix(via_u, fam, DecoherenceMatrix::Mode::full);
    for (long long a = 0; a < 2; ++a)
        for (long long b = 0; b < 2; ++b) CHECK(std::abs(dh.full_at(a, b) - du.full_at(a, b)) < 1e-13);
}

TEST_CASE("consistency flavors measure the right part of the off-diagonals") {
    DecoherenceMatrix d;
    d.mode = DecoherenceMatrix::Mode::full;
    d.labels = {{0}, {1}};
    d.entries = {cplx(0.5, 0.0), cplx(0.0, 0.2), cplx(0.0, -0.2), cplx(0.5, 0.0)};

    const auto weak = vch::check_consistency(d, 1e-12, vch::ConsistencyFlavor::real_part);
    CHECK(weak.passed);
    CHECK(weak.max_violation == 0.0);

    const auto strong = vch::check_consistency(d, 1e-12, vch::ConsistencyFlavor::strong);
    CHECK_FALSE(strong.passed);
    CHECK(strong.max_violation == doctest::Approx(0.2).epsilon(1e-12));

    CHECK_THROWS_AS(vch::check_consistency(d, 1e-12, vch::ConsistencyFlavor::partial), std::invalid_argument);

    DecoherenceMatrix p;
    p.mode = DecoherenceMatrix::Mode::partial;
    p.labels = {{0}};
    p.blocks = {Operator::identity({2})};
    CHECK_THROWS_AS(vch::check_consistency(p, 1e-12, vch::ConsistencyFlavor::strong), std::invalid_argument);
    const auto part = vch::check_consistency(p, 1e-12, vch::ConsistencyFlavor::partial);
    CHECK(part.passed);  // single label has no off-diagonal pairs
}

TEST_CASE("partial consistency measures block norms") {
    DecoherenceMatrix p;
    p.mode = DecoherenceMatrix::Mode::partial;
    p.labels = {{0}, {1}};
    Operator off({2});
    off.at(0, 1) = cplx(0.3, 0.4);  // HS norm 0.5
    p.blocks = {Operator::identity({2}), off, off.dagger(), Operator::identity({2})};
    const auto check = vch::check_consistency(p, 0.1, vch::ConsistencyFlavor::partial);
    CHECK_FALSE(check.passed);
    CHECK(check.max_violation == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(vch::check_consistency(p, 0.5 + 1e-9, vch::ConsistencyFlavor::partial).passed);
}

TEST_CASE("pairwise epsilon normalizes interference by probabilities") {
    DecoherenceMatrix d;
    d.mode = DecoherenceMatrix::Mode::full;
    d.labels = {{0}, {1}};
    d.entries = {cplx(0.5), cplx(0.5), cplx(0.5), cplx(0.5)};

    const vch::EpsilonTable t = vch::pairwise_epsilon(d);
    REQUIRE(t.n == 2);
    CHECK(t.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.at(0, 0) == 0.0);
    CHECK(t.is_defined(0, 1));

    // Pairs touching a zero-probability history are flagged, not divided.
    d.entries = {cplx(1.0), cplx(0.0), cplx(0.0), cplx(0.0)};
    const vch::EpsilonTable z = vch::pairwise_epsilon(d);
    CHECK_FALSE(z.is_defined(0, 1));
    CHECK_FALSE(z.is_defined(1, 0));
    CHECK(z.at(0, 1) == 0.0);

    DecoherenceMatrix p;
    p.mode = DecoherenceMatrix::Mode::partial;
    CHECK_THROWS_AS(vch::pairwise_epsilon(p), std::invalid_argument);
}

TEST_CASE("model and family validation rejects malformed input") {
    vch::RngStream rng(30);
    ModelSpec model;
    model.rho = to_op(random_density_naive(4, rng), {2, 2});
    model.segments = {Segment{to_op(random_unitary(4, rng), {2, 2}), std::nullopt}};
    model.s_dims = {2};
    model.e_dims = {2};
    CHECK_NOTHROW(model.validate());

    ModelSpec bad_trace = model;
    bad_trace.rho.entries[0] += 0.5;
    CHECK_THROWS_AS(bad_trace.validate(), vch::NumericalError);

    ModelSpec bad_herm = model;
    bad_herm.rho.at(0, 1) += cplx(0.0, 1e-6);
    CHECK_THROWS_AS(bad_herm.validate(), vch::NumericalError);

    ModelSpec bad_side = model;
    bad_side.s_dims = {3};
    CHECK_THROWS_AS(bad_side.validate(), std::invalid_argument);

    FamilySpec fam;
    fam.steps = {TimeStep{Operator::identity({2}), {{0}, {1}}, {}}};
    CHECK_NOTHROW(fam.validate(2));

    FamilySpec empty_group = fam;
    empty_group.steps[0].rank_partition = {{0, 1}, {}};
    CHECK_THROWS_AS(empty_group.validate(2), std::invalid_argument);

    FamilySpec double_cover = fam;
    double_cover.steps[0].rank_partition = {{0}, {0, 1}};
    CHECK_THROWS_AS(double_cover.validate(2), std::invalid_argument);

    FamilySpec bad_basis = fam;
    bad_basis.steps[0].basis.at(0, 0) = 2.0;
    CHECK_THROWS_AS(bad_basis.validate(2), vch::NumericalError);
}
