#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bcdiff/boundary.hpp"
#include "bcdiff/oracle.hpp"
#include "bcdiff/parallel.hpp"
#include "bcdiff/rng.hpp"

using namespace bcdiff;

TEST_CASE("a one-dimensional crossing worked through by hand") {
    // Anchor +1 against competitor -1 with noise -2: scores tie where
    // u (1 - (-1)) = v ((-1)(-2) - (1)(-2)), so q = 2/4 = 0.5.
    EmbeddingTable bits = binary_bit_table();
    double x0 = 1.0, eps = -2.0;
    FractionResult f = boundary_fraction(&x0, &eps, 0, bits);
    CHECK_FALSE(f.masked);
    CHECK(f.q == 0.5);
    CHECK(f.j_star == 1);

    SUBCASE("straight-line schedule") {
        Schedule s = Schedule::ot(900);
        BoundaryCoeff c = boundary_coeffs(f.q, s.kind());
        CHECK(c.u == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(c.v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        CHECK(stopping_time(f.q, s) == doctest::Approx(300.0).epsilon(1e-12));
        // The crossing point sits exactly on the score boundary.
        CHECK(c.u * x0 + c.v * eps == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("variance-preserving schedule") {
        Schedule s = Schedule::vp(1000);
        BoundaryCoeff c = boundary_coeffs(f.q, s.kind());
        CHECK(c.u == doctest::Approx(1.0 / std::sqrt(1.25)).epsilon(1e-15));
        CHECK(c.v == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-15));
        CHECK(c.u * 2.0 == doctest::Approx(c.v * 4.0).epsilon(1e-12));
        double t0 = stopping_time(f.q, s);
        CHECK(s.coeff_at(t0).u == doctest::Approx(c.u).epsilon(1e-9));
    }
    SUBCASE("variance-exploding schedule") {
        Schedule s = Schedule::ve(1000);
        BoundaryCoeff c = boundary_coeffs(f.q, s.kind());
        CHECK(c.u == 1.0);
        CHECK(c.v == 0.5);
        double t0 = stopping_time(f.q, s);
        CHECK(t0 / 1000.0 == doctest::Approx(std::log(50.0) / std::log(5000.0)).epsilon(1e-12));
    }
}

TEST_CASE("a symmetric draw crosses exactly halfway") {
    EmbeddingTable bits = binary_bit_table();
    double x0 = 1.0, eps = -1.0;
    FractionResult f = boundary_fraction(&x0, &eps, 0, bits);
    CHECK(f.q == 1.0);
    Schedule ot = Schedule::ot(1000);
    CHECK(stopping_time(f.q, ot) == doctest::Approx(500.0).epsilon(1e-12));
    BoundaryCoeff vp = boundary_coeffs(1.0, ScheduleKind::vp);
    CHECK(vp.u == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(vp.v == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("noise that never tips the contest masks the element") {
    EmbeddingTable bits = binary_bit_table();
    double x0 = 1.0, eps = 3.0;  // pushes further into the anchor's region
    FractionResult f = boundary_fraction(&x0, &eps, 0, bits);
    CHECK(f.masked);
    CHECK(f.q == kMaskedFraction);
    CHECK(f.j_star == 0);

    Schedule ot = Schedule::ot(1010);
    Matrix mx0(1, 1), meps(1, 1);
    mx0.at(0, 0) = x0;
    meps.at(0, 0) = eps;
    BoundaryEstimate est = estimate_boundary(mx0, meps, {0}, bits, ot);
    CHECK(est.masked[0] == 1);
    CHECK(est.j_star[0] == 0);
    CHECK(est.t0[0] == doctest::Approx(1010.0 * 100.0 / 101.0).epsilon(1e-12));
    CHECK(est.masked_fraction() == 1.0);
}

TEST_CASE("coefficients solve the crossing equation under each constraint") {
    RngStream rng(derive_seed(5, kSeedEval, 1));
    for (int k = 0; k < 50; ++k) {
        double q = 0.02 + 6.0 * rng.uniform();
        BoundaryCoeff vp = boundary_coeffs(q, ScheduleKind::vp);
        CHECK(vp.u * vp.u + vp.v * vp.v == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(vp.v / vp.u == doctest::Approx(q).epsilon(1e-12));
        BoundaryCoeff ve = boundary_coeffs(q, ScheduleKind::ve);
        CHECK(ve.u == 1.0);
        CHECK(ve.v == q);
        BoundaryCoeff ot = boundary_coeffs(q, ScheduleKind::ot);
        CHECK(ot.u + ot.v == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ot.v / ot.u == doctest::Approx(q).epsilon(1e-12));
    }
    CHECK_THROWS_AS(boundary_coeffs(0.0, ScheduleKind::ot), std::invalid_argument);
    CHECK_THROWS_AS(boundary_coeffs(-1.0, ScheduleKind::vp), std::invalid_argument);
    CHECK_THROWS_AS(stopping_time(0.0, Schedule::ot(10)), std::invalid_argument);
}

TEST_CASE("the schedule reproduces the crossing coefficients at the stopping time") {
    Schedule vp = Schedule::vp(1000);
    Schedule ve = Schedule::ve(1000);
    Schedule ot = Schedule::ot(1000);
    RngStream rng(derive_seed(5, kSeedEval, 2));
    for (int k = 0; k < 60; ++k) {
        double q = 0.05 + 10.0 * rng.uniform();
        CHECK(vp.coeff_at(stopping_time(q, vp)).u ==
              doctest::Approx(boundary_coeffs(q, ScheduleKind::vp).u).epsilon(1e-9));
        CHECK(ot.coeff_at(stopping_time(q, ot)).u ==
              doctest::Approx(boundary_coeffs(q, ScheduleKind::ot).u).epsilon(1e-12));
        if (q > 0.011 && q < 49.0)
            CHECK(ve.coeff_at(stopping_time(q, ve)).v == doctest::Approx(q).epsilon(1e-9));
    }
}

namespace {

struct Instance {
    EmbeddingTable table;
    std::vector<std::size_t> indices;
    Matrix x0;
    Matrix eps;
};

// Anchors at the largest-norm row so the datum starts strictly inside its
// own region for every instance.
Instance random_instance(RngStream& rng, std::size_t n) {
    std::size_t K = 4 + rng.uniform_below(8);
    std::size_t m = 2 + rng.uniform_below(6);
    Instance inst{random_embedding_table(K, m, rng.next_u64(), false), {}, Matrix(), Matrix()};
    std::size_t best = 0;
    double best_norm = -1.0;
    for (std::size_t j = 0; j < K; ++j) {
        double norm = 0.0;
        for (std::size_t c = 0; c < m; ++c) norm += inst.table.row(j)[c] * inst.table.row(j)[c];
        if (norm > best_norm) {
            best_norm = norm;
            best = j;
        }
    }
    inst.indices.assign(n, best);
    inst.x0 = datum_from_indices(inst.indices, inst.table).x0;
    inst.eps = Matrix(n, m);
    rng.fill_normal(inst.eps);
    return inst;
}

}  // namespace

TEST_CASE("estimated exit times agree with a dense trajectory scan") {
    RngStream rng(derive_seed(5, kSeedEval, 3));
    int checked = 0;
    for (const Schedule& s : {Schedule::vp(200), Schedule::ve(200), Schedule::ot(200)}) {
        for (int k = 0; k < 20; ++k) {
            Instance inst = random_instance(rng, 4);
            BoundaryEstimate est =
                estimate_boundary(inst.x0, inst.eps, inst.indices, inst.table, s);
            for (std::size_t i = 0; i < 4; ++i) {
                double brute = brute_first_exit(inst.x0.row(i), inst.eps.row(i), inst.indices[i],
                                                inst.table, s, 32);
                if (est.masked[i]) {
                    CHECK(brute == 200.0);
                } else {
                    CHECK(std::fabs(est.t0[i] - brute) <= 2.0 / 32.0 + 1e-9);
                    ++checked;
                }
            }
        }
    }
    CHECK(checked > 60);
}

TEST_CASE("the parallel estimator matches its serial twin bit for bit") {
    RngStream rng(derive_seed(5, kSeedEval, 4));
    Instance inst = random_instance(rng, 64);
    Schedule s = Schedule::vp(500);
    set_threads(4);
    BoundaryEstimate par = estimate_boundary(inst.x0, inst.eps, inst.indices, inst.table, s);
    set_threads(0);
    BoundaryEstimate ser = estimate_boundary_serial(inst.x0, inst.eps, inst.indices, inst.table, s);
    CHECK(par.t0 == ser.t0);
    CHECK(par.u_t0 == ser.u_t0);
    CHECK(par.v_t0 == ser.v_t0);
    CHECK(par.j_star == ser.j_star);
    CHECK(par.masked == ser.masked);
}

TEST_CASE("the boundary flow and its inverse cancel on invertible crossings") {
    // The inverse recomputes u, v from the crossing time, so only crossings
    // the schedule can reproduce are in its domain: masked elements and
    // clamped times keep the exact off-grid coefficients, and vp crossings
    // with v near 0 amplify rounding beyond any fixed tolerance.
    RngStream rng(derive_seed(5, kSeedEval, 5));
    for (const Schedule& s : {Schedule::vp(1000), Schedule::ve(1000), Schedule::ot(1000)}) {
        Instance inst = random_instance(rng, 128);
        BoundaryEstimate est = estimate_boundary(inst.x0, inst.eps, inst.indices, inst.table, s);
        BoundaryEstimate sub;
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < 128; ++i) {
            if (est.masked[i] || !(est.t0[i] > 0.0) || !(est.t0[i] < 1000.0)) continue;
            if (s.kind() == ScheduleKind::vp && est.v_t0[i] < 1e-3) continue;
            rows.push_back(i);
            sub.t0.push_back(est.t0[i]);
            sub.u_t0.push_back(est.u_t0[i]);
            sub.v_t0.push_back(est.v_t0[i]);
            sub.j_star.push_back(est.j_star[i]);
            sub.masked.push_back(0);
        }
        REQUIRE(rows.size() > 64);
        std::size_t m = inst.table.m();
        Matrix x0(rows.size(), m), eps(rows.size(), m);
        for (std::size_t k = 0; k < rows.size(); ++k)
            for (std::size_t c = 0; c < m; ++c) {
                x0.at(k, c) = inst.x0.at(rows[k], c);
                eps.at(k, c) = inst.eps.at(rows[k], c);
            }
        BoundaryPoint pt = psi(eps, x0, s, sub);
        Matrix rec = psi_inverse(pt.x, pt.t0, x0, s);
        double worst = 0.0;
        for (std::size_t k = 0; k < rec.size(); ++k)
            worst = std::max(worst, std::fabs(rec.data[k] - eps.data[k]));
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("unmasked crossings sit on the score boundary with an interior approach") {
    RngStream rng(derive_seed(5, kSeedEval, 6));
    for (const Schedule& s : {Schedule::vp(400), Schedule::ot(400)}) {
        Instance inst = random_instance(rng, 64);
        BoundaryEstimate est = estimate_boundary(inst.x0, inst.eps, inst.indices, inst.table, s);
        std::size_t m = inst.table.m();
        for (std::size_t i = 0; i < 64; ++i) {
            if (est.masked[i] || !(est.t0[i] > 0.0)) continue;
            std::vector<double> x(m);
            for (std::size_t c = 0; c < m; ++c)
                x[c] = est.u_t0[i] * inst.x0.row(i)[c] + est.v_t0[i] * inst.eps.row(i)[c];
            double own = likelihood(x.data(), m, inst.table, inst.indices[i]);
            double winner = likelihood(x.data(), m, inst.table, est.j_star[i]);
            CHECK(std::fabs(own - winner) <= 1e-4 * (1.0 + std::fabs(own)));

            Coeff inside = s.coeff_at(0.9 * est.t0[i]);
            for (std::size_t c = 0; c < m; ++c)
                x[c] = inside.u * inst.x0.row(i)[c] + inside.v * inst.eps.row(i)[c];
            double own_in = likelihood(x.data(), m, inst.table, inst.indices[i]);
            for (std::size_t j = 0; j < inst.table.K(); ++j) {
                if (j == inst.indices[i]) continue;
                CHECK(own_in > likelihood(x.data(), m, inst.table, j));
            }
        }
    }
}
