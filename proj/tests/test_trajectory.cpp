#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bcdiff/oracle.hpp"
#include "bcdiff/rng.hpp"
#include "bcdiff/trajectory.hpp"
#include "plain_reference.hpp"

using namespace bcdiff;

TEST_CASE("time rescaling interpolates between the exit time and the horizon") {
    Schedule s = Schedule::ot(2000);
    std::vector<double> t0{500.0};

    CHECK(rescale_time(1000.0, t0, 1.0, s)[0] == doctest::Approx(1250.0).epsilon(1e-15));
    CHECK(rescale_time(0.0, t0, 1.0, s)[0] == 500.0);
    CHECK(rescale_time(0.0, t0, 0.5, s)[0] == 250.0);
    CHECK(rescale_time(2000.0, t0, 1.0, s)[0] == 2000.0);

    for (double t : {0.0, 1.0, 777.5, 2000.0}) CHECK(rescale_time(t, t0, 0.0, s)[0] == t);

    CHECK_THROWS_AS(rescale_time(-1.0, t0, 0.5, s), std::invalid_argument);
    CHECK_THROWS_AS(rescale_time(2001.0, t0, 0.5, s), std::invalid_argument);
    CHECK_THROWS_AS(rescale_time(100.0, t0, 1.5, s), std::invalid_argument);
}

TEST_CASE("forward draws evaluate the flow at the rescaled times") {
    EmbeddingTable table = random_embedding_table(8, 4, 21, false);
    RngStream rng(derive_seed(21, kSeedEval, 1));
    std::vector<std::size_t> indices{0, 3, 5, 5, 7, 1};
    DiscreteDatum datum = datum_from_indices(indices, table);
    Matrix eps(6, 4);
    rng.fill_normal(eps);
    Schedule s = Schedule::vp(800);

    BoundaryEstimate est;
    RescaledPoint pt = forward_sample(datum.x0, eps, 300.0, s, indices, table, 0.6, &est);
    REQUIRE(pt.tau.size() == 6);
    REQUIRE(est.size() == 6);
    CHECK(pt.t == 300.0);
    CHECK(pt.r == 0.6);
    CHECK(pt.eps.data == eps.data);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(pt.tau[i] == 300.0 + 0.6 * est.t0[i] * (1.0 - 300.0 / 800.0));
        Coeff c = s.coeff_at(pt.tau[i]);
        for (std::size_t col = 0; col < 4; ++col)
            CHECK(pt.x.at(i, col) ==
                  doctest::Approx(c.u * datum.x0.at(i, col) + c.v * eps.at(i, col))
                      .epsilon(1e-15));
    }
}

TEST_CASE("with r = 0 the forward draw is plain diffusion bit for bit") {
    EmbeddingTable table = random_embedding_table(12, 5, 22, false);
    RngStream rng(derive_seed(22, kSeedEval, 1));
    std::vector<std::size_t> indices{2, 9, 11, 0};
    DiscreteDatum datum = datum_from_indices(indices, table);
    Matrix eps(4, 5);
    rng.fill_normal(eps);
    for (const Schedule& s : {Schedule::vp(600), Schedule::ve(600), Schedule::ot(600)}) {
        for (int t : {0, 1, 300, 600}) {
            RescaledPoint pt = forward_sample(datum.x0, eps, double(t), s, indices, table, 0.0);
            Matrix plain = plainref::forward(datum.x0, eps, t, s);
            CHECK(pt.x.data == plain.data);
        }
    }
}

TEST_CASE("the rescaled field matches central differences") {
    EmbeddingTable table = random_embedding_table(8, 4, 23, false);
    RngStream rng(derive_seed(23, kSeedEval, 1));
    std::vector<std::size_t> indices{1, 4, 6, 7, 2};
    DiscreteDatum datum = datum_from_indices(indices, table);
    Matrix eps(5, 4);
    rng.fill_normal(eps);
    Schedule s = Schedule::ot(1000);
    for (double t : {150.0, 500.0, 820.0}) {
        Matrix field = rescaled_vector_field(datum.x0, eps, t, s, indices, table, 0.7);
        Matrix fd = finite_diff_field(datum.x0, eps, t, s, indices, table, 0.7);
        for (std::size_t k = 0; k < field.size(); ++k)
            CHECK(fd.data[k] == doctest::Approx(field.data[k]).epsilon(1e-3).scale(1.0));
    }
}

TEST_CASE("deterministic jumps compose and hit their endpoints") {
    EmbeddingTable table = random_embedding_table(8, 4, 24, false);
    RngStream rng(derive_seed(24, kSeedEval, 1));
    std::vector<std::size_t> indices{3, 3, 0, 6};
    DiscreteDatum datum = datum_from_indices(indices, table);
    Matrix eps(4, 4);
    rng.fill_normal(eps);
    Schedule s = Schedule::vp(500);

    auto at = [&](double t) {
        Coeff c = s.coeff_at(t);
        Matrix x(4, 4);
        for (std::size_t k = 0; k < x.size(); ++k)
            x.data[k] = c.u * datum.x0.data[k] + c.v * eps.data[k];
        return x;
    };

    Matrix x400 = at(400.0);
    Matrix direct = deterministic_step(x400, datum.x0, 400.0, 150.0, s);
    Matrix expect = at(150.0);
    for (std::size_t k = 0; k < direct.size(); ++k)
        CHECK(direct.data[k] == doctest::Approx(expect.data[k]).epsilon(1e-12));

    Matrix hop = deterministic_step(x400, datum.x0, 400.0, 275.0, s);
    Matrix two = deterministic_step(hop, datum.x0, 275.0, 150.0, s);
    for (std::size_t k = 0; k < two.size(); ++k)
        CHECK(two.data[k] == doctest::Approx(direct.data[k]).epsilon(1e-12));

    CHECK(deterministic_step(x400, datum.x0, 400.0, 400.0, s).data == x400.data);

    Schedule ot = Schedule::ot(500);
    Matrix mid = plainref::forward(datum.x0, eps, 250, ot);
    Matrix landed = deterministic_step(mid, datum.x0, 250.0, 0.0, ot);
    CHECK(landed.data == datum.x0.data);

    CHECK_THROWS_AS(deterministic_step(x400, datum.x0, 150.0, 400.0, s), std::invalid_argument);
}
