#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "rankscope/error.hpp"
#include "rankscope/spectral.hpp"

using namespace rankscope;

TEST_CASE("singular values of simple matrices") {
    const auto id = singular_values(Eigen::MatrixXd::Identity(3, 3));
    CHECK(id == std::vector<double>{1.0, 1.0, 1.0});
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 4.0;
    const auto s = singular_values(d);
    CHECK(s[0] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(s[1] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("singular values match the Jacobi Gram oracle") {
    std::mt19937_64 rng(11);
    for (auto [r, c] : {std::pair{5, 8}, std::pair{8, 5}, std::pair{1, 6}, std::pair{17, 17}, std::pair{30, 12}}) {
        const Eigen::MatrixXd a = oracle::random_matrix(r, c, rng);
        const auto got = singular_values(a);
        const auto want = oracle::gram_singular_values(a);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-9 * want[0]);
    }
}

TEST_CASE("non-finite and empty input rejected") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Ones(2, 2);
    a(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(singular_values(a), Error);
    CHECK_THROWS_AS(singular_values(Eigen::MatrixXd(0, 3)), Error);
}

TEST_CASE("stable rank examples") {
    CHECK(stable_rank(Eigen::MatrixXd::Identity(7, 7)) == doctest::Approx(7.0).epsilon(1e-14));
    const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(4, 1.0, 4.0);
    const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(6, -2.0, 3.0);
    CHECK(stable_rank(u * v.transpose()) == doctest::Approx(1.0).epsilon(1e-12));
    // squared norms: 1 + 3 * 0.1^2
    Eigen::Vector4d diag(1.0, 0.1, 0.1, 0.1);
    CHECK(stable_rank(Eigen::MatrixXd(diag.asDiagonal())) == doctest::Approx(1.03).epsilon(1e-14));
    try {
        stable_rank(Eigen::MatrixXd::Zero(3, 2));
        FAIL("zero matrix accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numerical);
    }
}

TEST_CASE("threshold rank") {
    CHECK(rank_at_threshold({10.0, 5.0, 0.05}, 0.01) == 2);
    CHECK(rank_at_threshold({1.0, 1.0, 1.0}, 0.01) == 3);
    CHECK(rank_at_threshold({0.0, 0.0}, 0.01) == 0);
    CHECK(rank_at_threshold({2.0, 0.02}, 0.01) == 2);  // boundary value counts
    CHECK(rank_at_threshold({2.0, 1.0}, 1.0) == 1);
    for (double bad : {0.0, -0.5, 1.5}) {
        try {
            rank_at_threshold({1.0}, bad);
            FAIL("ratio accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Parameter);
        }
    }
}

TEST_CASE("spectrum union examples") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 1), b = Eigen::MatrixXd::Zero(3, 1);
    a(0, 0) = 1.0;
    b(1, 0) = 1.0;
    CHECK(spectrum_union_check(a, b) <= 1e-12);

    Eigen::MatrixXd a2 = Eigen::MatrixXd::Zero(3, 1), b2 = Eigen::MatrixXd::Zero(3, 2);
    a2(0, 0) = 2.0;
    b2(1, 0) = 3.0;
    b2(2, 1) = 5.0;
    CHECK(spectrum_union_check(a2, b2) <= 1e-12);
    Eigen::MatrixXd cat(3, 3);
    cat << a2, b2;
    const auto s = singular_values(cat);
    CHECK(s[0] == doctest::Approx(5.0));
    CHECK(s[1] == doctest::Approx(3.0));
    CHECK(s[2] == doctest::Approx(2.0));

    Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(3, 1);
    try {
        spectrum_union_check(a, bad);
        FAIL("non-orthogonal pair accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Input);
    }
}

TEST_CASE("spectrum union on random orthogonal column spaces") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(16, 3), b = Eigen::MatrixXd::Zero(16, 4);
        a.topRows(4) = oracle::random_matrix(4, 3, rng);
        b.middleRows(4, 5) = oracle::random_matrix(5, 4, rng);
        Eigen::MatrixXd cat(16, 7);
        cat << a, b;
        CHECK(spectrum_union_check(a, b) <= 1e-8 * singular_values(cat).front());
    }
}

TEST_CASE("property: orthogonal invariance, scale invariance, Frobenius identity") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> dim(1, 64);
    for (int trial = 0; trial < 100; ++trial) {
        const int r = dim(rng), c = dim(rng);
        const Eigen::MatrixXd a = oracle::random_matrix(r, c, rng);
        const SpectrumReport rep = spectrum_report(a);
        double ss = 0.0;
        for (std::size_t i = 0; i < rep.singular_values.size(); ++i) {
            ss += rep.singular_values[i] * rep.singular_values[i];
            CHECK(rep.singular_values[i] >= 0.0);
            if (i > 0) CHECK(rep.singular_values[i] <= rep.singular_values[i - 1]);
        }
        CHECK(std::abs(ss - a.squaredNorm()) <= 1e-9 * a.squaredNorm());
        CHECK(rep.operator_norm == rep.singular_values.front());
        CHECK(rep.stable_rank >= 1.0 - 1e-12);
        CHECK(rep.stable_rank <= std::min(r, c) + 1e-9);

        if (trial % 4 == 0) {
            const Eigen::HouseholderQR<Eigen::MatrixXd> qr(oracle::random_matrix(r, r, rng));
            const Eigen::MatrixXd Q = qr.householderQ();
            const auto rot = singular_values(Q * a);
            for (std::size_t i = 0; i < rot.size(); ++i)
                CHECK(std::abs(rot[i] - rep.singular_values[i]) <= 1e-8 * rep.singular_values[0]);
            CHECK(std::abs(stable_rank(Q * a) - rep.stable_rank) <= 1e-8);
        }
        CHECK(std::abs(stable_rank(-3.7 * a) - rep.stable_rank) <= 1e-10 * rep.stable_rank);
    }
}
