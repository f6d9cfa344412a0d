#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "rankscope/datamodel.hpp"
#include "rankscope/error.hpp"
#include "rankscope/network.hpp"

using namespace rankscope;

namespace {

CnnParams random_params(int d, int m, double scale, std::mt19937_64& rng, int q = 3, double kappa = 1.0) {
    CnnParams p = zero_params(d, m, q, kappa);
    p.filters = oracle::random_matrix(2 * m, d, rng) * scale;
    return p;
}

// Smallest distance of any pre-activation to the kinks at 0 and kappa.
double kink_distance(const CnnParams& p, const PatchedDataset& data) {
    const Eigen::MatrixXd z = p.filters * data.patches;
    return std::min(z.cwiseAbs().minCoeff(), (z.array() - p.kappa).abs().minCoeff());
}

}  // namespace

TEST_CASE("activation branches") {
    CHECK(act(-1.0, 3, 1.0) == 0.0);
    CHECK(act(0.5, 3, 1.0) == doctest::Approx(0.125 / 3.0).epsilon(1e-15));
    CHECK(act(2.0, 3, 1.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    for (double kappa : {0.5, 1.0, 3.0})
        for (int q : {3, 4, 5}) {
            CHECK(act(kappa, q, kappa) == doctest::Approx(kappa / q).epsilon(1e-15));
            CHECK(act(std::nextafter(kappa, 10.0), q, kappa) == doctest::Approx(kappa / q).epsilon(1e-12));
            CHECK(act_prime(kappa, q, kappa) == doctest::Approx(1.0).epsilon(1e-15));
            CHECK(act_prime(0.0, q, kappa) == 0.0);
        }
    CHECK(act_prime(0.5, 3, 1.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(act_prime(7.0, 3, 1.0) == 1.0);
    CHECK(act_prime(-7.0, 3, 1.0) == 0.0);
    const double h = 1e-6;
    CHECK((act(0.3 + h, 3, 1.0) - act(0.3 - h, 3, 1.0)) / (2 * h) ==
          doctest::Approx(act_prime(0.3, 3, 1.0)).epsilon(1e-6));
}

TEST_CASE("property: act_prime is the derivative of act") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    int checked = 0;
    while (checked < 1000) {
        const double z = u(rng);
        const double kappa = 1.0;
        if (std::abs(z) < 1e-3 || std::abs(z - kappa) < 1e-3) continue;
        const double h = 1e-6;
        const double fd = (act(z + h, 3, kappa) - act(z - h, 3, kappa)) / (2 * h);
        const double an = act_prime(z, 3, kappa);
        CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
        ++checked;
    }
}

TEST_CASE("logistic loss stays finite for large margins") {
    CHECK(logistic_loss(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const double tiny = logistic_loss(700.0);
    CHECK(std::isfinite(tiny));
    CHECK(tiny > 0.0);
    CHECK(tiny == doctest::Approx(std::exp(-700.0)).epsilon(1e-12));
    CHECK(logistic_loss(-700.0) == doctest::Approx(700.0).epsilon(1e-15));
    CHECK(logistic_loss_prime(0.0) == doctest::Approx(-0.5));
    CHECK(std::isfinite(logistic_loss_prime(-800.0)));
    CHECK(std::isfinite(logistic_loss_prime(800.0)));
}

TEST_CASE("forward examples") {
    const BasisSystem basis = make_basis(6, 1, BasisMode::OneHot, 0);
    const CnnParams zero = zero_params(6, 4);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 3);
    CHECK(forward(zero, x).output == 0.0);

    const double kappa = 1.0;
    CnnParams one = zero_params(6, 1, 3, kappa);
    one.filters.row(0) = kappa * basis.mu(1, 0).transpose();
    const ForwardResult r = forward(one, basis.mu(1, 0));
    CHECK(r.output == doctest::Approx(kappa / 3.0).epsilon(1e-15));
    CHECK(r.f_minus == 0.0);

    CHECK_THROWS_AS(forward(one, Eigen::MatrixXd::Zero(5, 2)), Error);
}

TEST_CASE("forward and loss match the naive evaluator") {
    std::mt19937_64 rng(21);
    const BasisSystem basis = make_basis(20, 2, BasisMode::RandomOrthonormal, 1);
    for (int trial = 0; trial < 10; ++trial) {
        const PatchedDataset data = sample_dataset(basis, 8, 3, {}, 0.2, static_cast<std::uint64_t>(trial));
        const CnnParams p = random_params(20, 4, 0.5, rng);
        for (int i = 0; i < data.n; ++i) {
            const double want = oracle::forward(p, data.input(i));
            CHECK(std::abs(forward(p, data.input(i)).output - want) <= 1e-12 * std::max(1.0, std::abs(want)));
        }
        const double want = oracle::loss(p, data);
        CHECK(std::abs(training_loss(p, data) - want) <= 1e-12 * want);
        BatchEvaluator eval(data);
        CHECK(std::abs(eval.loss(p) - want) <= 1e-12 * want);
    }
    const PatchedDataset data = sample_dataset(basis, 5, 3, {}, 0.2, 1);
    CHECK(training_loss(zero_params(20, 3), data) == std::log(2.0));
}

TEST_CASE("gradient matches central differences away from kinks") {
    std::mt19937_64 rng(8);
    const BasisSystem basis = make_basis(20, 2, BasisMode::OneHot, 0);
    int instances = 0;
    for (std::uint64_t seed = 0; instances < 100; ++seed) {
        const PatchedDataset data = sample_dataset(basis, 8, 3, {}, 0.3, seed);
        const CnnParams p = random_params(20, 4, 0.6, rng);
        if (kink_distance(p, data) <= 1e-3) continue;
        ++instances;
        const RowMatrix g = gradient(p, data);
        RowMatrix fast;
        BatchEvaluator(data).loss_and_gradient(p, fast);
        CHECK((g - fast).norm() <= 1e-12 * std::max(1e-300, g.norm()));
        for (int row = 0; row < 2 * p.m; ++row)
            for (int col = 0; col < p.d; col += 3) {
                const double fd = oracle::fd_partial(p, data, row, col, 1e-6);
                const double an = g(row, col);
                // 1e-9 covers the rounding floor of the difference quotient at h = 1e-6
                CHECK(std::abs(fd - an) <= 1e-6 * std::abs(an) + 1e-9);
            }
    }
}

TEST_CASE("gradient of an inactive filter is zero and signal gradient has the right sign") {
    const BasisSystem basis = make_basis(10, 1, BasisMode::OneHot, 0);
    PatchedDataset data = sample_dataset(basis, 6, 3, {}, 0.0, 4);
    CnnParams p = zero_params(10, 2);
    p.filters.row(0) = -basis.vectors.col(0).transpose() - basis.vectors.col(1).transpose();
    p.filters.row(1) = 0.5 * basis.vectors.col(0).transpose();
    const RowMatrix g = gradient(p, data);
    CHECK(g.row(0).isZero(0.0));

    // Single positive sample whose object patch is mu_{+1,0}.
    PatchedDataset one = sample_dataset(basis, 40, 3, {}, 0.0, 4);
    int pick = 0;
    while (one.labels[static_cast<std::size_t>(pick)] != 1) ++pick;
    PatchedDataset single = one;
    single.n = 1;
    single.labels = {1};
    single.object_sets = {one.object_sets[static_cast<std::size_t>(pick)]};
    single.assignments = {one.assignments[static_cast<std::size_t>(pick)]};
    single.patches = one.input(pick);
    CnnParams w = zero_params(10, 1);
    w.filters.row(0) = 0.4 * basis.mu(1, 0).transpose();
    const RowMatrix gs = gradient(w, single);
    CHECK(gs.row(0).dot(basis.mu(1, 0).transpose()) < 0.0);
}

TEST_CASE("property: swapping banks and labels leaves the loss unchanged") {
    std::mt19937_64 rng(13);
    const BasisSystem basis = make_basis(30, 3, BasisMode::OneHot, 0);
    for (int trial = 0; trial < 20; ++trial) {
        PatchedDataset data = sample_dataset(basis, 10, 3, {}, 0.1, static_cast<std::uint64_t>(trial));
        const CnnParams p = random_params(30, 5, 0.4, rng);
        CnnParams swapped = p;
        swapped.filters.topRows(5) = p.filters.bottomRows(5);
        swapped.filters.bottomRows(5) = p.filters.topRows(5);
        const double before = training_loss(p, data);
        for (int& y : data.labels) y = -y;
        CHECK(std::abs(training_loss(swapped, data) - before) <= 1e-12 * before);
    }
}

TEST_CASE("population loss estimate") {
    const BasisSystem basis = make_basis(20, 2, BasisMode::OneHot, 0);
    const DataParams dp{3, {}, 0.1};
    const LossEstimate zero = test_loss_estimate(zero_params(20, 3), basis, dp, 50, 1);
    CHECK(zero.mean == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(zero.standard_error <= 1e-14);

    std::mt19937_64 rng(2);
    const CnnParams p = random_params(20, 3, 0.5, rng);
    const LossEstimate one = test_loss_estimate(p, basis, dp, 1, 77);
    const PatchedDataset draw = sample_dataset(basis, 1, 3, {}, 0.1, 77);
    CHECK(one.mean == doctest::Approx(training_loss(p, draw)).epsilon(1e-14));
    CHECK(one.standard_error == 0.0);
    CHECK_THROWS_AS(test_loss_estimate(p, basis, dp, 0, 1), Error);
}

TEST_CASE("invalid parameters") {
    CnnParams p = zero_params(4, 2);
    p.q = 2;
    CHECK_THROWS_AS(p.validate(), Error);
    p.q = 3;
    p.kappa = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p.kappa = 1.0;
    p.filters(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(p.validate(), Error);
}
