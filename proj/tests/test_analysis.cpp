#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "rankscope/analysis.hpp"
#include "rankscope/error.hpp"
#include "rankscope/hungarian.hpp"

using namespace rankscope;

namespace {

CnnParams basis_filters(const BasisSystem& basis, int m, double scale) {
    CnnParams p = zero_params(basis.d, m);
    for (int j : {1, -1})
        for (int k = 0; k < basis.K; ++k) p.filters.row(p.row(j, k)) = scale * basis.mu(j, k).transpose();
    return p;
}

TrainTrace synthetic_trace(int K, int m, const std::vector<long>& steps, double offset) {
    TrainTrace t;
    t.K = K;
    for (long s : steps) {
        TraceRow r;
        r.step = s;
        const double v = s > 0 ? m * std::log(static_cast<double>(s)) + offset : 0.0;
        r.max_signal.assign(static_cast<std::size_t>(2 * K), v);
        r.argmax_filter.assign(static_cast<std::size_t>(2 * K), 0);
        t.rows.push_back(r);
    }
    return t;
}

}  // namespace

TEST_CASE("filter spectrum of basis rows") {
    const BasisSystem basis = make_basis(30, 3, BasisMode::RandomOrthonormal, 4);
    for (double c : {1.0, 0.01, 250.0}) {
        const SpectrumReport s = filter_matrix_spectrum(basis_filters(basis, 5, c));
        CHECK(s.stable_rank == doctest::Approx(6.0).epsilon(1e-12));
        CHECK(s.threshold_rank == 6);
    }
    CHECK_THROWS_AS(filter_matrix_spectrum(zero_params(30, 5)), Error);

    std::mt19937_64 rng(2);
    CnnParams p = zero_params(30, 5);
    p.filters = oracle::random_matrix(10, 30, rng);
    CnnParams shuffled = p;
    std::vector<int> order(10);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int r = 0; r < 10; ++r) shuffled.filters.row(r) = p.filters.row(order[static_cast<std::size_t>(r)]);
    CHECK(std::abs(filter_matrix_spectrum(p).stable_rank - filter_matrix_spectrum(shuffled).stable_rank) <= 1e-10);
}

TEST_CASE("decomposition of pure and mixed directions") {
    const BasisSystem basis = make_basis(60, 2, BasisMode::OneHot, 0);
    const PatchedDataset data = sample_dataset(basis, 5, 3, {}, 0.1, 3);
    std::mt19937_64 rng(6);
    CnnParams init = zero_params(60, 2);
    init.filters = oracle::random_matrix(4, 60, rng) * 0.01;

    CnnParams p = init;
    p.filters.row(0) += 3.0 * basis.mu(1, 1).transpose();
    const auto noise = data.noise_columns();
    p.filters.row(1) += data.patches.col(noise[0]).transpose();
    p.filters.row(2) += (0.5 * basis.mu(-1, 0) - 2.0 * basis.mu(1, 0) + 0.3 * data.patches.col(noise[1]) -
                         1.7 * data.patches.col(noise[4]) + 0.9 * data.patches.col(noise[7]))
                            .transpose();
    const FilterDecomposition dec = decompose_filters(p, init, basis, data);
    CHECK(dec.condition_number < 1e12);

    CHECK(dec.gamma(0, 1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::abs(dec.gamma(0, 0)) <= 1e-12);
    CHECK(dec.beta.row(0).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(dec.rho.row(0).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(dec.residual(0) <= 1e-12);

    const double sq = data.patches.col(noise[0]).squaredNorm();
    CHECK(dec.rho(1, 0) == doctest::Approx(sq).epsilon(1e-8));
    CHECK(dec.rho.row(1).tail(dec.rho.cols() - 1).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(dec.residual(1) <= 1e-8);

    // row 2 sits in the class -1 bank: gamma is its own class, beta the other
    CHECK(dec.gamma(2, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dec.beta(2, 0) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(dec.residual(2) <= 1e-8 * std::max(1.0, (p.filters.row(2) - init.filters.row(2)).norm()));
    CHECK(dec.xi_residual.maxCoeff() <= 1e-8);
    CHECK(dec.max_residual() <= 1e-8);
    // class -1 row 3 did not move
    CHECK(dec.residual(3) <= 1e-12);
}

TEST_CASE("decomposition refuses a singular noise dictionary") {
    const BasisSystem basis = make_basis(20, 2, BasisMode::OneHot, 0);
    const PatchedDataset clean = sample_dataset(basis, 5, 3, {}, 0.0, 1);
    const CnnParams p = zero_params(20, 2);
    try {
        decompose_filters(p, p, basis, clean);
        FAIL("singular dictionary accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numerical);
    }
    // more noise patches than noise dimensions
    const PatchedDataset crowded = sample_dataset(basis, 20, 3, {}, 0.1, 1);
    CHECK_THROWS_AS(decompose_filters(p, p, basis, crowded), Error);
}

TEST_CASE("noise projections") {
    const BasisSystem basis = make_basis(25, 2, BasisMode::RandomOrthonormal, 9);
    std::mt19937_64 rng(3);
    CnnParams init = zero_params(25, 3);
    init.filters = oracle::random_matrix(6, 25, rng);
    for (double v : noise_projection_norms(init, init, basis)) CHECK(v == 0.0);
    CnnParams p = init;
    p.filters.row(0) += 5.0 * basis.mu(1, 1).transpose();
    CHECK(noise_projection_norms(p, init, basis)[0] <= 1e-12);
    Eigen::VectorXd g = oracle::random_matrix(25, 1, rng);
    p.filters.row(4) += g.transpose();
    CHECK(noise_projection_norms(p, init, basis)[4] == doctest::Approx(basis.project_noise(g).norm()));
}

TEST_CASE("alignment distance") {
    const BasisSystem basis = make_basis(30, 3, BasisMode::OneHot, 0);
    const AlignmentReport exact = alignment_distance(basis_filters(basis, 5, 1.0), basis);
    CHECK(exact.plus.distance <= 1e-12);
    CHECK(exact.minus.distance <= 1e-12);
    CHECK(exact.matched_rows_distinct());

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        CnnParams p = zero_params(30, 6);
        for (int j : {1, -1}) {
            std::vector<int> rows(6);
            std::iota(rows.begin(), rows.end(), 0);
            std::shuffle(rows.begin(), rows.end(), rng);
            const double c = 0.1 + trial;
            for (int k = 0; k < 3; ++k)
                p.filters.row(p.row(j, rows[static_cast<std::size_t>(k)])) = c * basis.mu(j, k).transpose();
        }
        const AlignmentReport r = alignment_distance(p, basis);
        CHECK(r.plus.distance <= 1e-12);
        CHECK(r.minus.distance <= 1e-12);
    }

    CnnParams noisy = zero_params(30, 4);
    noisy.filters = oracle::random_matrix(8, 30, rng);
    const AlignmentReport r = alignment_distance(noisy, basis);
    CHECK(r.plus.distance > 0.0);
    CHECK(r.plus.distance <= 2.0);
    CHECK(r.plus.matched_rows.size() == 3);
    const Eigen::MatrixXd inner = noisy.bank(1) * basis.vectors.leftCols(3);
    double matched = 0.0;
    for (int k = 0; k < 3; ++k) matched += inner(r.plus.matched_rows[static_cast<std::size_t>(k)], k);
    CHECK(-matched == doctest::Approx(oracle::brute_force_assignment(-inner.transpose())).epsilon(1e-12));
    CHECK_THROWS_AS(alignment_distance(zero_params(30, 2), basis), Error);
}

TEST_CASE("assignment solver matches brute force") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> dim(1, 6);
    for (int trial = 0; trial < 200; ++trial) {
        const int rows = dim(rng);
        const int cols = rows + dim(rng) % 3;
        const Eigen::MatrixXd cost = oracle::random_matrix(rows, cols, rng);
        const std::vector<int> pick = solve_assignment(cost);
        REQUIRE(pick.size() == static_cast<std::size_t>(rows));
        std::vector<int> sorted = pick;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
        double total = 0.0;
        for (int r = 0; r < rows; ++r) total += cost(r, pick[static_cast<std::size_t>(r)]);
        CHECK(total == doctest::Approx(oracle::brute_force_assignment(cost)).epsilon(1e-12));
    }
}

TEST_CASE("growth law fits") {
    const auto steps = geometric_schedule(10000, 2);
    const GrowthReport exact = fit_growth_law(synthetic_trace(2, 16, steps, 0.0), 16, 1.0);
    CHECK(exact.points >= 5);
    for (const auto& f : exact.fits) {
        CHECK(f.slope == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(f.intercept) <= 1e-9);
        CHECK(f.max_deviation <= 1e-12);
    }
    const GrowthReport shifted = fit_growth_law(synthetic_trace(2, 16, steps, 7.5), 16, 1.0);
    for (const auto& f : shifted.fits) {
        CHECK(f.slope == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(f.intercept == doctest::Approx(7.5).epsilon(1e-9));
    }
    CHECK(shifted.window_start == std::max(10000L / 10, shifted.burn_in));
    CHECK_THROWS_AS(fit_growth_law(synthetic_trace(2, 16, {0, 1, 2, 4}, 0.0), 16, 1.0), Error);

    const TrainTrace t = synthetic_trace(1, 1, {0, 1, 2, 4, 8}, 0.0);
    CHECK(phase1_crossing(t, 1.0) == 4);  // log 4 > 1 > log 2
    CHECK(phase1_crossing(t, 100.0) == -1);
}

TEST_CASE("loss rate fits") {
    const int m = 8;
    const double eta = 0.5, C = 3.0;
    TrainTrace t;
    for (long s : geometric_schedule(4096, 0)) {
        TraceRow r;
        r.step = s;
        r.train_loss = s > 0 ? C * m * m / (eta * s) : 1.0;
        t.rows.push_back(r);
    }
    const LossRateReport exact = fit_loss_rate(t, eta, m, 64);
    CHECK(exact.steps.front() == 64);
    for (double v : exact.products) CHECK(v == doctest::Approx(C).epsilon(1e-12));
    CHECK(exact.max_ratio == doctest::Approx(1.0).epsilon(1e-12));

    for (auto& r : t.rows) r.train_loss = 0.3;
    CHECK(fit_loss_rate(t, eta, m, 64).max_ratio == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(fit_loss_rate(t, eta, m, 2048), Error);
    CHECK_THROWS_AS(fit_loss_rate(t, eta, m, 3), Error);
}

TEST_CASE("rank gap report") {
    const BasisSystem basis = make_basis(200, 3, BasisMode::OneHot, 0);
    const PatchedDataset data = sample_dataset(basis, 100, 3, {}, 0.0, 1);
    const SpectrumReport ds = spectrum_report(assemble_data_matrix(data));
    const SpectrumReport fs = filter_matrix_spectrum(basis_filters(basis, 4, 2.0));
    const RankGapReport r = rank_gap_report(ds, fs, 3, 1000, 0.0, 200, 100);
    CHECK(r.filter_threshold_rank == 6);
    CHECK(r.data_threshold_rank == 6);
    CHECK(r.filter_sr_gap <= 1e-9);
    CHECK(r.inv_log_T == doctest::Approx(1.0 / std::log(1000.0)));
    CHECK(r.regime.regime == NoiseRegime::BelowBoundary);
    CHECK(r.data_sr_excess <= 0.0);
}
