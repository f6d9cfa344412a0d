#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "rankscope/error.hpp"
#include "rankscope/trainer.hpp"

using namespace rankscope;

namespace {

struct Setup {
    BasisSystem basis = make_basis(40, 2, BasisMode::OneHot, 0);
    PatchedDataset data = sample_dataset(basis, 16, 3, {}, 0.02, 5);
    TrainConfig config;
    Setup() {
        config.eta = 2.0;
        config.sigma0 = 0.05;
        config.steps = 64;
        config.seed = 3;
    }
};

bool same_rows(const TraceRow& a, const TraceRow& b, double tol) {
    auto close = [&](double x, double y) {
        return (std::isnan(x) && std::isnan(y)) || std::abs(x - y) <= tol * std::max(1.0, std::abs(x));
    };
    bool ok = a.step == b.step && close(a.train_loss, b.train_loss) &&
              close(a.filter_stable_rank, b.filter_stable_rank) &&
              a.filter_threshold_rank == b.filter_threshold_rank && a.argmax_filter == b.argmax_filter &&
              close(a.noise_projection_plus, b.noise_projection_plus) &&
              close(a.noise_projection_minus, b.noise_projection_minus) &&
              close(a.alignment_plus, b.alignment_plus) && close(a.alignment_minus, b.alignment_minus);
    for (std::size_t i = 0; ok && i < a.max_signal.size(); ++i) ok = close(a.max_signal[i], b.max_signal[i]);
    return ok;
}

}  // namespace

TEST_CASE("initialization moments and determinism") {
    const CnnParams p = init_params(1000, 64, 3, 1.0, 1e-3, 42);
    const double md = 2.0 * 64 * 1000;
    const double mean = p.filters.mean();
    const double sd = std::sqrt((p.filters.array() - mean).square().sum() / (md - 1));
    CHECK(std::abs(mean) <= 4e-3 / std::sqrt(md));
    CHECK(sd >= 0.95e-3);
    CHECK(sd <= 1.05e-3);
    CHECK(init_params(1000, 64, 3, 1.0, 1e-3, 42).filters == p.filters);
    CHECK(init_params(1000, 64, 3, 1.0, 1e-3, 43).filters != p.filters);

    const CnnParams tiny = init_params(50, 4, 3, 1.0, 1e-300, 1);
    CHECK(tiny.filters.cwiseAbs().maxCoeff() <= 1e-290);
    CHECK_THROWS_AS(init_params(5, 2, 3, 1.0, 0.0, 1), Error);
}

TEST_CASE("gradient step fixed points") {
    const BasisSystem basis = make_basis(10, 1, BasisMode::OneHot, 0);
    const PatchedDataset data = sample_dataset(basis, 6, 3, {}, 0.0, 2);
    CnnParams p = zero_params(10, 2);
    p.filters.setConstant(-0.5);  // every pre-activation is <= 0
    const CnnParams before = p;
    gd_step(p, data, 10.0);
    CHECK(p.filters == before.filters);

    std::mt19937_64 rng(1);
    CnnParams q = zero_params(10, 2);
    q.filters = oracle::random_matrix(4, 10, rng);
    const CnnParams q0 = q;
    gd_step(q, data, 0.0);
    CHECK(q.filters == q0.filters);
}

TEST_CASE("one step by hand on a single sample") {
    // d = 3, m = 1, one positive input with patches (e1, 0.5 e3, 0): only the
    // class +1 filter touches e1.
    PatchedDataset data;
    data.d = 3;
    data.n = 1;
    data.P = 3;
    data.K = 1;
    data.labels = {1};
    data.object_sets = {{0}};
    data.assignments = {{0}};
    data.patches = Eigen::MatrixXd::Zero(3, 3);
    data.patches(0, 0) = 1.0;
    data.patches(2, 1) = 0.5;

    CnnParams p = zero_params(3, 1);
    p.filters << 0.6, 0.0, 0.8,  //
        0.0, 0.0, 0.4;
    const double eta = 0.7;

    // z for + filter: 0.6 (patch 0), 0.4 (patch 1), 0; for - filter: 0, 0.2, 0.
    const double f = (std::pow(0.6, 3) + std::pow(0.4, 3)) / 3.0 - std::pow(0.2, 3) / 3.0;
    const double lp = -1.0 / (1.0 + std::exp(f));
    Eigen::Matrix<double, 2, 3, Eigen::RowMajor> expected = p.filters;
    // + filter: lp * (+1) * (sigma'(0.6) e1 + sigma'(0.4) * 0.5 e3)
    expected(0, 0) -= eta * lp * 0.36;
    expected(0, 2) -= eta * lp * 0.16 * 0.5;
    // - filter: lp * (-1) * sigma'(0.2) * 0.5 e3
    expected(1, 2) -= eta * lp * -1.0 * 0.04 * 0.5;

    const double loss = gd_step(p, data, eta);
    CHECK(loss == doctest::Approx(std::log1p(std::exp(-f))).epsilon(1e-14));
    CHECK((p.filters - RowMatrix(expected)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("geometric schedule") {
    CHECK(geometric_schedule(20, 0) == std::vector<long>{0, 1, 2, 4, 8, 16, 20});
    CHECK(geometric_schedule(0, 0) == std::vector<long>{0});
    const auto s2 = geometric_schedule(100, 2);
    CHECK(s2 == std::vector<long>{0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16, 20, 24, 28, 32, 40, 48, 56, 64, 80, 96, 100});
    for (int s = 0; s < 4; ++s) {
        const auto sched = geometric_schedule(5000, s);
        const std::set<long> set(sched.begin(), sched.end());
        for (long t : sched)
            if (t > 0 && 2 * t <= 5000) CHECK(set.count(2 * t) == 1);
    }
}

TEST_CASE("train: zero steps, determinism, trace contents") {
    Setup s;
    const CnnParams init = init_params(40, 6, 3, 1.0, s.config.sigma0, s.config.seed);
    TrainConfig zero = s.config;
    zero.steps = 0;
    const TrainResult r0 = train(init, init, s.data, &s.basis, zero);
    REQUIRE(r0.trace.rows.size() == 1);
    CHECK(r0.trace.rows[0].step == 0);
    CHECK(r0.final_step == 0);

    const TrainResult a = train(init, init, s.data, &s.basis, s.config);
    const TrainResult b = train(init, init, s.data, &s.basis, s.config);
    CHECK(a.params.filters == b.params.filters);
    REQUIRE(a.trace.rows.size() == b.trace.rows.size());
    for (std::size_t i = 0; i < a.trace.rows.size(); ++i) CHECK(same_rows(a.trace.rows[i], b.trace.rows[i], 0.0));

    const auto sched = geometric_schedule(64, 0);
    REQUIRE(a.trace.rows.size() == sched.size());
    for (std::size_t i = 0; i < sched.size(); ++i) {
        const TraceRow& row = a.trace.rows[i];
        CHECK(row.step == sched[i]);
        CHECK(row.max_signal.size() == 4);
        CHECK(std::isfinite(row.train_loss));
        CHECK(std::isnan(row.test_loss));
    }
    CHECK(a.trace.rows.front().noise_projection_plus == 0.0);
    CHECK(a.trace.rows.back().train_loss < a.trace.rows.front().train_loss);
    CHECK(a.trace.at_step(16) != nullptr);
    CHECK(a.trace.at_step(17) == nullptr);
}

TEST_CASE("train: population estimate, early stop and divergence") {
    Setup s;
    const CnnParams init = init_params(40, 6, 3, 1.0, s.config.sigma0, s.config.seed);
    TrainConfig with_test = s.config;
    with_test.n_test = 50;
    const TrainResult r = train(init, init, s.data, &s.basis, with_test);
    CHECK(std::isfinite(r.trace.rows.back().test_loss));
    CHECK(r.trace.rows.back().test_stderr >= 0.0);

    TrainConfig stop = s.config;
    stop.steps = 100000;
    stop.target_loss = 0.5;
    const TrainResult e = train(init, init, s.data, &s.basis, stop);
    CHECK(e.stopped_early);
    CHECK(e.trace.rows.back().train_loss <= 0.5);
    for (std::size_t i = 0; i + 1 < e.trace.rows.size(); ++i) CHECK(e.trace.rows[i].train_loss > 0.5);
    const auto sched = geometric_schedule(stop.steps, 0);
    CHECK(std::binary_search(sched.begin(), sched.end(), e.final_step));

    PatchedDataset huge = s.data;
    huge.patches *= 1e200;
    try {
        train(init, init, huge, &s.basis, s.config);
        FAIL("divergence not detected");
    } catch (const DivergenceError& err) {
        CHECK(err.step() >= 1);
        CHECK(std::string(err.what()).find(std::to_string(err.step())) != std::string::npos);
    }
}

TEST_CASE("resume from a mid-run snapshot reproduces the uninterrupted run") {
    Setup s;
    s.config.steps = 200;
    const CnnParams init = init_params(40, 6, 3, 1.0, s.config.sigma0, s.config.seed);
    CnnParams mid;
    TrainHooks hooks;
    hooks.on_log = [&](const CnnParams& p, const TraceRow& row) {
        if (row.step == 32) mid = p;
    };
    const TrainResult full = train(init, init, s.data, &s.basis, s.config, 0, hooks);
    const TrainResult rest = train(mid, init, s.data, &s.basis, s.config, 32);
    CHECK((full.params.filters - rest.params.filters).cwiseAbs().maxCoeff() <= 1e-12);
    std::size_t offset = 0;
    while (full.trace.rows[offset].step < 32) ++offset;
    REQUIRE(full.trace.rows.size() - offset == rest.trace.rows.size());
    for (std::size_t i = 0; i < rest.trace.rows.size(); ++i)
        CHECK(same_rows(full.trace.rows[offset + i], rest.trace.rows[i], 1e-12));
}

TEST_CASE("property: argmax persistence and monotone signal on a small run") {
    Setup s;
    s.config.steps = 2000;
    s.config.sigma0 = 0.01;
    s.config.eta = 5.0;
    const CnnParams init = init_params(40, 6, 3, 1.0, s.config.sigma0, s.config.seed);
    const TrainResult r = train(init, init, s.data, &s.basis, s.config);
    for (std::size_t i = 2; i < r.trace.rows.size(); ++i) {
        CHECK(r.trace.rows[i].argmax_filter == r.trace.rows[1].argmax_filter);
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(r.trace.rows[i].max_signal[c] >= r.trace.rows[i - 1].max_signal[c]);
    }
    for (std::size_t i = 2; i < r.trace.rows.size(); ++i)
        CHECK(r.trace.rows[i].train_loss <= r.trace.rows[i - 1].train_loss + 1e-12);
}

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_THROWS_AS(c.validate(), Error);
    c.eta = 1.0;
    c.sigma0 = 1e-3;
    c.steps = 10;
    CHECK_NOTHROW(c.validate());
    c.log_schedule = {0, 5, 3};
    CHECK_THROWS_AS(c.validate(), Error);
    c.log_schedule = {0, 11};
    CHECK_THROWS_AS(c.validate(), Error);
    c.log_schedule.clear();
    c.threshold_ratio = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("condition 1 advisory report") {
    const Condition1Report ok = validate_condition1(1000000000000000000L, 2000, 2000, 1e-3, 1e-10, 1e-10);
    CHECK(ok.all_hold);
    const Condition1Report edge = validate_condition1(4096, 8, 8, 1e-3, 1e-6, 1e-4);
    bool found = false;
    for (const auto& c : edge.checks)
        if (c.name == "m^4 <= d") {
            found = true;
            CHECK(c.borderline);
            CHECK(c.holds);
        }
    CHECK(found);
    const Condition1Report desk = validate_condition1(2000, 500, 128, 1e5, 1e-4, 0.01);
    CHECK_FALSE(desk.all_hold);
    CHECK(desk.summary.find("theory regime not met") != std::string::npos);
}
