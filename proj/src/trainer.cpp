#include "rankscope/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "rankscope/analysis.hpp"
#include "rankscope/error.hpp"
#include "rankscope/random.hpp"
#include "rankscope/spectral.hpp"

namespace rankscope {

void TrainConfig::validate() const {
    require(eta > 0.0 && std::isfinite(eta), ErrorKind::Parameter, "eta must be positive");
    require(sigma0 > 0.0 && std::isfinite(sigma0), ErrorKind::Parameter, "sigma0 must be positive");
    require(steps >= 0, ErrorKind::Parameter, "steps must be non-negative");
    require(log_subdivisions >= 0 && log_subdivisions <= 10, ErrorKind::Parameter,
            "log_subdivisions must lie in [0, 10]");
    require(threshold_ratio > 0.0 && threshold_ratio <= 1.0, ErrorKind::Parameter,
            "threshold ratio must lie in (0, 1]");
    require(n_test >= 0, ErrorKind::Parameter, "n_test must be non-negative");
    for (std::size_t i = 0; i < log_schedule.size(); ++i) {
        require(log_schedule[i] >= 0 && log_schedule[i] <= steps, ErrorKind::Parameter,
                "log schedule entries must lie in [0, steps]");
        require(i == 0 || log_schedule[i] > log_schedule[i - 1], ErrorKind::Parameter,
                "log schedule must be strictly increasing");
    }
}

std::vector<long> geometric_schedule(long T, int subdivisions) {
    std::set<long> s{0};
    const long base = 1L << subdivisions;
    for (long t = 1; t <= std::min(T, base); ++t) s.insert(t);
    for (long scale = 1; base * scale <= T && scale < (1L << 52); scale *= 2)
        for (long b = base; b < 2 * base; ++b)
            if (b * scale <= T) s.insert(b * scale);
    if (T > 0) s.insert(T);
    return {s.begin(), s.end()};
}

const TraceRow* TrainTrace::at_step(long step) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), step,
                               [](const TraceRow& r, long s) { return r.step < s; });
    if (it == rows.end() || it->step != step) return nullptr;
    return &*it;
}

CnnParams init_params(int d, int m, int q, double kappa, double sigma0, std::uint64_t seed) {
    require(sigma0 > 0.0, ErrorKind::Parameter, "init_params: sigma0 must be positive");
    CnnParams p = zero_params(d, m, q, kappa);
    auto rng = make_rng(seed, Stream::Init);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index r = 0; r < p.filters.rows(); ++r)
        for (Eigen::Index c = 0; c < p.filters.cols(); ++c) p.filters(r, c) = sigma0 * normal(rng);
    return p;
}

double gd_step(CnnParams& params, const PatchedDataset& data, double eta) {
    BatchEvaluator eval(data);
    RowMatrix grad;
    const double loss = eval.loss_and_gradient(params, grad);
    params.filters -= eta * grad;
    return loss;
}

TraceRow measure(const CnnParams& params, const CnnParams& initial, const BasisSystem* basis,
                 long step, double train_loss, double threshold_ratio) {
    TraceRow row;
    row.step = step;
    row.train_loss = train_loss;
    row.test_loss = std::numeric_limits<double>::quiet_NaN();
    const SpectrumReport spec = filter_matrix_spectrum(params, threshold_ratio);
    row.filter_stable_rank = spec.stable_rank;
    row.filter_threshold_rank = spec.threshold_rank;
    if (basis == nullptr || basis->K == 0) return row;

    const int K = basis->K;
    row.max_signal.assign(static_cast<std::size_t>(2 * K), 0.0);
    row.argmax_filter.assign(static_cast<std::size_t>(2 * K), 0);
    for (int j : {1, -1}) {
        const auto bank = params.bank(j);
        for (int k = 0; k < K; ++k) {
            const int col = basis->column(j, k);
            const Eigen::VectorXd inner = bank * basis->vectors.col(col);
            Eigen::Index best = 0;
            inner.maxCoeff(&best);
            row.max_signal[static_cast<std::size_t>(col)] = inner(best);
            row.argmax_filter[static_cast<std::size_t>(col)] = static_cast<int>(best);
        }
    }
    const std::vector<double> proj = noise_projection_norms(params, initial, *basis);
    for (int r = 0; r < params.m; ++r) {
        row.noise_projection_plus = std::max(row.noise_projection_plus, proj[static_cast<std::size_t>(r)]);
        row.noise_projection_minus =
            std::max(row.noise_projection_minus, proj[static_cast<std::size_t>(params.m + r)]);
    }
    if (params.m >= K && params.filters.squaredNorm() > 0.0) {
        const AlignmentReport al = alignment_distance(params, *basis);
        row.alignment_plus = al.plus.distance;
        row.alignment_minus = al.minus.distance;
    }
    return row;
}

TrainResult train(CnnParams params, const CnnParams& initial, const PatchedDataset& data,
                  const BasisSystem* basis, const TrainConfig& config, long start_step,
                  const TrainHooks& hooks) {
    config.validate();
    params.validate();
    require(params.d == data.d, ErrorKind::Input, "train: filter dimension does not match data");
    require(start_step >= 0 && start_step <= config.steps, ErrorKind::Parameter,
            "train: start step outside [0, steps]");

    std::vector<long> schedule = config.log_schedule.empty()
                                     ? geometric_schedule(config.steps, config.log_subdivisions)
                                     : config.log_schedule;
    if (schedule.empty() || schedule.back() != config.steps) schedule.push_back(config.steps);
    auto next_log = std::lower_bound(schedule.begin(), schedule.end(), start_step);

    DataParams fresh{data.P, data.policy, data.sigma_noise};
    BatchEvaluator eval(data);
    RowMatrix grad;
    TrainResult result;
    result.trace.K = basis ? basis->K : 0;

    for (long t = start_step;; ++t) {
        const bool last = t == config.steps;
        // The gradient is only needed when another step follows.
        const double loss = last ? eval.loss(params) : eval.loss_and_gradient(params, grad);
        if (!std::isfinite(loss) || !params.filters.allFinite())
            throw DivergenceError(t, "training diverged at step " + std::to_string(t));

        if (next_log != schedule.end() && *next_log == t) {
            ++next_log;
            TraceRow row = measure(params, initial, basis, t, loss, config.threshold_ratio);
            if (config.n_test > 0 && basis != nullptr) {
                const LossEstimate est = test_loss_estimate(params, *basis, fresh, config.n_test,
                                                            config.seed ^ 0x7e57da7aULL);
                row.test_loss = est.mean;
                row.test_stderr = est.standard_error;
            }
            result.trace.rows.push_back(row);
            if (hooks.on_log) hooks.on_log(params, row);
            if (config.target_loss && loss <= *config.target_loss) {
                result.stopped_early = !last;
                result.final_step = t;
                break;
            }
        }
        if (last) {
            result.final_step = t;
            break;
        }
        params.filters -= config.eta * grad;
    }
    result.params = std::move(params);
    return result;
}

namespace {

Condition1Check check_le(std::string name, double lhs, double rhs) {
    Condition1Check c;
    c.name = std::move(name);
    c.lhs = lhs;
    c.rhs = rhs;
    const double tol = 1e-12 * std::max(std::abs(lhs), std::abs(rhs));
    c.borderline = std::abs(lhs - rhs) <= tol;
    c.holds = lhs <= rhs + tol;
    return c;
}

}  // namespace

Condition1Report validate_condition1(long d, long n, long m, double eta, double sigma0,
                                     double sigma_noise) {
    Condition1Report rep;
    const double dd = static_cast<double>(d);
    const double polylog = std::pow(std::log(dd), 2.0);
    const double inv_noise_d =
        sigma_noise > 0.0 ? 1.0 / (sigma_noise * sigma_noise * dd) : std::numeric_limits<double>::infinity();
    const double inv_sigma_d =
        sigma_noise > 0.0 ? 1.0 / (sigma_noise * dd) : std::numeric_limits<double>::infinity();

    rep.checks.push_back(check_le("m^4 <= d", std::pow(static_cast<double>(m), 4), dd));
    rep.checks.push_back(check_le("n^4 <= d", std::pow(static_cast<double>(n), 4), dd));
    rep.checks.push_back(check_le("log(d)^2 <= n", polylog, static_cast<double>(n)));
    rep.checks.push_back(check_le("log(d)^2 <= m", polylog, static_cast<double>(m)));
    rep.checks.push_back(check_le("eta <= min(1, 1/(sigma^2 d))", eta, std::min(1.0, inv_noise_d)));
    rep.checks.push_back(
        check_le("sigma0 <= min(d^-1/2, 1/(sigma d))", sigma0, std::min(1.0 / std::sqrt(dd), inv_sigma_d)));

    rep.all_hold = std::all_of(rep.checks.begin(), rep.checks.end(),
                               [](const Condition1Check& c) { return c.holds; });
    std::ostringstream os;
    if (rep.all_hold) {
        os << "theory regime met";
    } else {
        os << "theory regime not met, empirical run only (failing:";
        for (const auto& c : rep.checks)
            if (!c.holds) os << " [" << c.name << "]";
        os << ")";
    }
    rep.summary = os.str();
    return rep;
}

}  // namespace rankscope
