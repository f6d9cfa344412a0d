#include "rankscope/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rankscope/error.hpp"
#include "rankscope/hungarian.hpp"

namespace rankscope {

SpectrumReport filter_matrix_spectrum(const CnnParams& params, double ratio) {
    require(params.filters.squaredNorm() > 0.0, ErrorKind::Numerical,
            "filter rank undefined for all-zero weights");
    return spectrum_report(params.filters, ratio);
}

double FilterDecomposition::max_residual() const {
    return residual.size() ? residual.maxCoeff() : 0.0;
}

FilterDecomposition decompose_filters(const CnnParams& params, const CnnParams& initial,
                                      const BasisSystem& basis, const PatchedDataset& data) {
    require(params.d == basis.d && params.d == data.d && initial.filters.rows() == params.filters.rows() &&
                initial.filters.cols() == params.filters.cols(),
            ErrorKind::Input, "decompose_filters: shape mismatch");
    const int m = params.m;
    const int K = basis.K;
    FilterDecomposition out;
    out.m = m;
    out.K = K;
    out.noise_columns = data.noise_columns();
    const auto nn = static_cast<Eigen::Index>(out.noise_columns.size());

    Eigen::MatrixXd dict(params.d, nn);
    for (Eigen::Index c = 0; c < nn; ++c) {
        const auto xi = data.patches.col(out.noise_columns[static_cast<std::size_t>(c)]);
        const double n2 = xi.squaredNorm();
        require(n2 > 0.0, ErrorKind::Numerical,
                "decompose_filters: background patch with zero norm, decomposition unstable");
        dict.col(c) = xi / n2;
    }
    const Eigen::MatrixXd gram = dict.transpose() * dict;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    out.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    require(out.condition_number <= 1e12, ErrorKind::Numerical,
            "decompose_filters: background Gram matrix is ill-conditioned (cond " +
                std::to_string(out.condition_number) + "), decomposition unstable");

    const Eigen::MatrixXd delta = (params.filters - initial.filters).transpose();  // d x 2m
    out.gamma.resize(2 * m, K);
    out.beta.resize(2 * m, K);
    const Eigen::MatrixXd signal = basis.vectors.transpose() * delta;  // 2K x 2m
    for (int row = 0; row < 2 * m; ++row) {
        const int j = row < m ? 1 : -1;
        for (int k = 0; k < K; ++k) {
            out.gamma(row, k) = signal(basis.column(j, k), row);
            out.beta(row, k) = signal(basis.column(-j, k), row);
        }
    }
    Eigen::MatrixXd xi = delta;
    basis.project_noise_columns(xi);
    out.xi = xi.transpose();
    out.xi_norm = xi.colwise().norm().transpose();

    const Eigen::MatrixXd rhs = dict.transpose() * xi;  // nn x 2m
    const Eigen::MatrixXd rho = gram.ldlt().solve(rhs);
    out.rho = rho.transpose();

    const Eigen::MatrixXd noise_part = dict * rho;
    const Eigen::MatrixXd recon = basis.vectors * signal + noise_part;
    out.residual = (delta - recon).colwise().norm().transpose();
    out.xi_residual = (xi - noise_part).colwise().norm().transpose();
    return out;
}

std::vector<double> noise_projection_norms(const CnnParams& params, const CnnParams& initial,
                                           const BasisSystem& basis) {
    require(params.d == basis.d, ErrorKind::Input, "noise_projection_norms: dimension mismatch");
    Eigen::MatrixXd delta = (params.filters - initial.filters).transpose();
    basis.project_noise_columns(delta);
    const Eigen::VectorXd norms = delta.colwise().norm().transpose();
    return {norms.data(), norms.data() + norms.size()};
}

namespace {

ClassAlignment align_class(const CnnParams& params, const BasisSystem& basis, int label) {
    const int K = basis.K;
    const int m = params.m;
    const Eigen::MatrixXd bank = params.bank(label);
    const Eigen::MatrixXd U = basis.vectors.middleCols(label > 0 ? 0 : K, K);
    const Eigen::MatrixXd inner = bank * U;  // m x K
    const std::vector<int> match = solve_assignment(-inner.transpose());

    ClassAlignment ca;
    ca.label = label;
    ca.matched_rows = match;
    const double wnorm = bank.norm();
    const double target = 1.0 / std::sqrt(static_cast<double>(K));
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    double dist2 = 0.0;
    for (int k = 0; k < K; ++k) {
        const int r = match[static_cast<std::size_t>(k)];
        used[static_cast<std::size_t>(r)] = 1;
        ca.inner.push_back(inner(r, k));
        if (wnorm > 0.0)
            dist2 += (U.col(k) * target - bank.row(r).transpose() / wnorm).squaredNorm();
        else
            dist2 += target * target;
    }
    for (int r = 0; r < m; ++r)
        if (!used[static_cast<std::size_t>(r)] && wnorm > 0.0)
            dist2 += bank.row(r).squaredNorm() / (wnorm * wnorm);
    ca.distance = std::sqrt(dist2);
    return ca;
}

}  // namespace

bool AlignmentReport::matched_rows_distinct() const {
    std::set<int> a(plus.matched_rows.begin(), plus.matched_rows.end());
    std::set<int> b(minus.matched_rows.begin(), minus.matched_rows.end());
    // The two banks hold different filters, so only within-class collisions matter.
    return a.size() == plus.matched_rows.size() && b.size() == minus.matched_rows.size();
}

AlignmentReport alignment_distance(const CnnParams& params, const BasisSystem& basis) {
    require(params.m >= basis.K, ErrorKind::Parameter,
            "alignment_distance: need at least K filters per class");
    require(params.d == basis.d, ErrorKind::Input, "alignment_distance: dimension mismatch");
    return {align_class(params, basis, 1), align_class(params, basis, -1)};
}

long phase1_crossing(const TrainTrace& trace, double kappa) {
    for (const auto& row : trace.rows) {
        if (row.max_signal.empty()) continue;
        if (*std::max_element(row.max_signal.begin(), row.max_signal.end()) >= kappa) return row.step;
    }
    return -1;
}

GrowthReport fit_growth_law(const TrainTrace& trace, int m, double kappa) {
    require(!trace.rows.empty() && !trace.rows.front().max_signal.empty(), ErrorKind::Numerical,
            "fit_growth_law: trace has no signal metrics");
    GrowthReport rep;
    rep.burn_in = phase1_crossing(trace, kappa);
    require(rep.burn_in >= 0, ErrorKind::Numerical, "fit_growth_law: signal never reached kappa");
    rep.window_end = trace.rows.back().step;
    rep.window_start = std::max({rep.window_end / 10, rep.burn_in, 2L});

    std::vector<const TraceRow*> pts;
    for (const auto& row : trace.rows)
        if (row.step >= rep.window_start) pts.push_back(&row);
    rep.points = static_cast<int>(pts.size());
    require(rep.points >= 5, ErrorKind::Numerical,
            "fit_growth_law: only " + std::to_string(rep.points) +
                " logged points in the final decade past burn-in (need 5)");

    const std::size_t cols = trace.rows.front().max_signal.size();
    for (std::size_t c = 0; c < cols; ++c) {
        GrowthFit fit;
        fit.column = static_cast<int>(c);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::vector<double> ratios;
        for (const TraceRow* row : pts) {
            const double x = m * std::log(static_cast<double>(row->step));
            const double y = row->max_signal[c];
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ratios.push_back(y / x);
        }
        const double np = static_cast<double>(pts.size());
        const double den = np * sxx - sx * sx;
        fit.slope = den != 0.0 ? (np * sxy - sx * sy) / den : 0.0;
        fit.intercept = (sy - fit.slope * sx) / np;
        double mean = 0.0;
        for (double r : ratios) mean += r;
        fit.mean_ratio = mean / np;
        for (double r : ratios)
            fit.max_deviation = std::max(fit.max_deviation, std::abs(r / fit.mean_ratio - 1.0));
        rep.max_deviation = std::max(rep.max_deviation, fit.max_deviation);
        rep.fits.push_back(fit);
    }
    return rep;
}

LossRateReport fit_loss_rate(const TrainTrace& trace, double eta, int m, long t0) {
    require(t0 >= 1, ErrorKind::Numerical, "fit_loss_rate: t0 must be positive");
    LossRateReport rep;
    for (long t = t0;; t *= 2) {
        const TraceRow* row = trace.at_step(t);
        if (row == nullptr) break;
        rep.steps.push_back(t);
        rep.products.push_back(eta * static_cast<double>(t) * row->train_loss /
                               (static_cast<double>(m) * m));
    }
    require(rep.steps.size() >= 3, ErrorKind::Numerical,
            "fit_loss_rate: need logged steps t0, 2 t0 and 4 t0 (t0 = " + std::to_string(t0) + ")");
    rep.max_ratio = 1.0;
    for (std::size_t i = 1; i < rep.products.size(); ++i) {
        const double a = rep.products[i - 1];
        const double b = rep.products[i];
        rep.max_ratio = std::max(rep.max_ratio, std::max(a / b, b / a));
    }
    return rep;
}

RankGapReport rank_gap_report(const SpectrumReport& data_spectrum,
                              const SpectrumReport& filter_spectrum, int K, long T,
                              double sigma_noise, int d, int n) {
    RankGapReport r;
    r.filter_sr_gap = std::abs(filter_spectrum.stable_rank - 2.0 * K);
    r.inv_log_T = T > 1 ? 1.0 / std::log(static_cast<double>(T)) : 0.0;
    r.fitted_constant = T > 1 ? r.filter_sr_gap * std::log(static_cast<double>(T)) : 0.0;
    r.data_sr_excess = data_spectrum.stable_rank - 2.0 * K;
    r.data_threshold_rank = data_spectrum.threshold_rank;
    r.filter_threshold_rank = filter_spectrum.threshold_rank;
    r.regime = classify_noise_regime(sigma_noise, d, n, K);
    return r;
}

}  // namespace rankscope
