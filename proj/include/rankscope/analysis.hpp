#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rankscope/datamodel.hpp"
#include "rankscope/network.hpp"
#include "rankscope/spectral.hpp"
#include "rankscope/trainer.hpp"

namespace rankscope {

/// Spectrum of the 2m x d matrix that stacks every filter as a row.
SpectrumReport filter_matrix_spectrum(const CnnParams& params, double ratio = kDefaultThresholdRatio);

/// Expansion of each filter's displacement w - w0 over the class bases and the
/// normalized background patches xi / ||xi||^2.
struct FilterDecomposition {
    int m = 0;
    int K = 0;
    Eigen::MatrixXd gamma;  // 2m x K, <w - w0, mu_{j,k}> for the filter's own class j
    Eigen::MatrixXd beta;   // 2m x K, <w - w0, mu_{-j,k}>
    Eigen::MatrixXd rho;    // 2m x (#background patches)
    std::vector<Eigen::Index> noise_columns;  // data-matrix column of each rho coefficient
    RowMatrix xi;                             // 2m x d, P_N (w - w0)
    Eigen::VectorXd xi_norm;
    Eigen::VectorXd residual;      // ||(w - w0) - reconstruction||
    Eigen::VectorXd xi_residual;   // ||xi - sum rho xi/||xi||^2||
    double condition_number = 1.0;

    double max_residual() const;
};

/// Throws ErrorKind::Numerical when the background Gram matrix has condition
/// number above 1e12 (including the noiseless case).
FilterDecomposition decompose_filters(const CnnParams& params, const CnnParams& initial,
                                      const BasisSystem& basis, const PatchedDataset& data);

/// ||P_N (w_{j,r} - w0_{j,r})|| for every filter row.
std::vector<double> noise_projection_norms(const CnnParams& params, const CnnParams& initial,
                                           const BasisSystem& basis);

struct ClassAlignment {
    int label = 1;
    std::vector<int> matched_rows;  // filter row (within the class bank) for each k
    std::vector<double> inner;      // <w_{j, matched_rows[k]}, mu_{j,k}>
    double distance = 0.0;
};

struct AlignmentReport {
    ClassAlignment plus;
    ClassAlignment minus;
    bool matched_rows_distinct() const;
};

/// Optimal assignment of basis vectors to filters followed by the normalized
/// Frobenius distance to the ideal basis-row matrix. Requires m >= K.
AlignmentReport alignment_distance(const CnnParams& params, const BasisSystem& basis);

/// First logged step at which some filter's signal inner product reaches kappa,
/// or -1 if none does.
long phase1_crossing(const TrainTrace& trace, double kappa);

struct GrowthFit {
    int column = 0;  // BasisSystem::column(j, k)
    double slope = 0.0;
    double intercept = 0.0;
    double mean_ratio = 0.0;
    double max_deviation = 0.0;  // max |ratio/mean_ratio - 1|
};

struct GrowthReport {
    long burn_in = -1;
    long window_start = 0;
    long window_end = 0;
    int points = 0;
    std::vector<GrowthFit> fits;
    double max_deviation = 0.0;
};

/// Regresses max_r <w, mu> on m log t over the final decade of logged steps past
/// the burn-in. Throws ErrorKind::Numerical with fewer than five usable points.
GrowthReport fit_growth_law(const TrainTrace& trace, int m, double kappa);

struct LossRateReport {
    std::vector<long> steps;
    std::vector<double> products;  // eta * t * L(t) / m^2
    double max_ratio = 0.0;        // largest ratio between consecutive checkpoints (>= 1)
};

/// Products at t0, 2 t0, 4 t0, ... while logged. Throws ErrorKind::Numerical
/// unless at least t0, 2 t0 and 4 t0 are present.
LossRateReport fit_loss_rate(const TrainTrace& trace, double eta, int m, long t0);

struct RankGapReport {
    double filter_sr_gap = 0.0;  // |sr(W) - 2K|
    double inv_log_T = 0.0;
    double fitted_constant = 0.0;  // filter_sr_gap * log T
    double data_sr_excess = 0.0;   // sr(X) - 2K
    int data_threshold_rank = 0;
    int filter_threshold_rank = 0;
    RegimeReport regime;
};

RankGapReport rank_gap_report(const SpectrumReport& data_spectrum,
                              const SpectrumReport& filter_spectrum, int K, long T,
                              double sigma_noise, int d, int n);

}  // namespace rankscope
