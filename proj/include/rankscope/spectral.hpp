#pragma once

#include <Eigen/Dense>
#include <vector>

namespace rankscope {

/// Sorted singular values of a matrix together with the rank functionals
/// derived from them.
struct SpectrumReport {
    std::vector<double> singular_values;  // descending
    double frobenius_norm = 0.0;
    double operator_norm = 0.0;
    double stable_rank = 0.0;  // 0 for the zero matrix
    int threshold_rank = 0;
};

constexpr double kDefaultThresholdRatio = 0.01;

/// Full spectrum, descending. Throws ErrorKind::Input on non-finite entries.
std::vector<double> singular_values(const Eigen::Ref<const Eigen::MatrixXd>& a);

/// ||A||_F^2 / ||A||_2^2. Throws ErrorKind::Numerical for the zero matrix.
double stable_rank(const Eigen::Ref<const Eigen::MatrixXd>& a);
double stable_rank_from_spectrum(const std::vector<double>& spectrum);

/// Number of values >= ratio * spectrum[0]; ratio must lie in (0, 1].
int rank_at_threshold(const std::vector<double>& spectrum, double ratio);

SpectrumReport spectrum_report(const Eigen::Ref<const Eigen::MatrixXd>& a,
                               double ratio = kDefaultThresholdRatio);

/// Checks that the spectrum of [A B] is the union of the spectra of A and B
/// when the column spaces are orthogonal. Returns the largest deviation
/// between the two sorted lists. Throws ErrorKind::Input if some column of A
/// is not orthogonal (within 1e-10 relative) to some column of B.
double spectrum_union_check(const Eigen::Ref<const Eigen::MatrixXd>& a,
                            const Eigen::Ref<const Eigen::MatrixXd>& b);

}  // namespace rankscope
