#include "rankscope/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "rankscope/error.hpp"

namespace rankscope {

std::vector<double> singular_values(const Eigen::Ref<const Eigen::MatrixXd>& a) {
    require(a.rows() >= 1 && a.cols() >= 1, ErrorKind::Input, "singular_values: empty matrix");
    require(a.allFinite(), ErrorKind::Input, "singular_values: matrix has non-finite entries");
    Eigen::VectorXd s;
    if (a.rows() >= a.cols()) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
        s = svd.singularValues();
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(a.transpose());
        s = svd.singularValues();
    }
    std::vector<double> out(s.data(), s.data() + s.size());
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

double stable_rank_from_spectrum(const std::vector<double>& spectrum) {
    require(!spectrum.empty() && spectrum.front() > 0.0, ErrorKind::Numerical,
            "stable rank undefined for the zero matrix");
    double fro2 = 0.0;
    for (double v : spectrum) fro2 += v * v;
    return fro2 / (spectrum.front() * spectrum.front());
}

double stable_rank(const Eigen::Ref<const Eigen::MatrixXd>& a) {
    return stable_rank_from_spectrum(singular_values(a));
}

int rank_at_threshold(const std::vector<double>& spectrum, double ratio) {
    require(ratio > 0.0 && ratio <= 1.0, ErrorKind::Parameter,
            "rank_at_threshold: ratio must lie in (0, 1]");
    require(!spectrum.empty(), ErrorKind::Input, "rank_at_threshold: empty spectrum");
    if (spectrum.front() <= 0.0) return 0;
    const double cut = ratio * spectrum.front();
    return static_cast<int>(std::count_if(spectrum.begin(), spectrum.end(),
                                          [cut](double v) { return v >= cut; }));
}

SpectrumReport spectrum_report(const Eigen::Ref<const Eigen::MatrixXd>& a, double ratio) {
    SpectrumReport r;
    r.singular_values = singular_values(a);
    r.frobenius_norm = a.norm();
    r.operator_norm = r.singular_values.front();
    r.stable_rank = r.operator_norm > 0.0 ? stable_rank_from_spectrum(r.singular_values) : 0.0;
    r.threshold_rank = rank_at_threshold(r.singular_values, ratio);
    return r;
}

double spectrum_union_check(const Eigen::Ref<const Eigen::MatrixXd>& a,
                            const Eigen::Ref<const Eigen::MatrixXd>& b) {
    require(a.rows() == b.rows(), ErrorKind::Input, "spectrum_union_check: row mismatch");
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            const double ip = a.col(i).dot(b.col(j));
            const double scale = std::max(1.0, a.col(i).norm() * b.col(j).norm());
            require(std::abs(ip) <= 1e-10 * scale, ErrorKind::Input,
                    "spectrum_union_check: column spaces are not orthogonal");
        }
    }
    Eigen::MatrixXd c(a.rows(), a.cols() + b.cols());
    c << a, b;
    const std::vector<double> joint = singular_values(c);
    std::vector<double> merged = singular_values(a);
    const std::vector<double> sb = singular_values(b);
    merged.insert(merged.end(), sb.begin(), sb.end());
    std::sort(merged.begin(), merged.end(), std::greater<>());
    // [A B] has min(d, P1+P2) values; the union may carry extra zeros when d < P1+P2.
    double dev = 0.0;
    const std::size_t n = std::max(joint.size(), merged.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double x = i < joint.size() ? joint[i] : 0.0;
        const double y = i < merged.size() ? merged[i] : 0.0;
        dev = std::max(dev, std::abs(x - y));
    }
    return dev;
}

}  // namespace rankscope
