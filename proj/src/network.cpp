#include "rankscope/network.hpp"

#include <cmath>
#include <string>

#include "rankscope/error.hpp"
#include "rankscope/kernels.hpp"

namespace rankscope {

void CnnParams::validate() const {
    require(q >= 3, ErrorKind::Parameter, "activation exponent q must be at least 3");
    require(kappa > 0.0, ErrorKind::Parameter, "kappa must be positive");
    require(m >= 1 && d >= 1, ErrorKind::Parameter, "filter bank must be non-empty");
    require(filters.rows() == 2 * m && filters.cols() == d, ErrorKind::Input,
            "filter matrix shape does not match (2m, d)");
    require(filters.allFinite(), ErrorKind::Input, "filters contain non-finite values");
}

CnnParams zero_params(int d, int m, int q, double kappa) {
    CnnParams p;
    p.m = m;
    p.d = d;
    p.q = q;
    p.kappa = kappa;
    p.filters = RowMatrix::Zero(2 * m, d);
    p.validate();
    return p;
}

namespace {

inline double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

}  // namespace

double act(double z, int q, double kappa) {
    if (z <= 0.0) return 0.0;
    if (z <= kappa) return ipow(z, q) / (q * ipow(kappa, q - 1));
    return z - (1.0 - 1.0 / q) * kappa;
}

double act_prime(double z, int q, double kappa) {
    if (z <= 0.0) return 0.0;
    if (z <= kappa) return ipow(z / kappa, q - 1);
    return 1.0;
}

double logistic_loss(double z) {
    if (z >= 0.0) return std::log1p(std::exp(-z));
    return -z + std::log1p(std::exp(z));
}

double logistic_loss_prime(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return -e / (1.0 + e);
    }
    return -1.0 / (1.0 + std::exp(z));
}

ForwardResult forward(const CnnParams& params, const Eigen::Ref<const Eigen::MatrixXd>& patches) {
    require(patches.rows() == params.d, ErrorKind::Input,
            "forward: patch dimension " + std::to_string(patches.rows()) +
                " does not match filter dimension " + std::to_string(params.d));
    ForwardResult out;
    for (int j : {1, -1}) {
        double sum = 0.0;
        for (int r = 0; r < params.m; ++r) {
            const auto w = params.filters.row(params.row(j, r));
            for (Eigen::Index p = 0; p < patches.cols(); ++p)
                sum += act(w.dot(patches.col(p).transpose()), params.q, params.kappa);
        }
        (j > 0 ? out.f_plus : out.f_minus) = sum / params.m;
    }
    out.output = out.f_plus - out.f_minus;
    return out;
}

BatchEvaluator::BatchEvaluator(const PatchedDataset& data)
    : data_(&data), x_rows_(data.patches), margins_(data.n) {
    require(data.n >= 1, ErrorKind::Input, "BatchEvaluator: empty dataset");
}

void BatchEvaluator::preactivations(const CnnParams& params) {
    require(params.d == data_->d, ErrorKind::Input, "filter dimension does not match data");
    const auto N = static_cast<std::size_t>(data_->patches.cols());
    z_.setZero(2 * params.m, static_cast<Eigen::Index>(N));
    kernels::gemm_acc(static_cast<std::size_t>(2 * params.m), N, static_cast<std::size_t>(params.d),
                      params.filters.data(), static_cast<std::size_t>(params.d), x_rows_.data(), N,
                      z_.data(), N);
}

double BatchEvaluator::reduce_loss(const CnnParams& params) {
    const int n = data_->n;
    const int P = data_->P;
    const int m = params.m;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double fp = 0.0;
        double fm = 0.0;
        for (int r = 0; r < m; ++r) {
            const double* zp = z_.row(r).data() + static_cast<std::ptrdiff_t>(i) * P;
            const double* zm = z_.row(m + r).data() + static_cast<std::ptrdiff_t>(i) * P;
            for (int p = 0; p < P; ++p) {
                fp += act(zp[p], params.q, params.kappa);
                fm += act(zm[p], params.q, params.kappa);
            }
        }
        const double margin = data_->labels[static_cast<std::size_t>(i)] * (fp - fm) / m;
        margins_(i) = margin;
        total += logistic_loss(margin);
    }
    return total / n;
}

double BatchEvaluator::loss(const CnnParams& params) {
    preactivations(params);
    return reduce_loss(params);
}

double BatchEvaluator::loss_and_gradient(const CnnParams& params, RowMatrix& grad) {
    preactivations(params);
    const double value = reduce_loss(params);

    const int n = data_->n;
    const int P = data_->P;
    const int m = params.m;
    const double scale = 1.0 / (static_cast<double>(n) * m);
    // z_ is overwritten in place with the combination coefficients.
    for (int row = 0; row < 2 * m; ++row) {
        const double j = row < m ? 1.0 : -1.0;
        double* zr = z_.row(row).data();
        for (int i = 0; i < n; ++i) {
            const double g = logistic_loss_prime(margins_(i)) * j *
                             data_->labels[static_cast<std::size_t>(i)] * scale;
            for (int p = 0; p < P; ++p) {
                double& z = zr[static_cast<std::ptrdiff_t>(i) * P + p];
                z = g * act_prime(z, params.q, params.kappa);
            }
        }
    }
    const auto N = static_cast<std::size_t>(data_->patches.cols());
    grad.setZero(2 * m, params.d);
    kernels::gemm_acc(static_cast<std::size_t>(2 * m), static_cast<std::size_t>(params.d), N,
                      z_.data(), N, data_->patches.data(), static_cast<std::size_t>(params.d),
                      grad.data(), static_cast<std::size_t>(params.d));
    return value;
}

double training_loss(const CnnParams& params, const PatchedDataset& data) {
    BatchEvaluator eval(data);
    return eval.loss(params);
}

RowMatrix gradient(const CnnParams& params, const PatchedDataset& data) {
    BatchEvaluator eval(data);
    RowMatrix g;
    eval.loss_and_gradient(params, g);
    return g;
}

LossEstimate test_loss_estimate(const CnnParams& params, const BasisSystem& basis,
                                const DataParams& config, int n_test, std::uint64_t seed) {
    require(n_test >= 1, ErrorKind::Parameter, "test_loss_estimate: n_test must be positive");
    const PatchedDataset fresh =
        sample_dataset(basis, n_test, config.P, config.policy, config.sigma_noise, seed);
    BatchEvaluator eval(fresh);
    eval.loss(params);
    const Eigen::VectorXd& mg = eval.margins();
    Eigen::VectorXd losses(n_test);
    for (int i = 0; i < n_test; ++i) losses(i) = logistic_loss(mg(i));
    LossEstimate est;
    est.mean = losses.mean();
    if (n_test > 1) {
        const double var = (losses.array() - est.mean).square().sum() / (n_test - 1);
        est.standard_error = std::sqrt(var / n_test);
    }
    return est;
}

}  // namespace rankscope
