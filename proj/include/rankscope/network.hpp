#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "rankscope/datamodel.hpp"

namespace rankscope {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Filter banks of the two-layer patch CNN. Rows [0, m) of `filters` are the
/// class +1 bank, rows [m, 2m) the class -1 bank. Second-layer weights are the
/// fixed constants +1/m and -1/m.
struct CnnParams {
    int m = 0;
    int d = 0;
    int q = 3;
    double kappa = 1.0;
    RowMatrix filters;

    static int row(int label, int r, int m) { return label > 0 ? r : m + r; }
    int row(int label, int r) const { return row(label, r, m); }
    auto bank(int label) const { return filters.middleRows(label > 0 ? 0 : m, m); }
    void validate() const;
};

CnnParams zero_params(int d, int m, int q = 3, double kappa = 1.0);

/// Huberized ReLU: 0 below zero, z^q/(q kappa^(q-1)) on [0, kappa], linear above.
double act(double z, int q, double kappa);
/// Derivative of act. The kinks at 0 and kappa take the value of the middle branch.
double act_prime(double z, int q, double kappa);

/// log(1 + exp(-z)) without overflow.
double logistic_loss(double z);
/// d/dz log(1 + exp(-z)) = -1/(1 + exp(z)).
double logistic_loss_prime(double z);

struct ForwardResult {
    double output = 0.0;  // F_plus - F_minus
    double f_plus = 0.0;
    double f_minus = 0.0;
};

/// Evaluates one input given as a d x P patch block.
ForwardResult forward(const CnnParams& params, const Eigen::Ref<const Eigen::MatrixXd>& patches);

double training_loss(const CnnParams& params, const PatchedDataset& data);
RowMatrix gradient(const CnnParams& params, const PatchedDataset& data);

/// Reusable full-batch evaluator. Holds a row-major copy of the data matrix so
/// that pre-activations and gradients reduce to two dense products.
class BatchEvaluator {
public:
    explicit BatchEvaluator(const PatchedDataset& data);

    double loss(const CnnParams& params);
    /// Loss at the current parameters; fills `grad` (2m x d).
    double loss_and_gradient(const CnnParams& params, RowMatrix& grad);

    // Margins y_i f(W, X_i) from the last evaluation.
    const Eigen::VectorXd& margins() const { return margins_; }

private:
    void preactivations(const CnnParams& params);
    double reduce_loss(const CnnParams& params);

    const PatchedDataset* data_;
    RowMatrix x_rows_;  // d x nP
    RowMatrix z_;       // 2m x nP
    Eigen::VectorXd margins_;
};

struct LossEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

struct DataParams {
    int P = 3;
    ObjectSetPolicy policy;
    double sigma_noise = 0.0;
};

/// Monte-Carlo estimate of the population loss on fresh draws from the data model.
LossEstimate test_loss_estimate(const CnnParams& params, const BasisSystem& basis,
                                const DataParams& config, int n_test, std::uint64_t seed);

}  // namespace rankscope
