#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace rankscope {

enum class BasisMode { OneHot, RandomOrthonormal, External };

const char* to_string(BasisMode mode);
BasisMode basis_mode_from_string(const std::string& s);

/// Two orthonormal families of K vectors each in R^d, one per class, and the
/// projector onto the orthogonal complement of their span.
struct BasisSystem {
    int d = 0;
    int K = 0;
    BasisMode mode = BasisMode::OneHot;
    std::uint64_t seed = 0;
    // d x 2K; columns [0, K) belong to class +1 and [K, 2K) to class -1.
    Eigen::MatrixXd vectors;

    static int column(int label, int k, int K) { return label > 0 ? k : K + k; }
    int column(int label, int k) const { return column(label, k, K); }
    Eigen::VectorXd mu(int label, int k) const { return vectors.col(column(label, k)); }

    Eigen::VectorXd project_noise(const Eigen::Ref<const Eigen::VectorXd>& v) const;
    // In-place projection of every column.
    void project_noise_columns(Eigen::Ref<Eigen::MatrixXd> m) const;
    Eigen::MatrixXd projector() const;
};

/// Builds U_{+1} and U_{-1}. One-hot uses e_1..e_2K; random orthonormalizes 2K
/// Gaussian vectors. Throws ErrorKind::Parameter when d < 2K or K < 1.
BasisSystem make_basis(int d, int K, BasisMode mode, std::uint64_t seed);

struct ObjectSetPolicy {
    enum class Kind { FixedSize, UniformProper } kind = Kind::FixedSize;
    int size = 1;  // used by FixedSize only
};

std::string to_string(const ObjectSetPolicy& policy);

/// n labelled inputs, each a d x P block of patches stored contiguously.
struct PatchedDataset {
    int d = 0;
    int n = 0;
    int P = 0;
    int K = 0;
    double sigma_noise = 0.0;
    std::uint64_t seed = 0;
    ObjectSetPolicy policy;
    BasisMode basis_mode = BasisMode::OneHot;
    std::uint64_t basis_seed = 0;

    // d x nP, column i*P + p holds patch p of input i. Background columns are the
    // retained noise vectors.
    Eigen::MatrixXd patches;
    std::vector<int> labels;                     // +1 / -1
    std::vector<std::vector<int>> object_sets;   // sorted patch positions per input
    std::vector<std::vector<int>> assignments;   // basis column per object patch, parallel to object_sets

    Eigen::Index column(int i, int p) const { return static_cast<Eigen::Index>(i) * P + p; }
    auto input(int i) const { return patches.middleCols(static_cast<Eigen::Index>(i) * P, P); }
    bool is_object(int i, int p) const;
    // Column indices of every background patch, in data-matrix order.
    std::vector<Eigen::Index> noise_columns() const;
    std::vector<Eigen::Index> object_columns() const;
};

PatchedDataset sample_dataset(const BasisSystem& basis, int n, int P, const ObjectSetPolicy& policy,
                              double sigma_noise, std::uint64_t seed);

/// The stacked d x nP matrix with columns x_1^(1..P), x_2^(1..P), ...
Eigen::MatrixXd assemble_data_matrix(const PatchedDataset& data);

/// sqrt of the per-basis-vector object-patch counts, descending (2K values).
std::vector<double> clean_spectrum_oracle(const PatchedDataset& data);
std::vector<int> basis_counts(const PatchedDataset& data);

enum class NoiseRegime { BelowBoundary, AboveBoundary };

struct RegimeReport {
    NoiseRegime regime = NoiseRegime::BelowBoundary;
    double sigma_sqrt_d = 0.0;
    double lower = 0.0;  // predicted band for sr(X)
    double upper = 0.0;  // +inf above the boundary
    double constant = 1.0;
    double delta = 0.05;
};

RegimeReport classify_noise_regime(double sigma_noise, int d, int n, int K, double constant = 1.0,
                                   double delta = 0.05);

const char* to_string(NoiseRegime r);

}  // namespace rankscope
