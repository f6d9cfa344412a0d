#include "rankscope/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "rankscope/error.hpp"
#include "rankscope/random.hpp"

namespace rankscope {

const char* to_string(BasisMode mode) {
    switch (mode) {
        case BasisMode::OneHot: return "one-hot";
        case BasisMode::RandomOrthonormal: return "random";
        case BasisMode::External: return "external";
    }
    return "?";
}

BasisMode basis_mode_from_string(const std::string& s) {
    if (s == "one-hot") return BasisMode::OneHot;
    if (s == "random") return BasisMode::RandomOrthonormal;
    if (s == "external") return BasisMode::External;
    fail(ErrorKind::Validation, "unknown basis mode '" + s + "'");
}

std::string to_string(const ObjectSetPolicy& policy) {
    if (policy.kind == ObjectSetPolicy::Kind::UniformProper) return "uniform-proper";
    return "fixed";
}

Eigen::VectorXd BasisSystem::project_noise(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    Eigen::VectorXd out = v;
    if (vectors.cols() > 0) out.noalias() -= vectors * (vectors.transpose() * v);
    return out;
}

void BasisSystem::project_noise_columns(Eigen::Ref<Eigen::MatrixXd> m) const {
    if (vectors.cols() == 0) return;
    const Eigen::MatrixXd coeff = vectors.transpose() * m;
    m.noalias() -= vectors * coeff;
}

Eigen::MatrixXd BasisSystem::projector() const {
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(d, d);
    if (vectors.cols() > 0) p.noalias() -= vectors * vectors.transpose();
    return p;
}

BasisSystem make_basis(int d, int K, BasisMode mode, std::uint64_t seed) {
    require(K >= 1, ErrorKind::Parameter, "make_basis: K must be at least 1");
    require(d >= 2 * K, ErrorKind::Parameter,
            "make_basis: dimension " + std::to_string(d) + " cannot hold 2K=" +
                std::to_string(2 * K) + " orthonormal vectors");
    require(mode != BasisMode::External, ErrorKind::Parameter,
            "make_basis: external bases are not generated");
    BasisSystem b;
    b.d = d;
    b.K = K;
    b.mode = mode;
    b.seed = seed;
    if (mode == BasisMode::OneHot) {
        b.vectors = Eigen::MatrixXd::Identity(d, 2 * K);
        return b;
    }
    auto rng = make_rng(seed, Stream::Basis);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(d, 2 * K);
    for (Eigen::Index c = 0; c < g.cols(); ++c)
        for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    b.vectors = qr.householderQ() * Eigen::MatrixXd::Identity(d, 2 * K);
    return b;
}

bool PatchedDataset::is_object(int i, int p) const {
    const auto& s = object_sets.at(static_cast<std::size_t>(i));
    return std::binary_search(s.begin(), s.end(), p);
}

std::vector<Eigen::Index> PatchedDataset::noise_columns() const {
    std::vector<Eigen::Index> out;
    for (int i = 0; i < n; ++i)
        for (int p = 0; p < P; ++p)
            if (!is_object(i, p)) out.push_back(column(i, p));
    return out;
}

std::vector<Eigen::Index> PatchedDataset::object_columns() const {
    std::vector<Eigen::Index> out;
    for (int i = 0; i < n; ++i)
        for (int p : object_sets[static_cast<std::size_t>(i)]) out.push_back(column(i, p));
    return out;
}

PatchedDataset sample_dataset(const BasisSystem& basis, int n, int P, const ObjectSetPolicy& policy,
                              double sigma_noise, std::uint64_t seed) {
    require(n >= 1, ErrorKind::Parameter, "sample_dataset: n must be positive");
    require(P >= 2, ErrorKind::Parameter, "sample_dataset: need at least two patches per input");
    require(sigma_noise >= 0.0 && std::isfinite(sigma_noise), ErrorKind::Parameter,
            "sample_dataset: sigma_noise must be finite and non-negative");
    if (policy.kind == ObjectSetPolicy::Kind::FixedSize) {
        require(policy.size >= 1 && policy.size <= P - 1, ErrorKind::Parameter,
                "sample_dataset: object-set size must lie in [1, P-1]");
    } else {
        require(P <= 62, ErrorKind::Parameter, "sample_dataset: uniform-proper policy needs P <= 62");
    }

    PatchedDataset ds;
    ds.d = basis.d;
    ds.n = n;
    ds.P = P;
    ds.K = basis.K;
    ds.sigma_noise = sigma_noise;
    ds.seed = seed;
    ds.policy = policy;
    ds.basis_mode = basis.mode;
    ds.basis_seed = basis.seed;
    ds.patches = Eigen::MatrixXd::Zero(basis.d, static_cast<Eigen::Index>(n) * P);
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.object_sets.resize(static_cast<std::size_t>(n));
    ds.assignments.resize(static_cast<std::size_t>(n));

    auto rng = make_rng(seed, Stream::Data);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> pick_basis(0, basis.K - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<int> positions(static_cast<std::size_t>(P));

    for (int i = 0; i < n; ++i) {
        const int y = coin(rng) ? 1 : -1;
        ds.labels[static_cast<std::size_t>(i)] = y;

        std::vector<int> s;
        if (policy.kind == ObjectSetPolicy::Kind::FixedSize) {
            for (int p = 0; p < P; ++p) positions[static_cast<std::size_t>(p)] = p;
            // partial Fisher-Yates
            for (int a = 0; a < policy.size; ++a) {
                std::uniform_int_distribution<int> pick(a, P - 1);
                std::swap(positions[static_cast<std::size_t>(a)],
                          positions[static_cast<std::size_t>(pick(rng))]);
            }
            s.assign(positions.begin(), positions.begin() + policy.size);
        } else {
            std::uniform_int_distribution<std::uint64_t> pick(1, (std::uint64_t{1} << P) - 2);
            const std::uint64_t mask = pick(rng);
            for (int p = 0; p < P; ++p)
                if (mask & (std::uint64_t{1} << p)) s.push_back(p);
        }
        std::sort(s.begin(), s.end());

        std::vector<int> assigned;
        for (int p : s) {
            const int col = basis.column(y, pick_basis(rng));
            assigned.push_back(col);
            ds.patches.col(ds.column(i, p)) = basis.vectors.col(col);
        }
        for (int p = 0; p < P; ++p) {
            if (std::binary_search(s.begin(), s.end(), p)) continue;
            auto x = ds.patches.col(ds.column(i, p));
            // Draw even when sigma is zero so the clean part is shared across noise levels.
            for (Eigen::Index r = 0; r < x.size(); ++r) x(r) = sigma_noise * normal(rng);
            x -= basis.vectors * (basis.vectors.transpose() * x);
        }
        ds.object_sets[static_cast<std::size_t>(i)] = std::move(s);
        ds.assignments[static_cast<std::size_t>(i)] = std::move(assigned);
    }
    return ds;
}

Eigen::MatrixXd assemble_data_matrix(const PatchedDataset& data) {
    require(data.n >= 1, ErrorKind::Input, "assemble_data_matrix: empty dataset");
    return data.patches;
}

std::vector<int> basis_counts(const PatchedDataset& data) {
    std::vector<int> counts(static_cast<std::size_t>(2 * data.K), 0);
    for (const auto& a : data.assignments)
        for (int c : a) ++counts.at(static_cast<std::size_t>(c));
    return counts;
}

std::vector<double> clean_spectrum_oracle(const PatchedDataset& data) {
    std::vector<double> out;
    for (int c : basis_counts(data)) out.push_back(std::sqrt(static_cast<double>(c)));
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

RegimeReport classify_noise_regime(double sigma_noise, int d, int n, int K, double constant,
                                   double delta) {
    require(sigma_noise >= 0.0 && d > 0 && n > 0 && K > 0, ErrorKind::Parameter,
            "classify_noise_regime: parameters must be positive");
    RegimeReport r;
    r.constant = constant;
    r.delta = delta;
    r.sigma_sqrt_d = sigma_noise * std::sqrt(static_cast<double>(d));
    const double s2d = r.sigma_sqrt_d * r.sigma_sqrt_d;
    if (r.sigma_sqrt_d <= 1.0) {
        r.regime = NoiseRegime::BelowBoundary;
        r.lower = 2.0 * K - constant * std::sqrt(std::log(1.0 / delta) / n);
        r.upper = 2.0 * K + constant * s2d;
    } else {
        r.regime = NoiseRegime::AboveBoundary;
        r.lower = std::min(2.0 * K + constant * s2d, static_cast<double>(n));
        r.upper = std::numeric_limits<double>::infinity();
    }
    return r;
}

const char* to_string(NoiseRegime r) {
    return r == NoiseRegime::BelowBoundary ? "below-boundary" : "above-boundary";
}

}  // namespace rankscope
