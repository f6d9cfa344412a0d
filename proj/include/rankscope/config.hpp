#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rankscope/datamodel.hpp"
#include "rankscope/ingestion.hpp"
#include "rankscope/spectral.hpp"
#include "rankscope/theory.hpp"
#include "rankscope/trainer.hpp"

namespace rankscope {

struct DataSection {
    std::string source = "synthetic";  // "synthetic" or "mnist"
    int d = 0;
    int K = 0;
    int P = 3;
    int n = 0;
    ObjectSetPolicy policy;
    std::vector<double> sigma_grid;
    BasisMode basis = BasisMode::OneHot;
    std::uint64_t basis_seed = 0;
};

struct ModelSection {
    int m = 0;
    int q = 3;
    double kappa = 1.0;
    double sigma0 = 0.0;
};

struct TrainSection {
    double eta = 0.0;
    long steps = 0;
    std::optional<double> target_loss;
    int log_subdivisions = 0;
    int n_test = 0;
    double threshold_ratio = kDefaultThresholdRatio;
};

struct MnistSection {
    std::string dir;  // empty: $RANKSCOPE_MNIST_DIR
    std::vector<int> classes{0, 1};
    int limit = 0;  // images kept after class selection, 0 keeps all
    int pca_rank = 0;
    bool center = false;
    int pad = 14;
    PatchSpec patches{PatchLayout::CenterRing, 2, 2, 14};
};

struct ExperimentConfig {
    DataSection data;
    ModelSection model;
    TrainSection train;
    std::optional<MnistSection> mnist;
    theory::SuiteOptions theory;
    std::uint64_t seed = 0;
    int repeats = 1;
    std::string out;

    bool is_mnist() const { return data.source == "mnist"; }
    /// Trainer settings for one run.
    TrainConfig train_config(std::uint64_t run_seed) const;
    void validate() const;
};

/// Parses and validates a JSON config. Unknown keys, missing required fields
/// and violated preconditions raise ErrorKind::Validation naming the key path.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& file);
/// Canonical JSON form (stable key order) used in manifests.
std::string config_to_json(const ExperimentConfig& config);

/// Seed of run (sigma_index, repeat): base seed plus the run's position in
/// sigma-major order.
std::uint64_t run_seed(const ExperimentConfig& config, int sigma_index, int repeat);

}  // namespace rankscope
