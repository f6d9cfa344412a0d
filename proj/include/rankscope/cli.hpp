#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rankscope/config.hpp"
#include "rankscope/error.hpp"
#include "rankscope/ingestion.hpp"
#include "rankscope/network.hpp"
#include "rankscope/spectral.hpp"
#include "rankscope/trainer.hpp"

namespace rankscope::cli {

enum ExitCode : int {
    kOk = 0,
    kOther = 1,
    kValidation = 2,
    kIo = 3,
    kDivergence = 4,
    kLemmaViolation = 5,
};

int exit_code_for(ErrorKind kind);

/// Images after class selection and PCA, shared by every run of an MNIST sweep.
ImageSet prepare_mnist_images(const MnistSection& mnist);
/// Pads the reduced images with noise and cuts them into patches.
PatchedDataset mnist_dataset(const ImageSet& reduced, const MnistSection& mnist, double sigma_noise,
                             std::uint64_t seed);

/// Builds the dataset of run (sigma_index, repeat). `mnist_images` must be set
/// for MNIST configs.
PatchedDataset build_dataset(const ExperimentConfig& config, int sigma_index, int repeat,
                             const ImageSet* mnist_images = nullptr);
/// Basis the dataset was drawn from; empty (K = 0) for external data.
BasisSystem dataset_basis(const PatchedDataset& data);

struct RunOutcome {
    double sigma_noise = 0.0;
    int sigma_index = 0;
    int repeat = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    int exit_code = kOk;
    std::string error;
    SpectrumReport data_spectrum;
    SpectrumReport filter_spectrum;
    long final_step = 0;
    double final_loss = 0.0;
    bool stopped_early = false;
    TrainTrace trace;
    CnnParams params;
    CnnParams initial;
    double wall_seconds = 0.0;
};

/// Trains on `data` and writes trace.csv, checkpoint.bin and manifest.json
/// into `dir`. With `resume`, training restarts from that checkpoint and the
/// rows already in dir/trace.csv before its step are kept.
RunOutcome train_run(const ExperimentConfig& config, const PatchedDataset& data,
                     const std::filesystem::path& dir, const std::filesystem::path& resume = {});

struct SweepResult {
    std::vector<RunOutcome> runs;  // sigma-major, then repeat
    bool all_ok() const;
};

/// One run per (sigma, repeat) under `out`/run_<sigma index>_<repeat>, plus
/// out/sweep.csv. Failed runs are recorded and the sweep continues.
SweepResult run_sweep(const ExperimentConfig& config, const std::filesystem::path& out, int jobs);

std::string sweep_csv(const SweepResult& result);

/// Entry point of the command-line tool; returns the process exit code.
int run(int argc, char** argv);

}  // namespace rankscope::cli
