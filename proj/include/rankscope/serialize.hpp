#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "rankscope/datamodel.hpp"
#include "rankscope/network.hpp"
#include "rankscope/trainer.hpp"

namespace rankscope {

// Dataset on disk: <dir>/dataset.json (parameters, labels, object sets, basis
// assignments) and <dir>/dataset.bin, the d x nP patch matrix as little-endian
// float64 in column-major order.
void save_dataset(const PatchedDataset& data, const std::filesystem::path& dir);
PatchedDataset load_dataset(const std::filesystem::path& dir);
std::string dataset_manifest(const PatchedDataset& data);

// Checkpoint: one JSON header line terminated by '\n', then the 2m x d filter
// matrix as little-endian float64, class +1 rows first.
struct CheckpointHeader {
    int m = 0;
    int d = 0;
    int q = 3;
    double kappa = 1.0;
    long step = 0;
    std::uint64_t seed = 0;
    double sigma0 = 0.0;
};

void save_checkpoint(const std::filesystem::path& file, const CnnParams& params,
                     const CheckpointHeader& header);
CnnParams load_checkpoint(const std::filesystem::path& file, CheckpointHeader* header = nullptr);

std::string trace_csv_header(int K);
std::string trace_csv_row(const TraceRow& row);
void write_trace_csv(std::ostream& os, const TrainTrace& trace);
void write_trace_csv(const std::filesystem::path& file, const TrainTrace& trace);
TrainTrace read_trace_csv(const std::filesystem::path& file);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

void write_text_file(const std::filesystem::path& file, const std::string& text);
std::string read_text_file(const std::filesystem::path& file);

}  // namespace rankscope
