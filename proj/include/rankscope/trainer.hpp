#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rankscope/datamodel.hpp"
#include "rankscope/network.hpp"

namespace rankscope {

struct TrainConfig {
    double eta = 0.0;
    double sigma0 = 0.0;
    long steps = 0;
    // Logged steps. Empty means geometric_schedule(steps, log_subdivisions).
    std::vector<long> log_schedule;
    int log_subdivisions = 0;
    std::uint64_t seed = 0;
    std::optional<double> target_loss;
    int n_test = 0;  // 0 disables the population-loss estimate
    double threshold_ratio = 0.01;

    void validate() const;
};

/// {0} together with every t <= T of the form b * 2^a, 2^s <= b < 2^(s+1), where
/// s = subdivisions, plus all t <= 2^s, plus T itself. The set is closed under
/// doubling below T. s = 0 gives {0, 1, 2, 4, 8, ...}.
std::vector<long> geometric_schedule(long T, int subdivisions = 0);

struct TraceRow {
    long step = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;  // NaN when not estimated
    double test_stderr = 0.0;
    double filter_stable_rank = 0.0;
    int filter_threshold_rank = 0;
    // Indexed by BasisSystem::column(j, k): max_r <w_{j,r}, mu_{j,k}> and its argmax r.
    std::vector<double> max_signal;
    std::vector<int> argmax_filter;
    double noise_projection_plus = 0.0;  // max_r ||P_N (w_{+1,r} - w0)||
    double noise_projection_minus = 0.0;
    double alignment_plus = 0.0;
    double alignment_minus = 0.0;
};

struct TrainTrace {
    int K = 0;
    std::vector<TraceRow> rows;

    const TraceRow* at_step(long step) const;
};

struct TrainResult {
    CnnParams params;
    TrainTrace trace;
    long final_step = 0;
    bool stopped_early = false;
};

/// Every entry i.i.d. N(0, sigma0^2) from the seeded Init stream.
CnnParams init_params(int d, int m, int q, double kappa, double sigma0, std::uint64_t seed);

/// One synchronous full-batch step w <- w - eta * grad. Returns the loss at the
/// parameters before the update.
double gd_step(CnnParams& params, const PatchedDataset& data, double eta);

struct TrainHooks {
    // Called after every logged row has been recorded.
    std::function<void(const CnnParams&, const TraceRow&)> on_log;
};

/// Full-batch gradient descent from `params` (already at `start_step`) for
/// config.steps total steps. `initial` is the step-0 parameter set used for
/// noise projections. `basis` may be null for data without a known basis, in
/// which case signal metrics are left empty. Throws DivergenceError when the
/// loss stops being finite.
TrainResult train(CnnParams params, const CnnParams& initial, const PatchedDataset& data,
                  const BasisSystem* basis, const TrainConfig& config, long start_step = 0,
                  const TrainHooks& hooks = {});

TraceRow measure(const CnnParams& params, const CnnParams& initial, const BasisSystem* basis,
                 long step, double train_loss, double threshold_ratio);

struct Condition1Check {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
    bool borderline = false;
};

struct Condition1Report {
    std::vector<Condition1Check> checks;
    bool all_hold = false;
    std::string summary;
};

/// Advisory check of the large-dimension regime with every hidden constant set to 1.
Condition1Report validate_condition1(long d, long n, long m, double eta, double sigma0,
                                     double sigma_noise);

}  // namespace rankscope
