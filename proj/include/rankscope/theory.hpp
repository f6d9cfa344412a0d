#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rankscope/datamodel.hpp"

namespace rankscope::theory {

/// Scalar recursions x <- x + c1 exp(-c2 x) (Exp) or x <- x + eta C_t x^(q-1) (Power).
struct SequenceSpec {
    enum class Family { Exp, Power } family = Family::Power;
    double x0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double eta = 0.0;
    int q = 3;
    // C_t for the power family. A single entry is a constant schedule; otherwise
    // entry t is used at step t and the last entry repeats.
    std::vector<double> rates;
    long horizon = 0;

    double rate(long t) const;
    double rate_min() const;
    double rate_max() const;
    void validate() const;

    static SequenceSpec exp(double c1, double c2, double x0, long horizon);
    static SequenceSpec power(double x0, double eta, int q, std::vector<double> rates, long horizon);
};

/// x_0 .. x_T. Throws ErrorKind::Parameter (horizon too large) on overflow.
std::vector<double> iterate_sequence(const SequenceSpec& spec);

struct SandwichReport {
    double max_violation = 0.0;
    long worst_step = 0;
};

SandwichReport check_exp_sandwich(const SequenceSpec& spec);

struct FirstPassageReport {
    long passage = 0;  // first t with x_t >= v
    double lower = 0.0;
    double upper = 0.0;
    double violation = 0.0;  // positive part of lower - T_v and T_v - upper
    // Per-level bounds summed over g = 1..g* before the geometric series is
    // closed; these do not depend on v being far from x0.
    int levels = 0;  // g*, smallest g with (1+zeta)^g x0 >= v
    double lower_stepwise = 0.0;
    double upper_stepwise = 0.0;
    double stepwise_violation = 0.0;
};

/// Throws ErrorKind::Parameter for v <= x0 or zeta <= 0, and when v is not
/// reached within the horizon.
FirstPassageReport check_first_passage(const SequenceSpec& spec, double v, double zeta);

struct TensorPowerReport {
    int k = 0;
    std::vector<long> crossings;  // T_g for g = 0..k
    double partial_sum = 0.0;     // sum of eta C_t over t in [0, T_k)
    double upper = 0.0;
    double lower = 0.0;
    double violation = 0.0;
};

TensorPowerReport check_tensor_power_sums(const SequenceSpec& spec, int k, double zeta);

struct CompareReport {
    double c = 0.0;  // x0/y0 - 1
    bool preconditions_hold = false;
    std::string precondition_detail;
    long t_x = 0;
    long t_y = 0;
    bool ordered = false;  // t_x <= t_y
};

/// Both sequences share the schedule in `spec` (its x0 is ignored).
CompareReport check_sequence_compare(double x0, double y0, const SequenceSpec& spec, double a_x,
                                     double a_y);

struct CountBandReport {
    int trials = 0;
    double label_band = 0.0;
    double count_band = 0.0;
    double label_coverage = 0.0;
    double count_coverage = 0.0;
    double required = 0.0;  // 1 - 2 delta
    bool asserted = false;  // false when the band is vacuous
    bool holds = true;
};

/// Resamples `trials` datasets with the generating parameters of `data`.
CountBandReport check_count_bands(const PatchedDataset& data, const BasisSystem& basis,
                                  double delta, int trials);

struct LemmaResult {
    std::string name;
    bool passed = true;
    int instances = 0;
    int violations = 0;
    double max_violation = 0.0;
    double slack = 0.0;
    std::string detail;
};

struct SuiteOptions {
    double slack = 1e-9;
    int compare_instances = 50;
    int union_instances = 50;
    int power_seeds = 20;
    long exp_horizon = 100000;
    std::uint64_t seed = 7;
    // Per-lemma slack override; a negative slack forces that lemma to fail.
    std::map<std::string, double> slack_override;
};

struct SuiteReport {
    std::vector<LemmaResult> lemmas;
    bool passed() const;
};

/// Lemma names: exp_sandwich, first_passage, tensor_power_sums,
/// sequence_compare, count_bands, spectrum_union.
SuiteReport run_lemma_suite(const SuiteOptions& options = {});

}  // namespace rankscope::theory
