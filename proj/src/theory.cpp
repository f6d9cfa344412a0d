#include "rankscope/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rankscope/error.hpp"
#include "rankscope/random.hpp"
#include "rankscope/spectral.hpp"

namespace rankscope::theory {

double SequenceSpec::rate(long t) const {
    if (rates.empty()) return 0.0;
    const auto i = static_cast<std::size_t>(std::max(0L, t));
    return i < rates.size() ? rates[i] : rates.back();
}

double SequenceSpec::rate_min() const {
    return rates.empty() ? 0.0 : *std::min_element(rates.begin(), rates.end());
}

double SequenceSpec::rate_max() const {
    return rates.empty() ? 0.0 : *std::max_element(rates.begin(), rates.end());
}

void SequenceSpec::validate() const {
    require(horizon >= 0, ErrorKind::Parameter, "sequence horizon must be non-negative");
    if (family == Family::Exp) {
        require(c1 > 0.0 && c2 > 0.0, ErrorKind::Parameter, "exp sequence needs c1, c2 > 0");
        require(x0 >= 0.0, ErrorKind::Parameter, "exp sequence needs x0 >= 0");
    } else {
        require(x0 > 0.0, ErrorKind::Parameter, "power sequence needs x0 > 0");
        require(q >= 3, ErrorKind::Parameter, "power sequence needs q >= 3");
        require(eta >= 0.0, ErrorKind::Parameter, "power sequence needs eta >= 0");
        require(!rates.empty(), ErrorKind::Parameter, "power sequence needs a rate schedule");
        require(rate_min() >= 0.0, ErrorKind::Parameter, "rates must be non-negative");
    }
}

SequenceSpec SequenceSpec::exp(double c1, double c2, double x0, long horizon) {
    SequenceSpec s;
    s.family = Family::Exp;
    s.c1 = c1;
    s.c2 = c2;
    s.x0 = x0;
    s.horizon = horizon;
    return s;
}

SequenceSpec SequenceSpec::power(double x0, double eta, int q, std::vector<double> rates,
                                 long horizon) {
    SequenceSpec s;
    s.family = Family::Power;
    s.x0 = x0;
    s.eta = eta;
    s.q = q;
    s.rates = std::move(rates);
    s.horizon = horizon;
    return s;
}

namespace {

inline double step(const SequenceSpec& s, double x, long t) {
    if (s.family == SequenceSpec::Family::Exp) return x + s.c1 * std::exp(-s.c2 * x);
    return x + s.eta * s.rate(t) * std::pow(x, s.q - 1);
}

// First t <= horizon with x_t >= level; -1 if never.
long first_reach(const SequenceSpec& s, double level) {
    double x = s.x0;
    for (long t = 0; t <= s.horizon; ++t) {
        if (x >= level) return t;
        x = step(s, x, t);
        if (!std::isfinite(x)) return t + 1;
    }
    return -1;
}

}  // namespace

std::vector<double> iterate_sequence(const SequenceSpec& spec) {
    spec.validate();
    std::vector<double> xs;
    xs.reserve(static_cast<std::size_t>(spec.horizon) + 1);
    double x = spec.x0;
    xs.push_back(x);
    for (long t = 0; t < spec.horizon; ++t) {
        x = step(spec, x, t);
        require(std::isfinite(x), ErrorKind::Parameter,
                "iterate_sequence: overflow at step " + std::to_string(t + 1) + ", horizon too large");
        xs.push_back(x);
    }
    return xs;
}

SandwichReport check_exp_sandwich(const SequenceSpec& spec) {
    require(spec.family == SequenceSpec::Family::Exp, ErrorKind::Parameter,
            "check_exp_sandwich: exp family required");
    const std::vector<double> xs = iterate_sequence(spec);
    const double e0 = std::exp(spec.c2 * spec.x0);
    const double head = spec.c1 * std::exp(-spec.c2 * spec.x0);
    SandwichReport rep;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const double lg = std::log(spec.c1 * spec.c2 * static_cast<double>(t) + e0) / spec.c2;
        const double v = std::max(lg - xs[t], xs[t] - (head + lg));
        if (v > rep.max_violation) {
            rep.max_violation = v;
            rep.worst_step = static_cast<long>(t);
        }
    }
    return rep;
}

FirstPassageReport check_first_passage(const SequenceSpec& spec, double v, double zeta) {
    require(spec.family == SequenceSpec::Family::Power, ErrorKind::Parameter,
            "check_first_passage: power family required");
    spec.validate();
    require(v > spec.x0, ErrorKind::Parameter, "check_first_passage: target must exceed x0");
    require(zeta > 0.0, ErrorKind::Parameter, "check_first_passage: zeta must be positive");
    const double c1 = spec.rate_min();
    const double c2 = spec.rate_max();
    require(c1 > 0.0 && spec.eta > 0.0, ErrorKind::Parameter,
            "check_first_passage: rates and eta must be positive");

    FirstPassageReport rep;
    rep.passage = first_reach(spec, v);
    require(rep.passage >= 0, ErrorKind::Parameter,
            "check_first_passage: target not reached within the horizon");
    const int q = spec.q;
    const double xq2 = std::pow(spec.x0, q - 2);
    const double logv = std::log(v / spec.x0);
    rep.upper = (1.0 + zeta) / (spec.eta * c1 * xq2) + std::pow(1.0 + zeta, q - 1) * c2 * logv / c1;
    rep.lower = 1.0 / (std::pow(1.0 + zeta, q - 1) * spec.eta * c2 * xq2) -
                logv / std::pow(1.0 + zeta, q - 2);
    const double t = static_cast<double>(rep.passage);
    rep.violation = std::max({0.0, rep.lower - t, t - rep.upper});

    int g_star = static_cast<int>(std::ceil(logv / std::log1p(zeta)));
    while (g_star > 1 && std::pow(1.0 + zeta, g_star - 1) * spec.x0 >= v) --g_star;
    while (std::pow(1.0 + zeta, g_star) * spec.x0 < v) ++g_star;
    rep.levels = g_star;
    const double a = std::pow(1.0 + zeta, q - 1);
    for (int g = 1; g <= g_star; ++g)
        rep.upper_stepwise +=
            zeta / (spec.eta * c1 * xq2 * std::pow(1.0 + zeta, (g - 1) * (q - 2))) + a * c2 / c1;
    if (g_star >= 2) {
        rep.lower_stepwise = zeta / (spec.eta * c2 * xq2 * a);
        for (int g = 2; g <= g_star - 1; ++g)
            rep.lower_stepwise +=
                zeta / (spec.eta * c2 * xq2 * std::pow(1.0 + zeta, g * (q - 2) + 1)) - 1.0 / a;
    }
    rep.stepwise_violation = std::max({0.0, rep.lower_stepwise - t, t - rep.upper_stepwise});
    return rep;
}

TensorPowerReport check_tensor_power_sums(const SequenceSpec& spec, int k, double zeta) {
    require(spec.family == SequenceSpec::Family::Power, ErrorKind::Parameter,
            "check_tensor_power_sums: power family required");
    spec.validate();
    require(k >= 0, ErrorKind::Parameter, "check_tensor_power_sums: k must be non-negative");
    require(zeta > 0.0 && zeta < 1.0, ErrorKind::Parameter,
            "check_tensor_power_sums: zeta must lie in (0, 1)");

    TensorPowerReport rep;
    rep.k = k;
    rep.crossings.assign(static_cast<std::size_t>(k) + 1, 0);
    double x = spec.x0;
    int g = 1;
    double level = spec.x0 * (1.0 + zeta);
    long t = 0;
    while (g <= k) {
        if (x >= level) {
            rep.crossings[static_cast<std::size_t>(g)] = t;
            ++g;
            level = spec.x0 * std::pow(1.0 + zeta, g);
            continue;
        }
        require(t < spec.horizon, ErrorKind::Parameter,
                "check_tensor_power_sums: level not reached within the horizon");
        x = step(spec, x, t);
        ++t;
    }
    const long tk = rep.crossings.back();
    for (long s = 0; s < tk; ++s) rep.partial_sum += spec.eta * spec.rate(s);

    const int q = spec.q;
    const double r = std::pow(1.0 + zeta, q - 2);
    const double geometric = (1.0 - std::pow(r, -k)) / (1.0 - 1.0 / r);
    const double xq2 = std::pow(spec.x0, q - 2);
    const double a = std::pow(1.0 + zeta, q - 1);

    double up_tail = 0.0;
    for (int h = 0; h < k; ++h) up_tail += spec.rate(rep.crossings[static_cast<std::size_t>(h) + 1] - 1);
    rep.upper = zeta / xq2 * geometric + spec.eta * (a * up_tail + spec.rate(tk));

    double lo_tail = 0.0;
    for (int h = 1; h < k; ++h) lo_tail += spec.rate(rep.crossings[static_cast<std::size_t>(h)] - 1);
    rep.lower = zeta / (xq2 * a) * geometric - spec.eta / a * lo_tail;

    rep.violation = std::max({0.0, rep.partial_sum - rep.upper, rep.lower - rep.partial_sum});
    return rep;
}

CompareReport check_sequence_compare(double x0, double y0, const SequenceSpec& spec, double a_x,
                                     double a_y) {
    require(spec.family == SequenceSpec::Family::Power, ErrorKind::Parameter,
            "check_sequence_compare: power family required");
    require(x0 > 0.0 && y0 > 0.0 && a_x > 0.0 && a_y > 0.0, ErrorKind::Parameter,
            "check_sequence_compare: starting points and targets must be positive");
    CompareReport rep;
    rep.c = x0 / y0 - 1.0;
    const double cbar = spec.rate_max();
    const double eta_cap = rep.c / (cbar * std::pow(y0, spec.q - 3) * a_y);
    std::ostringstream why;
    bool ok = rep.c > 0.0;
    if (!ok) why << "x0/y0 - 1 = " << rep.c << " is not positive; ";
    if (spec.eta > eta_cap) {
        ok = false;
        why << "eta " << spec.eta << " exceeds c/(Cbar y0^(q-3) A_y) = " << eta_cap << "; ";
    }
    if (y0 / a_y > rep.c) {
        ok = false;
        why << "y0/A_y = " << y0 / a_y << " exceeds c; ";
    }
    rep.preconditions_hold = ok;
    rep.precondition_detail = why.str();

    SequenceSpec sx = spec;
    sx.x0 = x0;
    SequenceSpec sy = spec;
    sy.x0 = y0;
    rep.t_x = first_reach(sx, a_x);
    rep.t_y = first_reach(sy, a_y);
    require(rep.t_x >= 0 && rep.t_y >= 0, ErrorKind::Parameter,
            "check_sequence_compare: a target is not reached within the horizon");
    rep.ordered = rep.t_x <= rep.t_y;
    return rep;
}

CountBandReport check_count_bands(const PatchedDataset& data, const BasisSystem& basis,
                                  double delta, int trials) {
    require(trials >= 1, ErrorKind::Parameter, "check_count_bands: trials must be positive");
    require(delta > 0.0 && delta <= 1.0, ErrorKind::Parameter, "check_count_bands: delta must lie in (0, 1]");
    CountBandReport rep;
    rep.trials = trials;
    const double n = data.n;
    rep.label_band = std::sqrt(n * std::log(2.0 / delta) / 2.0);
    rep.count_band = std::sqrt(n * std::log(2.0 / delta));
    rep.required = 1.0 - 2.0 * delta;
    rep.asserted = rep.required > 0.0;
    const double mean_s = data.policy.kind == ObjectSetPolicy::Kind::FixedSize
                              ? static_cast<double>(data.policy.size)
                              : data.P / 2.0;
    const double expected = n * mean_s / (2.0 * data.K);

    int label_ok = 0;
    int count_ok = 0;
    int count_total = 0;
    for (int t = 0; t < trials; ++t) {
        // Noise patches do not enter the counts.
        const PatchedDataset ds = sample_dataset(basis, data.n, data.P, data.policy, 0.0,
                                                 data.seed + static_cast<std::uint64_t>(t));
        const auto pos = std::count(ds.labels.begin(), ds.labels.end(), 1);
        if (std::abs(static_cast<double>(pos) - n / 2.0) <= rep.label_band) ++label_ok;
        for (int c : basis_counts(ds)) {
            ++count_total;
            if (std::abs(c - expected) <= rep.count_band) ++count_ok;
        }
    }
    rep.label_coverage = static_cast<double>(label_ok) / trials;
    rep.count_coverage = static_cast<double>(count_ok) / count_total;
    rep.holds = !rep.asserted ||
                (rep.label_coverage >= rep.required && rep.count_coverage >= rep.required);
    return rep;
}

bool SuiteReport::passed() const {
    return std::all_of(lemmas.begin(), lemmas.end(), [](const LemmaResult& l) { return l.passed; });
}

namespace {

double slack_for(const SuiteOptions& o, const std::string& name) {
    auto it = o.slack_override.find(name);
    return it == o.slack_override.end() ? o.slack : it->second;
}

void record(LemmaResult& res, double violation) {
    ++res.instances;
    res.max_violation = std::max(res.max_violation, violation);
    if (violation > res.slack) ++res.violations;
}

std::vector<double> random_rates(std::mt19937_64& rng, double lo, double hi, long n) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> r(static_cast<std::size_t>(n));
    for (auto& v : r) v = u(rng);
    return r;
}

}  // namespace

SuiteReport run_lemma_suite(const SuiteOptions& o) {
    SuiteReport suite;
    auto rng = make_rng(o.seed, Stream::Data);

    {
        LemmaResult res;
        res.name = "exp_sandwich";
        res.slack = slack_for(o, res.name);
        const double params[3][3] = {{1.0, 1.0, 0.0}, {0.5, 2.0, 3.0}, {2.0, 0.5, 1.0}};
        for (const auto& p : params)
            record(res, check_exp_sandwich(SequenceSpec::exp(p[0], p[1], p[2], o.exp_horizon)).max_violation);
        suite.lemmas.push_back(res);
    }
    {
        LemmaResult res;
        res.name = "first_passage";
        LemmaResult stepwise;
        stepwise.name = "first_passage_stepwise";
        res.slack = slack_for(o, res.name);
        stepwise.slack = slack_for(o, stepwise.name);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int i = 0; i < o.power_seeds; ++i) {
            const int q = 3 + i % 3;
            const double x0 = 0.1 + 0.4 * u01(rng);
            const double eta = 1e-2 * std::pow(10.0, u01(rng));
            const double c1 = 0.5 + u01(rng);
            const double c2 = (i % 4 == 0) ? c1 : c1 * (1.0 + 2.0 * u01(rng));
            const double zeta = std::pow(10.0, -2.0 + 2.3 * u01(rng));
            const double v = x0 * std::pow(10.0, 0.04 + 1.96 * u01(rng));
            auto spec = SequenceSpec::power(x0, eta, q,
                                            c1 == c2 ? std::vector<double>{c1}
                                                     : random_rates(rng, c1, c2, 2000000),
                                            2000000);
            if (c1 != c2) {
                spec.rates.front() = c1;
                spec.rates.back() = c2;
            }
            const auto rep = check_first_passage(spec, v, zeta);
            record(res, rep.violation);
            record(stepwise, rep.stepwise_violation);
        }
        suite.lemmas.push_back(res);
        suite.lemmas.push_back(stepwise);
    }
    {
        LemmaResult res;
        res.name = "tensor_power_sums";
        res.slack = slack_for(o, res.name);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int i = 0; i < o.power_seeds; ++i) {
            const int q = 3 + i % 2;
            const double x0 = 0.05 + 0.5 * u01(rng);
            const double eta = 1e-3 + 0.05 * u01(rng);
            const double zeta = 0.05 + 0.9 * u01(rng);
            const int k = 1 + static_cast<int>(8 * u01(rng));
            auto spec = SequenceSpec::power(x0, eta, q, random_rates(rng, 0.5, 2.0, 200000), 200000);
            record(res, check_tensor_power_sums(spec, k, zeta).violation);
        }
        suite.lemmas.push_back(res);
    }
    {
        LemmaResult res;
        res.name = "sequence_compare";
        res.slack = slack_for(o, res.name);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        int skipped = 0;
        while (res.instances < o.compare_instances) {
            const int q = 3 + static_cast<int>(2 * u01(rng));
            const double y0 = 0.01 + 0.09 * u01(rng);
            const double c = 0.05 + 0.95 * u01(rng);
            const double x0 = y0 * (1.0 + c);
            const double a_y = y0 * (1.0 / c) * (1.0 + 10.0 * u01(rng));
            const double a_x = a_y * std::pow(10.0, 2.0 * u01(rng) - 1.0);
            const double cbar = 2.0;
            const double eta = c / (cbar * std::pow(y0, q - 3) * a_y) * (0.01 + 0.99 * u01(rng));
            auto spec = SequenceSpec::power(y0, eta, q, random_rates(rng, 0.5, cbar, 400000), 400000);
            const CompareReport rep = check_sequence_compare(x0, y0, spec, a_x, a_y);
            if (!rep.preconditions_hold) {
                ++skipped;
                continue;
            }
            record(res, rep.ordered ? 0.0 : static_cast<double>(rep.t_x - rep.t_y));
        }
        res.detail = std::to_string(skipped) + " drawn instances failed the preconditions";
        suite.lemmas.push_back(res);
    }
    {
        LemmaResult res;
        res.name = "count_bands";
        res.slack = slack_for(o, res.name);
        const BasisSystem basis = make_basis(20, 10, BasisMode::OneHot, 0);
        const PatchedDataset templ = sample_dataset(basis, 1000, 3, {}, 0.0, o.seed);
        const CountBandReport rep = check_count_bands(templ, basis, 0.05, 200);
        const double shortfall =
            std::max(0.0, rep.required - std::min(rep.label_coverage, rep.count_coverage));
        record(res, shortfall);
        std::ostringstream os;
        os << "label coverage " << rep.label_coverage << ", count coverage " << rep.count_coverage;
        res.detail = os.str();
        suite.lemmas.push_back(res);
    }
    {
        LemmaResult res;
        res.name = "spectrum_union";
        res.slack = slack_for(o, res.name);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_int_distribution<int> dims(1, 6);
        for (int i = 0; i < o.union_instances; ++i) {
            const int d = 16;
            const int ka = dims(rng);
            const int kb = dims(rng);
            Eigen::MatrixXd g(d, d);
            for (Eigen::Index r = 0; r < d; ++r)
                for (Eigen::Index c = 0; c < d; ++c) g(r, c) = normal(rng);
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
            const Eigen::MatrixXd Q = qr.householderQ();
            const int pa = 1 + dims(rng);
            const int pb = 1 + dims(rng);
            Eigen::MatrixXd ca(ka, pa), cb(kb, pb);
            for (Eigen::Index r = 0; r < ka; ++r)
                for (Eigen::Index c = 0; c < pa; ++c) ca(r, c) = normal(rng);
            for (Eigen::Index r = 0; r < kb; ++r)
                for (Eigen::Index c = 0; c < pb; ++c) cb(r, c) = normal(rng);
            const Eigen::MatrixXd A = Q.leftCols(ka) * ca;
            const Eigen::MatrixXd B = Q.middleCols(ka, kb) * cb;
            Eigen::MatrixXd C(d, pa + pb);
            C << A, B;
            const double scale = singular_values(C).front();
            // deviation beyond 1e-8 ||[A B]||_2
            record(res, std::max(0.0, spectrum_union_check(A, B) / scale - 1e-8));
        }
        suite.lemmas.push_back(res);
    }
    for (auto& l : suite.lemmas) l.passed = l.violations == 0;
    return suite;
}

}  // namespace rankscope::theory
