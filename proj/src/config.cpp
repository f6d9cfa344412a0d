#include "rankscope/config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "rankscope/error.hpp"
#include "rankscope/serialize.hpp"

namespace rankscope {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        require(j_.is_object(), ErrorKind::Validation, where() + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    T get(const std::string& key) {
        require(has(key), ErrorKind::Validation, "missing required field '" + qualified(key) + "'");
        return convert<T>(key);
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        return has(key) ? convert<T>(key) : fallback;
    }

    Section child(const std::string& key) {
        require(has(key), ErrorKind::Validation, "missing required field '" + qualified(key) + "'");
        seen_.insert(key);
        return Section(j_.at(key), qualified(key));
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            require(seen_.count(key) == 1, ErrorKind::Validation, "unknown key '" + qualified(key) + "'");
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    template <class T>
    T convert(const std::string& key) {
        seen_.insert(key);
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            fail(ErrorKind::Validation, "field '" + qualified(key) + "' has the wrong type");
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void check(bool ok, const std::string& msg) { require(ok, ErrorKind::Validation, msg); }

PatchLayout layout_from_string(const std::string& s) {
    if (s == "grid") return PatchLayout::Grid;
    if (s == "center-ring") return PatchLayout::CenterRing;
    fail(ErrorKind::Validation, "mnist.layout must be 'grid' or 'center-ring', got '" + s + "'");
}

const char* layout_name(PatchLayout l) { return l == PatchLayout::Grid ? "grid" : "center-ring"; }

}  // namespace

TrainConfig ExperimentConfig::train_config(std::uint64_t seed_for_run) const {
    TrainConfig c;
    c.eta = train.eta;
    c.sigma0 = model.sigma0;
    c.steps = train.steps;
    c.log_subdivisions = train.log_subdivisions;
    c.seed = seed_for_run;
    c.target_loss = train.target_loss;
    c.n_test = train.n_test;
    c.threshold_ratio = train.threshold_ratio;
    return c;
}

void ExperimentConfig::validate() const {
    check(data.source == "synthetic" || data.source == "mnist",
          "data.source must be 'synthetic' or 'mnist'");
    check(!data.sigma_grid.empty(), "data.sigma_noise must be a nonempty list");
    for (double s : data.sigma_grid) check(s >= 0.0 && std::isfinite(s), "data.sigma_noise entries must be >= 0");
    check(model.m >= 1, "model.m must be positive");
    check(model.q >= 3, "model.q must be at least 3");
    check(model.kappa > 0.0, "model.kappa must be positive");
    check(repeats >= 1, "repeats must be positive");
    if (is_mnist()) {
        check(mnist.has_value(), "missing required field 'mnist' for data.source 'mnist'");
        check(mnist->classes.size() == 2 && mnist->classes[0] != mnist->classes[1],
              "mnist.classes must name two distinct digits");
        for (int c : mnist->classes) check(c >= 0 && c <= 9, "mnist.classes entries must lie in 0..9");
        check(mnist->pca_rank >= 1 && mnist->pca_rank <= 784, "mnist.pca_rank must lie in [1, 784]");
        check(mnist->pad >= 0, "mnist.pad must be non-negative");
        check(mnist->limit >= 0, "mnist.limit must be non-negative");
        check(train.n_test == 0, "train.n_test requires synthetic data");
    } else {
        check(data.K >= 1, "data.K must be positive");
        check(data.d >= 2 * data.K, "data.d must be at least 2K");
        check(data.P >= 2, "data.P must be at least 2");
        check(data.n >= 1, "data.n must be positive");
        if (data.policy.kind == ObjectSetPolicy::Kind::FixedSize)
            check(data.policy.size >= 1 && data.policy.size <= data.P - 1,
                  "data.object_set.size must lie in [1, P-1]");
        check(data.basis != BasisMode::External, "data.basis 'external' is only produced by mnist-prep");
        check(model.m >= data.K, "model.m must be at least K");
    }
    try {
        train_config(seed).validate();
    } catch (const Error& e) {
        fail(ErrorKind::Validation, std::string("train: ") + e.what());
    }
}

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    Section root(j, "");
    c.seed = root.get<std::uint64_t>("seed", 0);
    c.repeats = root.get<int>("repeats", 1);
    c.out = root.get<std::string>("out", "");

    {
        Section s = root.child("data");
        c.data.source = s.get<std::string>("source", "synthetic");
        const bool synthetic = c.data.source != "mnist";
        c.data.sigma_grid = s.get<std::vector<double>>("sigma_noise");
        if (synthetic) {
            c.data.d = s.get<int>("d");
            c.data.K = s.get<int>("K");
            c.data.n = s.get<int>("n");
        }
        c.data.P = s.get<int>("P", 3);
        if (s.has("object_set")) {
            Section o = s.child("object_set");
            const std::string kind = o.get<std::string>("kind", "fixed");
            check(kind == "fixed" || kind == "uniform-proper",
                  "data.object_set.kind must be 'fixed' or 'uniform-proper'");
            c.data.policy.kind = kind == "fixed" ? ObjectSetPolicy::Kind::FixedSize
                                                 : ObjectSetPolicy::Kind::UniformProper;
            c.data.policy.size = o.get<int>("size", 1);
            o.finish();
        }
        try {
            c.data.basis = basis_mode_from_string(s.get<std::string>("basis", "one-hot"));
        } catch (const Error& e) {
            fail(ErrorKind::Validation, std::string("data.basis: ") + e.what());
        }
        c.data.basis_seed = s.get<std::uint64_t>("basis_seed", 0);
        s.finish();
    }
    {
        Section s = root.child("model");
        c.model.m = s.get<int>("m");
        c.model.q = s.get<int>("q", 3);
        c.model.kappa = s.get<double>("kappa", 1.0);
        c.model.sigma0 = s.get<double>("sigma0");
        s.finish();
    }
    {
        Section s = root.child("train");
        c.train.eta = s.get<double>("eta");
        c.train.steps = s.get<long>("steps");
        if (s.has("target_loss")) c.train.target_loss = s.get<double>("target_loss");
        c.train.log_subdivisions = s.get<int>("log_subdivisions", 0);
        c.train.n_test = s.get<int>("n_test", 0);
        c.train.threshold_ratio = s.get<double>("threshold_ratio", kDefaultThresholdRatio);
        s.finish();
    }
    if (root.has("mnist")) {
        Section s = root.child("mnist");
        MnistSection m;
        m.dir = s.get<std::string>("dir", "");
        m.classes = s.get<std::vector<int>>("classes", m.classes);
        m.limit = s.get<int>("limit", 0);
        m.pca_rank = s.get<int>("pca_rank");
        m.center = s.get<bool>("center", false);
        m.pad = s.get<int>("pad", 14);
        m.patches.layout = layout_from_string(s.get<std::string>("layout", "center-ring"));
        if (s.has("grid")) {
            const auto g = s.get<std::vector<int>>("grid");
            check(g.size() == 2 && g[0] >= 1 && g[1] >= 1, "mnist.grid must be [rows, cols]");
            m.patches.grid_rows = g[0];
            m.patches.grid_cols = g[1];
        }
        m.patches.pad = m.pad;
        s.finish();
        c.mnist = m;
    }
    if (root.has("theory")) {
        Section s = root.child("theory");
        c.theory.slack = s.get<double>("slack", c.theory.slack);
        c.theory.compare_instances = s.get<int>("compare_instances", c.theory.compare_instances);
        c.theory.union_instances = s.get<int>("union_instances", c.theory.union_instances);
        c.theory.power_seeds = s.get<int>("power_seeds", c.theory.power_seeds);
        c.theory.exp_horizon = s.get<long>("exp_horizon", c.theory.exp_horizon);
        c.theory.seed = s.get<std::uint64_t>("seed", c.theory.seed);
        s.finish();
        check(c.theory.slack >= 0.0, "theory.slack must be non-negative");
    }
    root.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    return parse_config(read_text_file(file));
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["repeats"] = c.repeats;
    j["out"] = c.out;
    json data;
    data["source"] = c.data.source;
    data["sigma_noise"] = c.data.sigma_grid;
    data["P"] = c.data.P;
    if (!c.is_mnist()) {
        data["d"] = c.data.d;
        data["K"] = c.data.K;
        data["n"] = c.data.n;
        data["basis"] = to_string(c.data.basis);
        data["basis_seed"] = c.data.basis_seed;
        data["object_set"] = {{"kind", c.data.policy.kind == ObjectSetPolicy::Kind::FixedSize ? "fixed"
                                                                                             : "uniform-proper"},
                              {"size", c.data.policy.size}};
    }
    j["data"] = data;
    j["model"] = {{"m", c.model.m}, {"q", c.model.q}, {"kappa", c.model.kappa}, {"sigma0", c.model.sigma0}};
    json train = {{"eta", c.train.eta},
                  {"steps", c.train.steps},
                  {"log_subdivisions", c.train.log_subdivisions},
                  {"n_test", c.train.n_test},
                  {"threshold_ratio", c.train.threshold_ratio}};
    if (c.train.target_loss) train["target_loss"] = *c.train.target_loss;
    j["train"] = train;
    if (c.mnist) {
        const MnistSection& m = *c.mnist;
        j["mnist"] = {{"dir", m.dir},
                      {"classes", m.classes},
                      {"limit", m.limit},
                      {"pca_rank", m.pca_rank},
                      {"center", m.center},
                      {"pad", m.pad},
                      {"layout", layout_name(m.patches.layout)},
                      {"grid", {m.patches.grid_rows, m.patches.grid_cols}}};
    }
    return j.dump(1);
}

std::uint64_t run_seed(const ExperimentConfig& c, int sigma_index, int repeat) {
    return c.seed + static_cast<std::uint64_t>(sigma_index) * static_cast<std::uint64_t>(c.repeats) +
           static_cast<std::uint64_t>(repeat);
}

}  // namespace rankscope
