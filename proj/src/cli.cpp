#include "rankscope/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "rankscope/analysis.hpp"
#include "rankscope/kernels.hpp"
#include "rankscope/serialize.hpp"
#include "rankscope/theory.hpp"

namespace rankscope::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Input:
        case ErrorKind::Parameter:
        case ErrorKind::Validation:
            return kValidation;
        case ErrorKind::Io:
        case ErrorKind::Format:
            return kIo;
        case ErrorKind::Divergence:
            return kDivergence;
        case ErrorKind::Lemma:
            return kLemmaViolation;
        case ErrorKind::Numerical:
            break;
    }
    return kOther;
}

namespace {

std::mutex log_mutex;

void note(const std::string& msg) {
    std::lock_guard<std::mutex> lock(log_mutex);
    std::cerr << msg << '\n';
}

fs::path mnist_dir(const MnistSection& m) {
    if (!m.dir.empty()) return m.dir;
    if (const char* env = std::getenv("RANKSCOPE_MNIST_DIR")) return env;
    fail(ErrorKind::Io, "no MNIST directory: set mnist.dir or RANKSCOPE_MNIST_DIR");
}

json spectrum_json(const SpectrumReport& s) {
    return {{"stable_rank", s.stable_rank},
            {"threshold_rank", s.threshold_rank},
            {"operator_norm", s.operator_norm},
            {"frobenius_norm", s.frobenius_norm}};
}

}  // namespace

ImageSet prepare_mnist_images(const MnistSection& m) {
    const fs::path dir = mnist_dir(m);
    const ImageSet all = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    ImageSet picked = select_classes(all, m.classes, m.limit);
    require(picked.count >= 1, ErrorKind::Input, "no MNIST images with the selected classes");
    picked.pixels = pca_reduce(picked.pixels, m.pca_rank, m.center);
    return picked;
}

PatchedDataset mnist_dataset(const ImageSet& reduced, const MnistSection& m, double sigma_noise,
                             std::uint64_t seed) {
    const ImageSet padded = pad_with_noise(reduced, m.pad, sigma_noise, seed);
    return make_image_dataset(padded, m.patches, m.classes, m.pad, sigma_noise, seed);
}

PatchedDataset build_dataset(const ExperimentConfig& c, int sigma_index, int repeat,
                             const ImageSet* mnist_images) {
    const double sigma = c.data.sigma_grid.at(static_cast<std::size_t>(sigma_index));
    const std::uint64_t seed = run_seed(c, sigma_index, repeat);
    if (c.is_mnist()) {
        require(mnist_images != nullptr, ErrorKind::Input, "build_dataset: MNIST images not loaded");
        return mnist_dataset(*mnist_images, *c.mnist, sigma, seed);
    }
    const BasisSystem basis = make_basis(c.data.d, c.data.K, c.data.basis, c.data.basis_seed);
    return sample_dataset(basis, c.data.n, c.data.P, c.data.policy, sigma, seed);
}

BasisSystem dataset_basis(const PatchedDataset& data) {
    if (data.basis_mode == BasisMode::External || data.K == 0) {
        BasisSystem empty;
        empty.d = data.d;
        empty.mode = BasisMode::External;
        return empty;
    }
    return make_basis(data.d, data.K, data.basis_mode, data.basis_seed);
}

RunOutcome train_run(const ExperimentConfig& c, const PatchedDataset& data, const fs::path& dir,
                     const fs::path& resume) {
    const auto start = std::chrono::steady_clock::now();
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::Io, "cannot create directory " + dir.string());

    RunOutcome out;
    out.sigma_noise = data.sigma_noise;
    out.seed = data.seed;
    const BasisSystem basis = dataset_basis(data);
    const BasisSystem* basis_ptr = basis.K > 0 ? &basis : nullptr;
    const TrainConfig tc = c.train_config(data.seed);

    out.initial = init_params(data.d, c.model.m, c.model.q, c.model.kappa, c.model.sigma0, data.seed);
    CnnParams params = out.initial;
    long start_step = 0;
    TrainTrace kept;
    if (!resume.empty()) {
        CheckpointHeader h;
        params = load_checkpoint(resume, &h);
        require(h.m == c.model.m && h.d == data.d && h.q == c.model.q && h.kappa == c.model.kappa &&
                    h.seed == data.seed && h.sigma0 == c.model.sigma0,
                ErrorKind::Input, "checkpoint " + resume.string() + " does not match the config and dataset");
        start_step = h.step;
        if (fs::exists(dir / "trace.csv")) {
            kept = read_trace_csv(dir / "trace.csv");
            std::erase_if(kept.rows, [&](const TraceRow& r) { return r.step >= start_step; });
        }
    }

    TrainHooks hooks;
    const fs::path ckpt = dir / "checkpoint.bin";
    hooks.on_log = [&](const CnnParams& p, const TraceRow& row) {
        save_checkpoint(ckpt, p, {p.m, p.d, p.q, p.kappa, row.step, data.seed, c.model.sigma0});
    };
    TrainResult res = train(params, out.initial, data, basis_ptr, tc, start_step, hooks);

    TrainTrace trace = std::move(kept);
    trace.K = res.trace.K;
    for (auto& r : res.trace.rows) trace.rows.push_back(std::move(r));
    write_trace_csv(dir / "trace.csv", trace);

    out.data_spectrum = spectrum_report(assemble_data_matrix(data), c.train.threshold_ratio);
    out.filter_spectrum = filter_matrix_spectrum(res.params, c.train.threshold_ratio);
    out.final_step = res.final_step;
    out.final_loss = trace.rows.empty() ? training_loss(res.params, data) : trace.rows.back().train_loss;
    out.stopped_early = res.stopped_early;
    out.trace = std::move(trace);
    out.params = std::move(res.params);
    out.ok = true;
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const Condition1Report cond = validate_condition1(data.d, data.n, c.model.m, c.train.eta, c.model.sigma0,
                                                      data.sigma_noise);
    json m;
    m["config"] = json::parse(config_to_json(c));
    m["seed"] = data.seed;
    m["sigma_noise"] = data.sigma_noise;
    m["kernel"] = kernels::isa_name(kernels::active_isa());
    m["data"] = {{"d", data.d}, {"n", data.n}, {"P", data.P}, {"K", data.K},
                 {"spectrum", spectrum_json(out.data_spectrum)}};
    m["final"] = {{"step", out.final_step},
                  {"train_loss", out.final_loss},
                  {"stopped_early", out.stopped_early},
                  {"filter_spectrum", spectrum_json(out.filter_spectrum)}};
    if (basis_ptr && c.model.m >= basis.K) {
        const AlignmentReport al = alignment_distance(out.params, basis);
        m["final"]["alignment_plus"] = al.plus.distance;
        m["final"]["alignment_minus"] = al.minus.distance;
        m["final"]["matched_rows_distinct"] = al.matched_rows_distinct();
    }
    m["condition1"] = {{"all_hold", cond.all_hold}, {"summary", cond.summary}};
    m["wall_time_seconds"] = out.wall_seconds;
    write_text_file(dir / "manifest.json", m.dump(1) + "\n");
    return out;
}

bool SweepResult::all_ok() const {
    return std::all_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.ok; });
}

std::string sweep_csv(const SweepResult& result) {
    std::ostringstream os;
    os << "sigma_noise,repeat,seed,status,final_step,final_train_loss,data_stable_rank,"
          "data_threshold_rank,filter_stable_rank,filter_threshold_rank\n";
    for (const RunOutcome& r : result.runs) {
        os << format_double(r.sigma_noise) << ',' << r.repeat << ',' << r.seed << ','
           << (r.ok ? "ok" : "failed") << ',';
        if (r.ok)
            os << r.final_step << ',' << format_double(r.final_loss) << ','
               << format_double(r.data_spectrum.stable_rank) << ',' << r.data_spectrum.threshold_rank << ','
               << format_double(r.filter_spectrum.stable_rank) << ',' << r.filter_spectrum.threshold_rank;
        else
            os << ",,,,,";
        os << '\n';
    }
    return os.str();
}

SweepResult run_sweep(const ExperimentConfig& c, const fs::path& out, int jobs) {
    std::error_code ec;
    fs::create_directories(out, ec);
    require(!ec, ErrorKind::Io, "cannot create directory " + out.string());

    ImageSet mnist_images;
    if (c.is_mnist()) mnist_images = prepare_mnist_images(*c.mnist);

    const int n_sigma = static_cast<int>(c.data.sigma_grid.size());
    SweepResult result;
    result.runs.resize(static_cast<std::size_t>(n_sigma * c.repeats));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int idx = next++; idx < static_cast<int>(result.runs.size()); idx = next++) {
            const int si = idx / c.repeats;
            const int rep = idx % c.repeats;
            RunOutcome& slot = result.runs[static_cast<std::size_t>(idx)];
            const fs::path dir = out / ("run_" + std::to_string(si) + "_" + std::to_string(rep));
            const double sigma = c.data.sigma_grid[static_cast<std::size_t>(si)];
            try {
                const PatchedDataset data = build_dataset(c, si, rep, c.is_mnist() ? &mnist_images : nullptr);
                slot = train_run(c, data, dir);
                note("run sigma=" + format_double(sigma) + " repeat=" + std::to_string(rep) + ": step " +
                     std::to_string(slot.final_step) + ", loss " + format_double(slot.final_loss) +
                     ", filter threshold rank " + std::to_string(slot.filter_spectrum.threshold_rank));
            } catch (const Error& e) {
                slot = RunOutcome{};
                slot.exit_code = exit_code_for(e.kind());
                slot.error = e.what();
                note("run sigma=" + format_double(sigma) + " repeat=" + std::to_string(rep) +
                     " failed: " + e.what());
            }
            slot.sigma_noise = sigma;
            slot.sigma_index = si;
            slot.repeat = rep;
            slot.seed = run_seed(c, si, rep);
        }
    };
    jobs = std::clamp(jobs, 1, static_cast<int>(result.runs.size()));
    std::vector<std::thread> pool;
    for (int i = 1; i < jobs; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    write_text_file(out / "sweep.csv", sweep_csv(result));
    return result;
}

namespace {

int default_jobs() {
    if (const char* env = std::getenv("RANKSCOPE_JOBS")) {
        const int j = std::atoi(env);
        require(j >= 1, ErrorKind::Validation, "RANKSCOPE_JOBS must be a positive integer");
        return j;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> threshold_ratio;
};

ExperimentConfig load_with_overrides(const Common& o) {
    require(!o.config.empty(), ErrorKind::Validation, "--config is required");
    ExperimentConfig c = load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.threshold_ratio) c.train.threshold_ratio = *o.threshold_ratio;
    if (!o.out.empty()) c.out = o.out;
    c.validate();
    return c;
}

fs::path out_dir(const ExperimentConfig& c) {
    require(!c.out.empty(), ErrorKind::Validation, "no output directory: pass --out or set 'out'");
    return c.out;
}

int write_dataset(const ExperimentConfig& c, const PatchedDataset& data, const fs::path& dir) {
    save_dataset(data, dir);
    const SpectrumReport s = spectrum_report(assemble_data_matrix(data), c.train.threshold_ratio);
    json m;
    m["config"] = json::parse(config_to_json(c));
    m["seed"] = data.seed;
    m["sigma_noise"] = data.sigma_noise;
    m["data_stable_rank"] = s.stable_rank;
    m["data_threshold_rank"] = s.threshold_rank;
    m["threshold_ratio"] = c.train.threshold_ratio;
    if (!c.is_mnist()) {
        const RegimeReport r = classify_noise_regime(data.sigma_noise, data.d, data.n, data.K);
        m["regime"] = to_string(r.regime);
    }
    write_text_file(dir / "manifest.json", m.dump(1) + "\n");
    std::cout << "wrote " << dir.string() << ": stable rank " << format_double(s.stable_rank)
              << ", threshold rank " << s.threshold_rank << '\n';
    return kOk;
}

int cmd_gen_data(const Common& o, int sigma_index, int repeat) {
    const ExperimentConfig c = load_with_overrides(o);
    require(!c.is_mnist(), ErrorKind::Validation, "gen-data builds synthetic data; use mnist-prep");
    require(sigma_index >= 0 && sigma_index < static_cast<int>(c.data.sigma_grid.size()),
            ErrorKind::Validation, "--sigma-index outside the sigma grid");
    return write_dataset(c, build_dataset(c, sigma_index, repeat), out_dir(c));
}

int cmd_mnist_prep(const Common& o, int sigma_index, int repeat) {
    const ExperimentConfig c = load_with_overrides(o);
    require(c.is_mnist(), ErrorKind::Validation, "mnist-prep needs data.source 'mnist'");
    require(sigma_index >= 0 && sigma_index < static_cast<int>(c.data.sigma_grid.size()),
            ErrorKind::Validation, "--sigma-index outside the sigma grid");
    const ImageSet reduced = prepare_mnist_images(*c.mnist);
    return write_dataset(c, build_dataset(c, sigma_index, repeat, &reduced), out_dir(c));
}

int cmd_train(const Common& o, const std::string& data_dir, const std::string& resume) {
    const ExperimentConfig c = load_with_overrides(o);
    const PatchedDataset data = load_dataset(data_dir);
    const RunOutcome r = train_run(c, data, out_dir(c), resume);
    std::cout << "step " << r.final_step << ", train loss " << format_double(r.final_loss)
              << ", filter stable rank " << format_double(r.filter_spectrum.stable_rank)
              << ", filter threshold rank " << r.filter_spectrum.threshold_rank << '\n';
    return kOk;
}

int cmd_sweep(const Common& o, std::optional<int> jobs) {
    const ExperimentConfig c = load_with_overrides(o);
    const SweepResult r = run_sweep(c, out_dir(c), jobs ? *jobs : default_jobs());
    std::cout << sweep_csv(r);
    for (const RunOutcome& run : r.runs)
        if (!run.ok) return run.exit_code == kOk ? kOther : run.exit_code;
    return kOk;
}

int cmd_analyze(const Common& o, const std::string& data_dir, const std::string& checkpoint,
                const std::string& trace_file, std::optional<double> eta) {
    const double ratio = o.threshold_ratio.value_or(kDefaultThresholdRatio);
    const PatchedDataset data = load_dataset(data_dir);
    CheckpointHeader h;
    const CnnParams params = load_checkpoint(checkpoint, &h);
    require(params.d == data.d, ErrorKind::Input, "checkpoint dimension does not match the dataset");
    const BasisSystem basis = dataset_basis(data);

    const SpectrumReport ds = spectrum_report(assemble_data_matrix(data), ratio);
    const SpectrumReport fs_ = filter_matrix_spectrum(params, ratio);
    json j;
    j["step"] = h.step;
    j["threshold_ratio"] = ratio;
    j["data_spectrum"] = spectrum_json(ds);
    j["filter_spectrum"] = spectrum_json(fs_);
    if (basis.K > 0) {
        const RankGapReport gap = rank_gap_report(ds, fs_, basis.K, std::max(h.step, 2L), data.sigma_noise,
                                                  data.d, data.n);
        j["rank_gap"] = {{"filter_sr_gap", gap.filter_sr_gap},
                         {"fitted_constant", gap.fitted_constant},
                         {"data_sr_excess", gap.data_sr_excess},
                         {"regime", to_string(gap.regime.regime)}};
        if (params.m >= basis.K) {
            const AlignmentReport al = alignment_distance(params, basis);
            j["alignment"] = {{"plus", al.plus.distance},
                              {"minus", al.minus.distance},
                              {"matched_rows_distinct", al.matched_rows_distinct()}};
        }
        if (h.sigma0 > 0.0) {
            const CnnParams initial = init_params(h.d, h.m, h.q, h.kappa, h.sigma0, h.seed);
            const auto proj = noise_projection_norms(params, initial, basis);
            j["max_noise_projection"] = *std::max_element(proj.begin(), proj.end());
        }
    }
    if (!trace_file.empty()) {
        const TrainTrace trace = read_trace_csv(trace_file);
        const long t0 = phase1_crossing(trace, h.kappa);
        j["phase1_crossing"] = t0;
        try {
            const GrowthReport g = fit_growth_law(trace, h.m, h.kappa);
            j["growth"] = {{"window_start", g.window_start},
                           {"window_end", g.window_end},
                           {"points", g.points},
                           {"max_deviation", g.max_deviation}};
        } catch (const Error& e) {
            j["growth"] = {{"error", e.what()}};
        }
        if (eta && t0 > 0) {
            try {
                const LossRateReport lr = fit_loss_rate(trace, *eta, h.m, t0);
                j["loss_rate"] = {{"steps", lr.steps}, {"products", lr.products}, {"max_ratio", lr.max_ratio}};
            } catch (const Error& e) {
                j["loss_rate"] = {{"error", e.what()}};
            }
        }
    }
    const std::string text = j.dump(1) + "\n";
    if (o.out.empty())
        std::cout << text;
    else
        write_text_file(o.out, text);
    return kOk;
}

int cmd_theory_check(const Common& o, const std::vector<std::string>& faults) {
    theory::SuiteOptions opts;
    if (!o.config.empty()) opts = load_config(o.config).theory;
    if (o.seed) opts.seed = *o.seed;
    for (const auto& f : faults) opts.slack_override[f] = -1.0;
    const theory::SuiteReport rep = theory::run_lemma_suite(opts);
    json j;
    j["passed"] = rep.passed();
    j["lemmas"] = json::array();
    for (const auto& l : rep.lemmas)
        j["lemmas"].push_back({{"name", l.name},
                               {"passed", l.passed},
                               {"instances", l.instances},
                               {"violations", l.violations},
                               {"max_violation", l.max_violation},
                               {"slack", l.slack},
                               {"detail", l.detail}});
    const std::string text = j.dump(1) + "\n";
    if (o.out.empty())
        std::cout << text;
    else
        write_text_file(o.out, text);
    for (const auto& l : rep.lemmas)
        if (!l.passed) std::cerr << "lemma violated: " << l.name << '\n';
    return rep.passed() ? kOk : kLemmaViolation;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"rankscope: rank of learned filters versus rank of the data"};
    app.require_subcommand(1);
    Common o;
    int sigma_index = 0;
    int repeat = 0;
    std::string data_dir, resume, checkpoint, trace_file;
    std::optional<int> jobs;
    std::optional<double> eta;
    std::vector<std::string> faults;

    auto common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", o.config, "JSON experiment config");
        if (config_required) opt->required();
        sub->add_option("--out", o.out, "output directory or file");
        sub->add_option("--seed", o.seed, "base seed override");
        sub->add_option("--threshold-ratio", o.threshold_ratio, "singular value ratio for threshold rank")
            ->check(CLI::Range(0.0, 1.0));
    };
    auto* gen = app.add_subcommand("gen-data", "sample a synthetic dataset");
    common(gen, true);
    gen->add_option("--sigma-index", sigma_index, "index into the sigma grid");
    gen->add_option("--repeat", repeat, "repeat index");
    auto* mnist = app.add_subcommand("mnist-prep", "build a dataset from MNIST IDX files");
    common(mnist, true);
    mnist->add_option("--sigma-index", sigma_index, "index into the sigma grid");
    mnist->add_option("--repeat", repeat, "repeat index");
    auto* tr = app.add_subcommand("train", "train on a saved dataset");
    common(tr, true);
    tr->add_option("--data", data_dir, "dataset directory")->required();
    tr->add_option("--resume", resume, "checkpoint to resume from");
    auto* sw = app.add_subcommand("sweep", "train one run per noise level and repeat");
    common(sw, true);
    sw->add_option("--jobs", jobs, "parallel runs (default RANKSCOPE_JOBS or all cores)")
        ->check(CLI::PositiveNumber);
    auto* an = app.add_subcommand("analyze", "spectra, alignment and growth fits of a checkpoint");
    common(an, false);
    an->add_option("--data", data_dir, "dataset directory")->required();
    an->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    an->add_option("--trace", trace_file, "trace CSV for growth and loss-rate fits");
    an->add_option("--eta", eta, "learning rate used for the loss-rate fit");
    auto* th = app.add_subcommand("theory-check", "run the sequence-lemma validators");
    common(th, false);
    th->add_option("--inject-fault", faults, "force the named lemma to fail (test hook)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*gen) return cmd_gen_data(o, sigma_index, repeat);
        if (*mnist) return cmd_mnist_prep(o, sigma_index, repeat);
        if (*tr) return cmd_train(o, data_dir, resume);
        if (*sw) return cmd_sweep(o, jobs);
        if (*an) return cmd_analyze(o, data_dir, checkpoint, trace_file, eta);
        if (*th) return cmd_theory_check(o, faults);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDivergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOther;
    }
    return kOther;
}

}  // namespace rankscope::cli
