#include "rankscope/serialize.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rankscope/error.hpp"

namespace rankscope {

static_assert(std::endian::native == std::endian::little, "payload layout assumes a little-endian host");

using nlohmann::json;

namespace {

void write_doubles(std::ostream& os, const double* p, std::size_t count) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::istream& is, double* p, std::size_t count, const std::string& what) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
    require(static_cast<std::size_t>(is.gcount()) == count * sizeof(double), ErrorKind::Format,
            what + ": payload truncated");
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
    require(j.contains(key), ErrorKind::Format, where + ": missing field '" + key + "'");
    return j.at(key).get<T>();
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_text_file(const std::filesystem::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::Io, "cannot open " + file.string() + " for writing");
    os << text;
    require(static_cast<bool>(os), ErrorKind::Io, "write failed: " + file.string());
}

std::string read_text_file(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    require(static_cast<bool>(is), ErrorKind::Io, "cannot open " + file.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string dataset_manifest(const PatchedDataset& data) {
    json j;
    j["format"] = "rankscope-dataset";
    j["version"] = 1;
    j["d"] = data.d;
    j["n"] = data.n;
    j["P"] = data.P;
    j["K"] = data.K;
    j["sigma_noise"] = data.sigma_noise;
    j["seed"] = data.seed;
    j["policy"] = {{"kind", to_string(data.policy)}, {"size", data.policy.size}};
    j["basis"] = {{"mode", to_string(data.basis_mode)}, {"seed", data.basis_seed}};
    j["labels"] = data.labels;
    j["object_sets"] = data.object_sets;
    j["assignments"] = data.assignments;
    j["payload"] = "dataset.bin";
    j["payload_layout"] = "float64 little-endian, column-major d x nP";
    return j.dump(1) + "\n";
}

void save_dataset(const PatchedDataset& data, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorKind::Io, "cannot create directory " + dir.string());
    write_text_file(dir / "dataset.json", dataset_manifest(data));
    std::ofstream os(dir / "dataset.bin", std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::Io, "cannot write " + (dir / "dataset.bin").string());
    write_doubles(os, data.patches.data(), static_cast<std::size_t>(data.patches.size()));
    require(static_cast<bool>(os), ErrorKind::Io, "write failed: " + (dir / "dataset.bin").string());
}

PatchedDataset load_dataset(const std::filesystem::path& dir) {
    const std::string where = (dir / "dataset.json").string();
    json j;
    try {
        j = json::parse(read_text_file(dir / "dataset.json"));
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, where + ": " + e.what());
    }
    require(j.value("format", "") == "rankscope-dataset", ErrorKind::Format, where + ": not a dataset manifest");
    PatchedDataset ds;
    try {
        ds.d = field<int>(j, "d", where);
        ds.n = field<int>(j, "n", where);
        ds.P = field<int>(j, "P", where);
        ds.K = field<int>(j, "K", where);
        ds.sigma_noise = field<double>(j, "sigma_noise", where);
        ds.seed = field<std::uint64_t>(j, "seed", where);
        const json& pol = j.at("policy");
        ds.policy.kind = pol.at("kind").get<std::string>() == "uniform-proper"
                             ? ObjectSetPolicy::Kind::UniformProper
                             : ObjectSetPolicy::Kind::FixedSize;
        ds.policy.size = pol.at("size").get<int>();
        ds.basis_mode = basis_mode_from_string(j.at("basis").at("mode").get<std::string>());
        ds.basis_seed = j.at("basis").at("seed").get<std::uint64_t>();
        ds.labels = j.at("labels").get<std::vector<int>>();
        ds.object_sets = j.at("object_sets").get<std::vector<std::vector<int>>>();
        ds.assignments = j.at("assignments").get<std::vector<std::vector<int>>>();
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, where + ": " + e.what());
    }
    require(ds.d > 0 && ds.n > 0 && ds.P > 0, ErrorKind::Format, where + ": non-positive shape");
    require(ds.labels.size() == static_cast<std::size_t>(ds.n) &&
                ds.object_sets.size() == static_cast<std::size_t>(ds.n) &&
                ds.assignments.size() == static_cast<std::size_t>(ds.n),
            ErrorKind::Format, where + ": per-input arrays do not match n");

    ds.patches.resize(ds.d, static_cast<Eigen::Index>(ds.n) * ds.P);
    std::ifstream is(dir / "dataset.bin", std::ios::binary);
    require(static_cast<bool>(is), ErrorKind::Io, "cannot open " + (dir / "dataset.bin").string());
    read_doubles(is, ds.patches.data(), static_cast<std::size_t>(ds.patches.size()),
                 (dir / "dataset.bin").string());
    return ds;
}

void save_checkpoint(const std::filesystem::path& file, const CnnParams& params,
                     const CheckpointHeader& h) {
    json j;
    j["format"] = "rankscope-checkpoint";
    j["m"] = params.m;
    j["d"] = params.d;
    j["q"] = params.q;
    j["kappa"] = params.kappa;
    j["step"] = h.step;
    j["seed"] = h.seed;
    j["sigma0"] = h.sigma0;
    std::ofstream os(file, std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::Io, "cannot write " + file.string());
    os << j.dump() << '\n';
    write_doubles(os, params.filters.data(), static_cast<std::size_t>(params.filters.size()));
    require(static_cast<bool>(os), ErrorKind::Io, "write failed: " + file.string());
}

CnnParams load_checkpoint(const std::filesystem::path& file, CheckpointHeader* header) {
    std::ifstream is(file, std::ios::binary);
    require(static_cast<bool>(is), ErrorKind::Io, "cannot open " + file.string());
    std::string line;
    std::getline(is, line);
    CheckpointHeader h;
    try {
        const json j = json::parse(line);
        require(j.value("format", "") == "rankscope-checkpoint", ErrorKind::Format,
                file.string() + ": not a checkpoint");
        h.m = j.at("m").get<int>();
        h.d = j.at("d").get<int>();
        h.q = j.at("q").get<int>();
        h.kappa = j.at("kappa").get<double>();
        h.step = j.at("step").get<long>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.sigma0 = j.value("sigma0", 0.0);
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, file.string() + ": bad header: " + e.what());
    }
    CnnParams p = zero_params(h.d, h.m, h.q, h.kappa);
    read_doubles(is, p.filters.data(), static_cast<std::size_t>(p.filters.size()), file.string());
    p.validate();
    if (header) *header = h;
    return p;
}

std::string trace_csv_header(int K) {
    std::string h =
        "step,train_loss,test_loss,test_stderr,filter_stable_rank,filter_threshold_rank,"
        "noise_proj_plus,noise_proj_minus,align_plus,align_minus";
    for (const char* label : {"p", "m"})
        for (int k = 0; k < K; ++k) h += std::string(",signal_") + label + std::to_string(k);
    for (const char* label : {"p", "m"})
        for (int k = 0; k < K; ++k) h += std::string(",argmax_") + label + std::to_string(k);
    return h;
}

std::string trace_csv_row(const TraceRow& r) {
    std::string s = std::to_string(r.step);
    for (double v : {r.train_loss, r.test_loss, r.test_stderr, r.filter_stable_rank})
        s += "," + format_double(v);
    s += "," + std::to_string(r.filter_threshold_rank);
    for (double v : {r.noise_projection_plus, r.noise_projection_minus, r.alignment_plus, r.alignment_minus})
        s += "," + format_double(v);
    for (double v : r.max_signal) s += "," + format_double(v);
    for (int v : r.argmax_filter) s += "," + std::to_string(v);
    return s;
}

void write_trace_csv(std::ostream& os, const TrainTrace& trace) {
    os << trace_csv_header(trace.K) << '\n';
    for (const auto& row : trace.rows) os << trace_csv_row(row) << '\n';
}

void write_trace_csv(const std::filesystem::path& file, const TrainTrace& trace) {
    std::ostringstream os;
    write_trace_csv(os, trace);
    write_text_file(file, os.str());
}

namespace {

double parse_double(const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    require(res.ec == std::errc{} && res.ptr == s.data() + s.size(), ErrorKind::Format,
            "trace: bad number '" + s + "'");
    return v;
}

}  // namespace

TrainTrace read_trace_csv(const std::filesystem::path& file) {
    std::istringstream is(read_text_file(file));
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), ErrorKind::Format, file.string() + ": empty trace");
    const auto columns = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
    require(columns >= 10 && (columns - 10) % 4 == 0, ErrorKind::Format, file.string() + ": bad header");
    TrainTrace trace;
    trace.K = (columns - 10) / 4;
    require(line == trace_csv_header(trace.K), ErrorKind::Format, file.string() + ": unexpected header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        require(static_cast<int>(cells.size()) == columns, ErrorKind::Format,
                file.string() + ": row with wrong column count");
        TraceRow r;
        r.step = std::stol(cells[0]);
        r.train_loss = parse_double(cells[1]);
        r.test_loss = parse_double(cells[2]);
        r.test_stderr = parse_double(cells[3]);
        r.filter_stable_rank = parse_double(cells[4]);
        r.filter_threshold_rank = std::stoi(cells[5]);
        r.noise_projection_plus = parse_double(cells[6]);
        r.noise_projection_minus = parse_double(cells[7]);
        r.alignment_plus = parse_double(cells[8]);
        r.alignment_minus = parse_double(cells[9]);
        for (int c = 0; c < 2 * trace.K; ++c)
            r.max_signal.push_back(parse_double(cells[static_cast<std::size_t>(10 + c)]));
        for (int c = 0; c < 2 * trace.K; ++c)
            r.argmax_filter.push_back(std::stoi(cells[static_cast<std::size_t>(10 + 2 * trace.K + c)]));
        trace.rows.push_back(std::move(r));
    }
    return trace;
}

}  // namespace rankscope
