#include "rankscope/ingestion.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <random>

#include "rankscope/error.hpp"
#include "rankscope/random.hpp"

namespace rankscope {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
           (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    require(static_cast<bool>(is), ErrorKind::Io, "cannot open " + p.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

ImageSet parse_idx(std::span<const std::uint8_t> img, std::span<const std::uint8_t> lbl) {
    require(img.size() >= 16, ErrorKind::Format, "idx images: header truncated");
    require(lbl.size() >= 8, ErrorKind::Format, "idx labels: header truncated");
    require(read_be32(img, 0) == kIdxImageMagic, ErrorKind::Format, "idx images: bad magic number");
    require(read_be32(lbl, 0) == kIdxLabelMagic, ErrorKind::Format, "idx labels: bad magic number");
    const std::uint32_t count = read_be32(img, 4);
    const std::uint32_t rows = read_be32(img, 8);
    const std::uint32_t cols = read_be32(img, 12);
    const std::uint32_t lcount = read_be32(lbl, 4);
    require(count == lcount, ErrorKind::Input, "idx: image count " + std::to_string(count) +
                                                   " does not match label count " + std::to_string(lcount));
    const std::size_t pix = std::size_t{rows} * cols;
    require(img.size() - 16 >= pix * count, ErrorKind::Format, "idx images: payload truncated");
    require(lbl.size() - 8 >= count, ErrorKind::Format, "idx labels: payload truncated");

    ImageSet set;
    set.count = static_cast<int>(count);
    set.height = static_cast<int>(rows);
    set.width = static_cast<int>(cols);
    set.pixels.resize(static_cast<Eigen::Index>(pix), count);
    set.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint8_t* p = img.data() + 16 + i * pix;
        for (std::size_t k = 0; k < pix; ++k)
            set.pixels(static_cast<Eigen::Index>(k), i) = p[k] / 255.0;
        const int label = lbl[8 + i];
        require(label <= 9, ErrorKind::Format, "idx labels: label outside 0..9");
        set.labels[i] = label;
    }
    return set;
}

ImageSet load_idx(const std::filesystem::path& image_file, const std::filesystem::path& label_file) {
    const auto img = read_file(image_file);
    const auto lbl = read_file(label_file);
    return parse_idx(img, lbl);
}

IdxBlobs serialize_idx(const ImageSet& set) {
    IdxBlobs out;
    write_be32(out.images, kIdxImageMagic);
    write_be32(out.images, static_cast<std::uint32_t>(set.count));
    write_be32(out.images, static_cast<std::uint32_t>(set.height));
    write_be32(out.images, static_cast<std::uint32_t>(set.width));
    for (int i = 0; i < set.count; ++i)
        for (Eigen::Index k = 0; k < set.pixels.rows(); ++k) {
            const double v = std::clamp(set.pixels(k, i), 0.0, 1.0);
            out.images.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
        }
    write_be32(out.labels, kIdxLabelMagic);
    write_be32(out.labels, static_cast<std::uint32_t>(set.count));
    for (int l : set.labels) out.labels.push_back(static_cast<std::uint8_t>(l));
    return out;
}

ImageSet select_classes(const ImageSet& set, const std::vector<int>& classes, int limit) {
    std::vector<int> keep;
    for (int i = 0; i < set.count; ++i) {
        if (limit > 0 && static_cast<int>(keep.size()) >= limit) break;
        if (std::find(classes.begin(), classes.end(), set.labels[static_cast<std::size_t>(i)]) != classes.end())
            keep.push_back(i);
    }
    ImageSet out;
    out.count = static_cast<int>(keep.size());
    out.height = set.height;
    out.width = set.width;
    out.pixels.resize(set.pixels.rows(), out.count);
    for (int c = 0; c < out.count; ++c) {
        out.pixels.col(c) = set.pixels.col(keep[static_cast<std::size_t>(c)]);
        out.labels.push_back(set.labels[static_cast<std::size_t>(keep[static_cast<std::size_t>(c)])]);
    }
    return out;
}

Eigen::MatrixXd pca_reduce(const Eigen::Ref<const Eigen::MatrixXd>& data, int R, bool center) {
    const auto full = std::min(data.rows(), data.cols());
    require(R >= 1 && R <= full, ErrorKind::Parameter,
            "pca_reduce: rank " + std::to_string(R) + " outside [1, " + std::to_string(full) + "]");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(data.rows());
    if (center) mean = data.rowwise().mean();
    const Eigen::MatrixXd centered = data.colwise() - mean;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXd out = svd.matrixU().leftCols(R) * svd.singularValues().head(R).asDiagonal() *
                          svd.matrixV().leftCols(R).transpose();
    out.colwise() += mean;
    return out;
}

ImageSet pad_with_noise(const ImageSet& set, int pad, double sigma_noise, std::uint64_t seed) {
    require(pad >= 0, ErrorKind::Parameter, "pad_with_noise: pad must be non-negative");
    require(sigma_noise >= 0.0, ErrorKind::Parameter, "pad_with_noise: sigma must be non-negative");
    ImageSet out;
    out.count = set.count;
    out.height = set.height + 2 * pad;
    out.width = set.width + 2 * pad;
    out.labels = set.labels;
    out.pixels.resize(static_cast<Eigen::Index>(out.height) * out.width, set.count);
    auto rng = make_rng(seed, Stream::Padding);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < set.count; ++i)
        for (int r = 0; r < out.height; ++r)
            for (int c = 0; c < out.width; ++c) {
                const bool inside = r >= pad && r < pad + set.height && c >= pad && c < pad + set.width;
                double v = 0.0;
                if (inside)
                    v = set.at(i, r - pad, c - pad);
                else if (sigma_noise > 0.0)
                    v = sigma_noise * normal(rng);
                out.pixels(static_cast<Eigen::Index>(r) * out.width + c, i) = v;
            }
    return out;
}

namespace {

// Pixel index lists per patch for one image of the given geometry.
std::vector<std::vector<int>> patch_pixels(const PatchSpec& spec, int height, int width) {
    std::vector<std::vector<int>> groups;
    if (spec.layout == PatchLayout::Grid) {
        require(spec.grid_rows >= 1 && spec.grid_cols >= 1 && height % spec.grid_rows == 0 &&
                    width % spec.grid_cols == 0,
                ErrorKind::Parameter,
                "to_patches: grid " + std::to_string(spec.grid_rows) + "x" + std::to_string(spec.grid_cols) +
                    " does not divide " + std::to_string(height) + "x" + std::to_string(width));
        const int bh = height / spec.grid_rows;
        const int bw = width / spec.grid_cols;
        for (int gr = 0; gr < spec.grid_rows; ++gr)
            for (int gc = 0; gc < spec.grid_cols; ++gc) {
                std::vector<int> g;
                for (int r = 0; r < bh; ++r)
                    for (int c = 0; c < bw; ++c) g.push_back((gr * bh + r) * width + gc * bw + c);
                groups.push_back(std::move(g));
            }
        return groups;
    }
    const int pad = spec.pad;
    const int ih = height - 2 * pad;
    const int iw = width - 2 * pad;
    require(pad >= 1 && ih >= 1 && iw >= 1, ErrorKind::Parameter, "to_patches: ring layout needs pad >= 1");
    const int inner = ih * iw;
    const int ring = height * width - inner;
    require(ring % inner == 0, ErrorKind::Parameter,
            "to_patches: border pixel count " + std::to_string(ring) + " is not a multiple of the center size " +
                std::to_string(inner));
    std::vector<int> center;
    std::vector<int> border;
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            const bool in = r >= pad && r < pad + ih && c >= pad && c < pad + iw;
            (in ? center : border).push_back(r * width + c);
        }
    groups.push_back(std::move(center));
    for (int g = 0; g < ring / inner; ++g)
        groups.emplace_back(border.begin() + g * inner, border.begin() + (g + 1) * inner);
    return groups;
}

}  // namespace

Eigen::MatrixXd to_patches(const ImageSet& set, const PatchSpec& spec, int* patches_per_image) {
    const auto groups = patch_pixels(spec, set.height, set.width);
    const int P = static_cast<int>(groups.size());
    const auto dim = static_cast<Eigen::Index>(groups.front().size());
    Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(set.count) * P);
    for (int i = 0; i < set.count; ++i)
        for (int p = 0; p < P; ++p)
            for (Eigen::Index k = 0; k < dim; ++k)
                out(k, static_cast<Eigen::Index>(i) * P + p) =
                    set.pixels(groups[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)], i);
    if (patches_per_image) *patches_per_image = P;
    return out;
}

ImageSet from_patches(const Eigen::Ref<const Eigen::MatrixXd>& patches, const PatchSpec& spec,
                      int height, int width, const std::vector<int>& labels) {
    const auto groups = patch_pixels(spec, height, width);
    const int P = static_cast<int>(groups.size());
    require(patches.cols() % P == 0, ErrorKind::Input, "from_patches: column count not a multiple of P");
    ImageSet out;
    out.count = static_cast<int>(patches.cols() / P);
    out.height = height;
    out.width = width;
    out.labels = labels;
    out.pixels.resize(static_cast<Eigen::Index>(height) * width, out.count);
    for (int i = 0; i < out.count; ++i)
        for (int p = 0; p < P; ++p)
            for (std::size_t k = 0; k < groups[static_cast<std::size_t>(p)].size(); ++k)
                out.pixels(groups[static_cast<std::size_t>(p)][k], i) =
                    patches(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i) * P + p);
    return out;
}

std::vector<int> object_positions(const PatchSpec& spec, int height, int width, int pad) {
    if (spec.layout == PatchLayout::CenterRing) return {0};
    const auto groups = patch_pixels(spec, height, width);
    std::vector<int> out;
    for (std::size_t p = 0; p < groups.size(); ++p) {
        const bool touches = std::any_of(groups[p].begin(), groups[p].end(), [&](int idx) {
            const int r = idx / width;
            const int c = idx % width;
            return r >= pad && r < height - pad && c >= pad && c < width - pad;
        });
        if (touches) out.push_back(static_cast<int>(p));
    }
    return out;
}

PatchedDataset make_image_dataset(const ImageSet& padded, const PatchSpec& spec,
                                  const std::vector<int>& classes, int pad, double sigma_noise,
                                  std::uint64_t seed) {
    require(classes.size() == 2, ErrorKind::Parameter, "make_image_dataset: exactly two classes required");
    PatchedDataset ds;
    int P = 0;
    ds.patches = to_patches(padded, spec, &P);
    ds.d = static_cast<int>(ds.patches.rows());
    ds.n = padded.count;
    ds.P = P;
    ds.K = 0;
    ds.sigma_noise = sigma_noise;
    ds.seed = seed;
    ds.basis_mode = BasisMode::External;
    const std::vector<int> objects = object_positions(spec, padded.height, padded.width, pad);
    ds.policy.kind = ObjectSetPolicy::Kind::FixedSize;
    ds.policy.size = static_cast<int>(objects.size());
    for (int i = 0; i < padded.count; ++i) {
        const int l = padded.labels[static_cast<std::size_t>(i)];
        require(l == classes[0] || l == classes[1], ErrorKind::Input,
                "make_image_dataset: image with label outside the selected classes");
        ds.labels.push_back(l == classes[0] ? 1 : -1);
        ds.object_sets.push_back(objects);
        ds.assignments.emplace_back();
    }
    return ds;
}

}  // namespace rankscope
