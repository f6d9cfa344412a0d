#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rankscope/datamodel.hpp"

namespace rankscope {

/// Grayscale images with pixels scaled to [0, 1], stored one image per column
/// in row-major pixel order.
struct ImageSet {
    int count = 0;
    int height = 0;
    int width = 0;
    Eigen::MatrixXd pixels;  // (height*width) x count
    std::vector<int> labels;

    double at(int image, int row, int col) const {
        return pixels(static_cast<Eigen::Index>(row) * width + col, image);
    }
};

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

ImageSet parse_idx(std::span<const std::uint8_t> image_file, std::span<const std::uint8_t> label_file);
ImageSet load_idx(const std::filesystem::path& image_file, const std::filesystem::path& label_file);

struct IdxBlobs {
    std::vector<std::uint8_t> images;
    std::vector<std::uint8_t> labels;
};
/// Inverse of parse_idx; pixels are rounded back to bytes.
IdxBlobs serialize_idx(const ImageSet& set);

/// Keeps images whose label is in `classes`, at most `limit` of them (0 means
/// all), in file order.
ImageSet select_classes(const ImageSet& set, const std::vector<int>& classes, int limit = 0);

/// Rank-R reconstruction of a D x N matrix (columns are samples). With
/// `center` the column mean is removed before the SVD and added back after.
Eigen::MatrixXd pca_reduce(const Eigen::Ref<const Eigen::MatrixXd>& data, int R, bool center = false);

/// Surrounds every image with a border of width `pad` filled with i.i.d.
/// N(0, sigma^2) pixels.
ImageSet pad_with_noise(const ImageSet& set, int pad, double sigma_noise, std::uint64_t seed);

enum class PatchLayout {
    Grid,        // rows x cols non-overlapping blocks
    CenterRing,  // the unpadded center block, then the border pixels in raster order split evenly
};

struct PatchSpec {
    PatchLayout layout = PatchLayout::Grid;
    int grid_rows = 2;
    int grid_cols = 2;
    int pad = 0;  // CenterRing only
};

/// Flattens each image into patches; returns a (patch_dim) x (count * P) matrix
/// with the patches of image i in columns [i*P, (i+1)*P).
Eigen::MatrixXd to_patches(const ImageSet& set, const PatchSpec& spec, int* patches_per_image = nullptr);
/// Inverse of to_patches.
ImageSet from_patches(const Eigen::Ref<const Eigen::MatrixXd>& patches, const PatchSpec& spec,
                      int height, int width, const std::vector<int>& labels);

/// Object-patch positions per image for a layout (the blocks that overlap the
/// unpadded center).
std::vector<int> object_positions(const PatchSpec& spec, int height, int width, int pad);

/// Two-class dataset in the PatchedDataset container: labels are +1 for the
/// first class and -1 for the second, the object set of every input holds the
/// positions from object_positions, and no basis is attached.
PatchedDataset make_image_dataset(const ImageSet& padded, const PatchSpec& spec,
                                  const std::vector<int>& classes, int pad, double sigma_noise,
                                  std::uint64_t seed);

}  // namespace rankscope
