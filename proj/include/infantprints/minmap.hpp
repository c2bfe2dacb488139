#pragma once

#include "infantprints/core.hpp"

#include <filesystem>
#include <vector>

namespace infantprints::minmap {

inline constexpr int kChannels = 12;

struct MinmapParams {
    double sigma_s = 6.0;
    double peak_threshold = 0.3;
    double nms_radius = 12.0;
    // Spatial contributions below this value are not accumulated. 1e-12 keeps
    // encoding exact at any tolerance the decoder or tests care about.
    double contribution_floor = 1e-12;

    void validate() const;
};

// n x m x 12 tensor stored row-major with channel fastest: H[row][col][k].
class MinutiaeMap {
public:
    MinutiaeMap() = default;
    MinutiaeMap(int height, int width);

    int height() const { return height_; }
    int width() const { return width_; }

    double at(int row, int col, int k) const { return values_[index(row, col, k)]; }
    double& at(int row, int col, int k) { return values_[index(row, col, k)]; }
    const std::vector<double>& values() const { return values_; }

    // Sum over channels at one cell.
    double cell_sum(int row, int col) const;

private:
    std::size_t index(int row, int col, int k) const
    {
        return (static_cast<std::size_t>(row) * width_ + col) * kChannels + k;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> values_;
};

// Orientation difference in [0, pi].
double angle_difference(double theta1, double theta2);

// Gaussian of the distance between (px, py) and the centre of cell (row i, col j).
double spatial_contribution(double px, double py, int i, int j, double sigma_s);

// exp(-dphi(theta, 2k pi / 12) / (2 sigma_s^2)), dphi taken unsquared.
double orientation_contribution(double theta_t, int k, double sigma_s);

inline double channel_center(int k) { return kTwoPi * k / kChannels; }

MinutiaeMap encode_minutiae_map(const MinutiaeSet& set, int height, int width, const MinmapParams& params);

MinutiaeSet decode_minutiae_map(const MinutiaeMap& map, const MinmapParams& params, int source_ppi = 500);

// Writes one text grid per channel: "<stem>_chNN.txt" with a header line
// "width height channel" followed by `height` rows of `width` values.
void dump_channels(const MinutiaeMap& map, const std::filesystem::path& stem);

}  // namespace infantprints::minmap
