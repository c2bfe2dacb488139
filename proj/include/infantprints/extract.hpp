#pragma once

#include "infantprints/core.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace infantprints::extract {

enum class BinarizeMethod { fixed_midpoint, local_mean };

struct ExtractParams {
    int block_size = 16;
    // 0 selects a per-image estimate of the ridge period.
    double gabor_wavelength = 0.0;
    BinarizeMethod binarize = BinarizeMethod::fixed_midpoint;
    double min_quality_coherence = 0.3;
    int border_margin = 16;
    double target_std = 0.2;

    // Spatial parameters scaled linearly from their 500 ppi values.
    static ExtractParams for_ppi(int ppi);
    void validate() const;
};

// Block-wise ridge orientation (radians in [0, pi), counter-clockwise from +x
// as seen on screen) with coherence in [0, 1].
struct OrientationField {
    int block_size = 16;
    int rows = 0;
    int cols = 0;
    std::vector<double> angles;
    std::vector<double> coherence;
    // Block standard deviation of intensity; zero marks featureless blocks.
    std::vector<double> contrast;
    // Median ridge period in pixels over confident blocks, 0 when unknown.
    double ridge_period = 0.0;
    // Pixel-level fingerprint segmentation (1 = ridge area) and the distance
    // in pixels from each pixel to the nearest background pixel. Empty means
    // "no segmentation": every pixel counts as foreground.
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;
    std::vector<float> edge_distance;

    double angle(int br, int bc) const { return angles[static_cast<std::size_t>(br) * cols + bc]; }
    double coherence_at(int br, int bc) const { return coherence[static_cast<std::size_t>(br) * cols + bc]; }
    // Doubled-angle bilinear interpolation between block centres.
    double angle_at_pixel(double x, double y) const;
    double coherence_at_pixel(int x, int y) const;
    bool foreground(int x, int y) const;
    double distance_to_background(int x, int y) const;
};

enum class MinutiaType { ending, bifurcation };

struct DetectedMinutia {
    Minutia minutia;
    MinutiaType type = MinutiaType::ending;
};

GrayImage normalize_image(const GrayImage& img, double target_std = 0.2);

OrientationField estimate_orientation_field(const GrayImage& img, const ExtractParams& params);

GrayImage enhance(const GrayImage& img, const OrientationField& field, const ExtractParams& params);

// Ridges are dark. Binary output: 1 = ridge (skeleton) pixel, 0 = background;
// an image without contrast yields no ridge pixels.
GrayImage binarize(const GrayImage& img, const ExtractParams& params);
GrayImage thin(const GrayImage& binary);
GrayImage binarize_and_thin(const GrayImage& img, const ExtractParams& params);

// Eight neighbours of a pixel in the cyclic order N, NE, E, SE, S, SW, W, NW.
using Neighborhood = std::array<bool, 8>;
Neighborhood neighborhood_from_mask(unsigned mask);
// Half the summed absolute differences around the cycle.
int crossing_number(const Neighborhood& n);

enum class PixelClass { isolated, ending, ridge, bifurcation, crossing };
PixelClass classify(const Neighborhood& n);

std::vector<DetectedMinutia> extract_detailed(const GrayImage& skeleton, const OrientationField& field,
                                              const ExtractParams& params);
MinutiaeSet extract_minutiae(const GrayImage& skeleton, const OrientationField& field, const ExtractParams& params);

struct Extraction {
    OrientationField field;
    GrayImage enhanced;
    GrayImage skeleton;
    std::vector<DetectedMinutia> minutiae;

    MinutiaeSet as_set(int ppi) const;
};

// normalize -> orientation -> enhance -> binarize/thin -> crossing numbers.
Extraction run_pipeline(const GrayImage& img, const ExtractParams& params);

}  // namespace infantprints::extract
