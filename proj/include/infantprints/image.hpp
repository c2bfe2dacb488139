#pragma once

#include "infantprints/core.hpp"

#include <filesystem>
#include <optional>

namespace infantprints {

// Reads binary PGM (P5), 8- or 16-bit. A header comment of the form
// "# ppi <n>" sets the resolution; otherwise `default_ppi` is used.
GrayImage read_pgm(const std::filesystem::path& path, int default_ppi = 500);

// Writes 8-bit binary PGM with a "# ppi <n>" comment.
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

// Reads "<image path>.ppi" when present.
std::optional<int> read_ppi_sidecar(const std::filesystem::path& image_path);

// Catmull-Rom (a = -0.5) resampling to the given size. Sample positions are
// aligned on pixel centres; borders replicate. Output is clamped to [0,1].
GrayImage resize_bicubic(const GrayImage& img, int out_width, int out_height, int out_ppi);

// Resize by a scale factor: output size round(scale * input), ppi scaled too.
GrayImage scale_bicubic(const GrayImage& img, double scale);

double mean_intensity(const GrayImage& img);

}  // namespace infantprints
