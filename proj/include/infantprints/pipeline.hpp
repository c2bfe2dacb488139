#pragma once

#include "infantprints/config.hpp"
#include "infantprints/manifest.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace infantprints {

struct CaptureInfo {
    std::string subject_id = "unknown";
    std::string session_id = "s1";
    Thumb thumb = Thumb::left;
    int age_weeks = 0;
    Gender gender = Gender::unknown;
};

// Resolution comes from the PGM "# ppi" comment, then a "<path>.ppi"
// sidecar, then config.default_ppi.
GrayImage load_image(const std::filesystem::path& path, const Config& config);

// Extraction plus (when enabled) the texture embedding. Templates come out
// unaged; enrollment aging is a separate step.
// `detections`, when given, receives the typed minutiae behind the template.
Template template_from_image(const GrayImage& img, const CaptureInfo& info, const Config& config,
                             std::vector<extract::DetectedMinutia>* detections = nullptr);

// Plain-text minutiae list: "x y theta_degrees type" per line.
std::string format_minutiae_list(const std::vector<extract::DetectedMinutia>& minutiae);

// One template per manifest row: .iptf files are read as stored, anything
// else is treated as an image and run through template_from_image with the
// row's metadata.
std::vector<Template> load_manifest_templates(const eval::Manifest& manifest, const Config& config, int jobs = 1);

}  // namespace infantprints
