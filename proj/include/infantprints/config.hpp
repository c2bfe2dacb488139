#pragma once

#include "infantprints/aging.hpp"
#include "infantprints/eval.hpp"
#include "infantprints/extract.hpp"
#include "infantprints/match.hpp"
#include "infantprints/minmap.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace infantprints {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Every tunable of the stack. Text form is one "key = value" per line with
// '#' comments; see Config::dump for the full key list.
struct Config {
    minmap::MinmapParams minmap;

    // Extraction sizes are given at 500 ppi and scaled to each image.
    int extract_block_size = 16;
    int extract_border_margin = 16;
    double extract_gabor_wavelength = 0.0;
    extract::BinarizeMethod extract_binarize = extract::BinarizeMethod::fixed_midpoint;
    double extract_min_quality_coherence = 0.3;
    double extract_target_std = 0.2;
    int default_ppi = 500;
    bool texture_enabled = true;

    aging::AgingPolicy aging;
    match::MatchParams match;
    FusionWeights weights;
    match::NormalizationBounds bounds;
    std::string external_command;
    double external_timeout = 10.0;
    eval::EvalSettings eval;

    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static const std::vector<std::string>& keys();

    void validate() const;
    std::string dump() const;

    extract::ExtractParams extract_params(int ppi) const;
    match::MatchConfig match_config() const;
};

// Applies "key = value" lines on top of `base`. Unknown keys and malformed
// values raise ConfigError naming the line.
Config parse_config(const std::string& text, Config base = {});
Config load_config(const std::filesystem::path& path, Config base = {});

}  // namespace infantprints
