#pragma once

#include "infantprints/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace infantprints::synth {

enum class PatternClass { arch, loop, whorl };

std::string to_string(PatternClass c);
PatternClass parse_pattern_class(const std::string& s);

struct Canvas {
    int width = 320;
    int height = 320;
    int ppi = 1000;
};

// A phase singularity of winding +/-1: each one produces exactly one
// ridge ending or bifurcation in the rendered pattern.
struct Spiral {
    double x = 0.0;
    double y = 0.0;
    int polarity = 1;
};

struct MasterFinger {
    std::string id;
    PatternClass pattern = PatternClass::loop;
    Canvas canvas;
    double ridge_period = 9.0;
    // Pattern anchor (core) and the far end of the singular segment for loops.
    Vec2 core;
    Vec2 core_tail;
    double phase_offset = kPi;
    // Smooth warp of the base pattern: amplitude (px), wavelength (px), phase.
    double warp_amp[2] = {0.0, 0.0};
    double warp_len[2] = {200.0, 200.0};
    double warp_phase[2] = {0.0, 0.0};
    // Finger footprint (ellipse) in master coordinates.
    Vec2 finger_center;
    double finger_rx = 125.0;
    double finger_ry = 145.0;
    std::vector<Spiral> spirals;
    MinutiaeSet minutiae;

    // Ridge phase at a master-coordinate point.
    double phase(double x, double y) const;
    // Phase without the contribution of spiral `skip` (skip < 0 keeps all).
    double phase_excluding(double x, double y, int skip) const;
};

struct ImpressionParams {
    double growth_lambda = 1.0;
    double rotation = 0.0;
    Vec2 translation;
    double noise_sigma = 0.0;
    double blur_radius = 0.0;
    double moisture = 0.0;
    // Amplitude in pixels of a smooth random displacement field.
    double distortion = 0.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct Impression {
    GrayImage image;
    MinutiaeSet ground_truth;
};

MasterFinger generate_master(std::uint64_t seed, PatternClass pattern, const Canvas& canvas = {});

// Maps a master-coordinate point into the impression frame:
// p = c + t + lambda * R(rotation) (q - c), c = canvas centre.
Vec2 transform_point(const MasterFinger& master, const ImpressionParams& params, Vec2 q);

Impression render_impression(const MasterFinger& master, const ImpressionParams& params);

enum class Profile { clean, mild, hard };
std::string to_string(Profile p);
Profile parse_profile(const std::string& s);

struct ProfileRanges {
    double max_rotation = 0.0;
    double max_translation = 0.0;
    double noise_sigma = 0.0;
    double max_blur = 0.0;
    double max_moisture = 0.0;
    double distortion = 0.0;
};
ProfileRanges profile_ranges(Profile p);

struct BenchmarkSpec {
    int n_subjects = 100;
    int sessions = 2;
    int impressions_per_thumb = 2;
    Profile profile = Profile::mild;
    std::uint64_t seed = 1;
    Canvas canvas;
    double growth_per_session = 1.1;
    int jobs = 1;
};

struct BenchmarkSummary {
    std::filesystem::path manifest;
    int images = 0;
    int templates = 0;
};

// Writes images/, truth/ (ground-truth IPTF templates) and manifest.csv.
BenchmarkSummary build_benchmark(const BenchmarkSpec& spec, const std::filesystem::path& out_dir);

// Deterministic stream keyed by arbitrary integers (splitmix64 chain).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform();  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int lo, int hi);  // inclusive
    double normal();

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace infantprints::synth
