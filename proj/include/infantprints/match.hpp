#pragma once

#include "infantprints/aging.hpp"
#include "infantprints/core.hpp"

#include <atomic>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace infantprints::match {

struct MatchParams {
    // Pairing tolerance in pixels at 1900 ppi; rescaled to the sets' ppi.
    double pos_tolerance = 12.0;
    double angle_tolerance = kPi / 6;
    double max_rotation = kPi / 4;
    double rotation_step = kPi / 90;
    // Neighbours per minutia in the local descriptors that seed alignment.
    int neighbours = 5;
    // Alignment hypotheses tried per direction.
    int hypotheses = 40;

    void validate() const;
};

struct MinutiaeScore {
    double score = 0.0;
    // Set when either side has no minutiae; score is then 0.
    bool no_features = false;
    int matched = 0;
};

MinutiaeScore minutiae_match_detailed(const MinutiaeSet& a, const MinutiaeSet& b, const MatchParams& params = {});
double minutiae_match(const MinutiaeSet& a, const MinutiaeSet& b, const MatchParams& params = {});

double texture_match(const std::vector<float>& e, const std::vector<float>& p);

// Block orientation / ridge-frequency histograms around the print centre,
// L2-normalized to kEmbeddingDim values.
std::vector<float> fallback_embedding(const GrayImage& img);

struct ExternalConnector {
    // Shell command; {probe} and {enrolled} are replaced by image paths.
    std::string command;
    double timeout_seconds = 10.0;
};

// Runs the connector; any failure (exit status, timeout, junk output) gives
// nullopt and a message in *warning when provided.
std::optional<double> external_match(const GrayImage& probe, const GrayImage& enrolled,
                                     const std::optional<ExternalConnector>& connector,
                                     std::string* warning = nullptr);

struct Bounds {
    double min = 0.0;
    double max = 1.0;
};

struct NormalizationBounds {
    Bounds minutiae{0.0, 1.0};
    Bounds texture{-1.0, 1.0};
    Bounds external{0.0, 1.0};

    void validate() const;
};

ScoreBundle normalize_scores(const ScoreBundle& raw, const NormalizationBounds& bounds);
double fuse_scores(const ScoreBundle& norm, const FusionWeights& w);
double gender_gate(const Template& a, const Template& b, double fused);
double gender_gate(Gender a, Gender b, double fused);
double multi_sample_fuse(const std::vector<double>& scores);

// All captures of one subject from one session (or any grouping the caller
// wants to compare as a unit). image_paths is either empty or parallel to
// templates; it is only used by the external matcher.
struct SubjectRecord {
    std::string subject_id;
    Gender gender = Gender::unknown;
    std::vector<Template> templates;
    std::vector<std::string> image_paths;
};

// Collects external-matcher failures during a batch; shared across threads.
class Diagnostics {
public:
    void report_external_failure(const std::string& message);
    int external_failures() const { return failures_.load(); }
    std::vector<std::string> messages() const;

private:
    std::atomic<int> failures_{0};
    mutable std::mutex mutex_;
    std::vector<std::string> messages_;
};

struct MatchConfig {
    MatchParams params;
    NormalizationBounds bounds;
    FusionWeights weights;
    aging::AgingPolicy policy;
    std::optional<ExternalConnector> external;
    Diagnostics* diagnostics = nullptr;
};

// Normalized per-matcher scores of one probe template against one enrolled
// template (enrolled side aged per policy). Gender is not applied here.
ScoreBundle pair_bundle(const Template& probe, const Template& enrolled, const MatchConfig& config,
                        const std::string& probe_image = {}, const std::string& enrolled_image = {});
// fuse_scores of pair_bundle.
double pair_score(const Template& probe, const Template& enrolled, const MatchConfig& config,
                  const std::string& probe_image = {}, const std::string& enrolled_image = {});

struct AuthResult {
    double score = 0.0;
    // Per-slot mean of the normalized pair bundles, zeroed by the gender gate.
    ScoreBundle bundle;
    int comparisons = 0;
};

// Same-thumb pair scores, averaged, then gender gated.
AuthResult authenticate_detailed(const SubjectRecord& probe, const SubjectRecord& enrolled, const MatchConfig& config);
double authenticate(const SubjectRecord& probe, const SubjectRecord& enrolled, const MatchConfig& config);

struct RankedCandidate {
    std::string subject_id;
    double fused_score = 0.0;
    int rank = 0;
};

std::vector<RankedCandidate> search(const SubjectRecord& probe, const std::vector<SubjectRecord>& gallery,
                                    const MatchConfig& config, int jobs = 1);

}  // namespace infantprints::match
