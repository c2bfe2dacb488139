#pragma once

#include "infantprints/manifest.hpp"
#include "infantprints/match.hpp"

#include <limits>
#include <string>
#include <vector>

namespace infantprints::eval {

// Half-open interval [lo, hi) in weeks.
struct Bucket {
    std::string label;
    int lo = 0;
    int hi = std::numeric_limits<int>::max();

    bool contains(int weeks) const { return weeks >= lo && weeks < hi; }
    bool operator==(const Bucket&) const = default;
};

// Enrollment-age buckets 0-1, 1-2, 2-3 months and everything.
std::vector<Bucket> default_age_buckets();
std::vector<Bucket> default_lapse_buckets();
// "label:lo-hi" entries separated by ';', hi may be empty for open-ended.
std::vector<Bucket> parse_buckets(const std::string& text);
std::string format_buckets(const std::vector<Bucket>& buckets);

// All manifest rows of one subject captured in one session.
struct SessionRecord {
    std::string subject_id;
    std::string session_id;
    std::string capture_date;
    int age_weeks = 0;
    Gender gender = Gender::unknown;
    // Position of this session in the subject's chronological order.
    int ordinal = 0;
    std::vector<std::size_t> rows;
};

// Groups rows by (subject, session); output sorted by subject then ordinal.
// Sessions are ordered by capture date, then session id.
std::vector<SessionRecord> group_sessions(const Manifest& manifest);

enum class PairLabel { genuine, imposter };

struct ProtocolPair {
    std::size_t probe = 0;     // index into the session records
    std::size_t enrolled = 0;  // index into the session records
    PairLabel label = PairLabel::genuine;
    int time_lapse_weeks = 0;
    int enrollment_age_weeks = 0;
};

// Enrolled session always precedes the probe session in its own subject's
// chronology. Genuine pairs must fall in both buckets; imposter pairs are
// filtered on enrollment age only (a lapse between strangers means nothing).
std::vector<ProtocolPair> build_protocol(const std::vector<SessionRecord>& records, const Bucket& age_bucket,
                                         const Bucket& lapse_bucket);

// Template-level comparisons implied by a protocol pair: same thumb only.
std::vector<std::pair<std::size_t, std::size_t>> expand_pair(const ProtocolPair& pair,
                                                             const std::vector<SessionRecord>& records,
                                                             const Manifest& manifest);

struct OperatingPoint {
    double tar = 0.0;
    double threshold = 0.0;
};

// Accept when score >= threshold. threshold is the smallest double whose
// imposter accept rate stays within far_target.
OperatingPoint tar_at_far(const std::vector<double>& genuine, const std::vector<double>& imposter, double far_target);

struct RocPoint {
    double threshold;
    double far;
    double tar;
};
std::vector<RocPoint> roc_curve(const std::vector<double>& genuine, const std::vector<double>& imposter);

double eer(const std::vector<double>& genuine, const std::vector<double>& imposter);

struct SearchResult {
    std::string probe_subject;
    std::vector<match::RankedCandidate> ranking;
};

// Rank of the probe's mate, 0 when the mate is not in the ranking.
int mate_rank(const SearchResult& r);
// Fraction of probes whose mate is within rank k; probes without a mate are
// left out (and counted in *excluded when given).
double cmc(const std::vector<SearchResult>& results, int k, int* excluded = nullptr);

struct CalibrationResult {
    FusionWeights weights;
    double tar = 0.0;
};

// Exhaustive simplex grid over (minutiae, texture, external) weights.
CalibrationResult calibrate_weights(const std::vector<ScoreBundle>& genuine, const std::vector<ScoreBundle>& imposter,
                                    double far_target = 0.01, double grid_step = 0.05);

struct EvalSettings {
    std::vector<double> far_targets{0.001, 0.01};
    std::vector<Bucket> age_buckets = default_age_buckets();
    std::vector<Bucket> lapse_buckets = default_lapse_buckets();
};

struct BucketRow {
    std::string age_bucket;
    std::string lapse_bucket;
    int subjects = 0;
    int genuine_pairs = 0;
    int imposter_pairs = 0;
    std::vector<std::optional<double>> tar;  // parallel to far_targets
    std::optional<double> eer;
    std::optional<double> rank1;
    std::optional<double> rank5;
    int probes = 0;
};

struct EvalReport {
    std::vector<double> far_targets;
    std::vector<BucketRow> rows;
    std::vector<std::string> warnings;
};

// Scores every needed (probe, enrolled) session pair once, then slices by
// bucket. templates[i] belongs to manifest.records[i]; image paths are only
// used when an external connector is configured.
struct ScoredPair {
    ProtocolPair pair;
    double score = 0.0;
    ScoreBundle bundle;
};

std::vector<ScoredPair> score_protocol(const std::vector<SessionRecord>& records, const Manifest& manifest,
                                       const std::vector<Template>& templates, const match::MatchConfig& config,
                                       int jobs = 1);

EvalReport evaluate(const Manifest& manifest, const std::vector<Template>& templates,
                    const match::MatchConfig& config, const EvalSettings& settings, int jobs = 1);

std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace infantprints::eval
