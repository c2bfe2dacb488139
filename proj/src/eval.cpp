#include "infantprints/eval.hpp"

#include "infantprints/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace infantprints::eval {

// ---------------------------------------------------------------------------
// Buckets

std::vector<Bucket> default_age_buckets()
{
    return {{"0-1m", 0, 5}, {"1-2m", 5, 9}, {"2-3m", 9, 13}, {"all", 0, std::numeric_limits<int>::max()}};
}

std::vector<Bucket> default_lapse_buckets()
{
    return {{"all", 0, std::numeric_limits<int>::max()}};
}

std::vector<Bucket> parse_buckets(const std::string& text)
{
    std::vector<Bucket> out;
    std::istringstream in(text);
    std::string item;
    auto number = [&](const std::string& s, int& v) {
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        return ec == std::errc() && p == s.data() + s.size();
    };
    while (std::getline(in, item, ';')) {
        if (item.empty())
            continue;
        const auto colon = item.find(':');
        const auto dash = item.find('-', colon == std::string::npos ? 0 : colon + 1);
        if (colon == std::string::npos || colon == 0 || dash == std::string::npos)
            throw ValidationError("bucket '" + item + "' must look like label:lo-hi");
        Bucket b;
        b.label = item.substr(0, colon);
        const std::string lo = item.substr(colon + 1, dash - colon - 1);
        const std::string hi = item.substr(dash + 1);
        if (!number(lo, b.lo) || b.lo < 0)
            throw ValidationError("bucket '" + item + "' has a bad lower bound");
        if (!hi.empty() && (!number(hi, b.hi) || b.hi <= b.lo))
            throw ValidationError("bucket '" + item + "' has a bad upper bound");
        out.push_back(b);
    }
    if (out.empty())
        throw ValidationError("bucket list is empty");
    return out;
}

std::string format_buckets(const std::vector<Bucket>& buckets)
{
    std::string out;
    for (const auto& b : buckets) {
        if (!out.empty())
            out += ';';
        out += b.label + ':' + std::to_string(b.lo) + '-';
        if (b.hi != std::numeric_limits<int>::max())
            out += std::to_string(b.hi);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Protocol

std::vector<SessionRecord> group_sessions(const Manifest& manifest)
{
    std::map<std::pair<std::string, std::string>, SessionRecord> groups;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        auto [it, fresh] = groups.try_emplace({r.subject_id, r.session_id});
        SessionRecord& s = it->second;
        if (fresh) {
            s.subject_id = r.subject_id;
            s.session_id = r.session_id;
            s.capture_date = r.capture_date;
            s.age_weeks = r.age_weeks;
            s.gender = r.gender;
        } else {
            if (r.gender != s.gender)
                throw ValidationError("subject " + r.subject_id + " has conflicting genders");
            s.capture_date = std::min(s.capture_date, r.capture_date);
            s.age_weeks = std::min(s.age_weeks, r.age_weeks);
        }
        s.rows.push_back(i);
    }
    std::vector<SessionRecord> out;
    for (auto& [key, s] : groups)
        out.push_back(std::move(s));
    std::stable_sort(out.begin(), out.end(), [](const SessionRecord& a, const SessionRecord& b) {
        return std::tie(a.subject_id, a.capture_date, a.session_id) <
               std::tie(b.subject_id, b.capture_date, b.session_id);
    });
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (i > 0 && out[i].subject_id == out[i - 1].subject_id) {
            out[i].ordinal = out[i - 1].ordinal + 1;
            if (out[i].gender != out[i - 1].gender)
                throw ValidationError("subject " + out[i].subject_id + " has conflicting genders");
        } else {
            out[i].ordinal = 0;
        }
    }
    return out;
}

std::vector<ProtocolPair> build_protocol(const std::vector<SessionRecord>& records, const Bucket& age_bucket,
                                         const Bucket& lapse_bucket)
{
    std::vector<ProtocolPair> out;
    for (std::size_t e = 0; e < records.size(); ++e) {
        const auto& enr = records[e];
        if (!age_bucket.contains(enr.age_weeks))
            continue;
        for (std::size_t p = 0; p < records.size(); ++p) {
            const auto& probe = records[p];
            if (probe.ordinal <= enr.ordinal)
                continue;
            ProtocolPair pair;
            pair.probe = p;
            pair.enrolled = e;
            pair.label = probe.subject_id == enr.subject_id ? PairLabel::genuine : PairLabel::imposter;
            pair.time_lapse_weeks = probe.age_weeks - enr.age_weeks;
            pair.enrollment_age_weeks = enr.age_weeks;
            if (pair.label == PairLabel::genuine && !lapse_bucket.contains(pair.time_lapse_weeks))
                continue;
            out.push_back(pair);
        }
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> expand_pair(const ProtocolPair& pair,
                                                             const std::vector<SessionRecord>& records,
                                                             const Manifest& manifest)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t p : records[pair.probe].rows)
        for (std::size_t e : records[pair.enrolled].rows)
            if (manifest.records[p].thumb == manifest.records[e].thumb)
                out.emplace_back(p, e);
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

void require_scores(const std::vector<double>& genuine, const std::vector<double>& imposter)
{
    if (genuine.empty() || imposter.empty())
        throw ValidationError("genuine and imposter score lists must be non-empty");
}

// Number of values >= t in an ascending list.
std::size_t count_at_least(const std::vector<double>& sorted, double t)
{
    return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
}

}  // namespace

OperatingPoint tar_at_far(const std::vector<double>& genuine, const std::vector<double>& imposter, double far_target)
{
    require_scores(genuine, imposter);
    if (!(far_target > 0.0 && far_target < 1.0))
        throw ValidationError("FAR target must lie in (0, 1)");
    std::vector<double> imp = imposter, gen = genuine;
    std::sort(imp.begin(), imp.end());
    std::sort(gen.begin(), gen.end());
    const double n = static_cast<double>(imp.size());
    // The accept rate only changes at imposter scores, so the smallest
    // admissible threshold is one of them or the next double above one.
    double best = std::nextafter(imp.back(), std::numeric_limits<double>::infinity());
    for (double v : imp) {
        for (double t : {v, std::nextafter(v, std::numeric_limits<double>::infinity())}) {
            if (t < best && static_cast<double>(count_at_least(imp, t)) / n <= far_target)
                best = t;
        }
    }
    return {static_cast<double>(count_at_least(gen, best)) / static_cast<double>(gen.size()), best};
}

std::vector<RocPoint> roc_curve(const std::vector<double>& genuine, const std::vector<double>& imposter)
{
    require_scores(genuine, imposter);
    std::vector<double> imp = imposter, gen = genuine;
    std::sort(imp.begin(), imp.end());
    std::sort(gen.begin(), gen.end());
    std::vector<double> thresholds = gen;
    thresholds.insert(thresholds.end(), imp.begin(), imp.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<RocPoint> out;
    out.push_back({-inf, 1.0, 1.0});
    for (double t : thresholds)
        out.push_back({t, static_cast<double>(count_at_least(imp, t)) / imp.size(),
                       static_cast<double>(count_at_least(gen, t)) / gen.size()});
    out.push_back({inf, 0.0, 0.0});
    return out;
}

double eer(const std::vector<double>& genuine, const std::vector<double>& imposter)
{
    const auto roc = roc_curve(genuine, imposter);
    // Thresholds ascend, so FAR - FRR goes from +1 down to -1.
    for (std::size_t i = 1; i < roc.size(); ++i) {
        const double d1 = roc[i - 1].far - (1.0 - roc[i - 1].tar);
        const double d2 = roc[i].far - (1.0 - roc[i].tar);
        if (d2 > 0.0)
            continue;
        if (d1 == d2)
            return roc[i].far;
        const double a = d1 / (d1 - d2);
        return roc[i - 1].far + a * (roc[i].far - roc[i - 1].far);
    }
    return 0.5;
}

int mate_rank(const SearchResult& r)
{
    for (const auto& c : r.ranking)
        if (c.subject_id == r.probe_subject)
            return c.rank;
    return 0;
}

double cmc(const std::vector<SearchResult>& results, int k, int* excluded)
{
    if (k < 1)
        throw ValidationError("rank must be positive");
    int hits = 0, total = 0, missing = 0;
    for (const auto& r : results) {
        const int rank = mate_rank(r);
        if (rank == 0) {
            ++missing;
            continue;
        }
        ++total;
        if (rank <= k)
            ++hits;
    }
    if (excluded)
        *excluded = missing;
    if (total == 0)
        throw ValidationError("no probe has a mate in the gallery");
    return static_cast<double>(hits) / total;
}

// ---------------------------------------------------------------------------
// Calibration

CalibrationResult calibrate_weights(const std::vector<ScoreBundle>& genuine, const std::vector<ScoreBundle>& imposter,
                                    double far_target, double grid_step)
{
    if (genuine.empty() || imposter.empty())
        throw ValidationError("calibration needs genuine and imposter bundles");
    if (!(grid_step > 0.0 && grid_step <= 1.0))
        throw ValidationError("grid step must lie in (0, 1]");
    const double steps_real = 1.0 / grid_step;
    const int steps = static_cast<int>(std::lround(steps_real));
    if (std::abs(steps_real - steps) > 1e-9)
        throw ValidationError("grid step must divide 1");
    for (const auto* list : {&genuine, &imposter})
        for (const auto& b : *list)
            if (!b.any())
                throw ValidationError("calibration bundle has no scores");

    CalibrationResult best;
    bool have = false;
    std::vector<double> gen(genuine.size()), imp(imposter.size());
    // Larger minutiae weight first, then larger external weight, so the first
    // strict improvement wins ties per the documented order.
    for (int m = steps; m >= 0; --m) {
        for (int l = steps - m; l >= 0; --l) {
            const int t = steps - m - l;
            FusionWeights w{static_cast<double>(m) / steps, static_cast<double>(t) / steps,
                            static_cast<double>(l) / steps};
            for (std::size_t i = 0; i < genuine.size(); ++i)
                gen[i] = match::fuse_scores(genuine[i], w);
            for (std::size_t i = 0; i < imposter.size(); ++i)
                imp[i] = match::fuse_scores(imposter[i], w);
            const double tar = tar_at_far(gen, imp, far_target).tar;
            if (!have || tar > best.tar) {
                best = {w, tar};
                have = true;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Evaluation driver

std::vector<ScoredPair> score_protocol(const std::vector<SessionRecord>& records, const Manifest& manifest,
                                       const std::vector<Template>& templates, const match::MatchConfig& config,
                                       int jobs)
{
    if (templates.size() != manifest.records.size())
        throw ValidationError("one template per manifest row is required");
    std::vector<match::SubjectRecord> subjects(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        subjects[i].subject_id = records[i].subject_id;
        subjects[i].gender = records[i].gender;
        for (std::size_t row : records[i].rows) {
            Template t = templates[row];
            t.thumb = manifest.records[row].thumb;
            t.age_weeks_at_capture = manifest.records[row].age_weeks;
            subjects[i].templates.push_back(std::move(t));
            if (config.external)
                subjects[i].image_paths.push_back(manifest.resolve(manifest.records[row]).string());
        }
    }
    const Bucket everything{"all", 0, std::numeric_limits<int>::max()};
    const auto pairs = build_protocol(records, everything, everything);
    std::vector<ScoredPair> out(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        out[i].pair = pairs[i];
        const auto res = match::authenticate_detailed(subjects[pairs[i].probe], subjects[pairs[i].enrolled], config);
        out[i].score = res.score;
        out[i].bundle = res.bundle;
    });
    return out;
}

EvalReport evaluate(const Manifest& manifest, const std::vector<Template>& templates,
                    const match::MatchConfig& config, const EvalSettings& settings, int jobs)
{
    const auto records = group_sessions(manifest);
    const auto scored = score_protocol(records, manifest, templates, config, jobs);
    const std::size_t n = records.size();
    std::vector<double> matrix(n * n, std::numeric_limits<double>::quiet_NaN());
    for (const auto& s : scored)
        matrix[s.pair.probe * n + s.pair.enrolled] = s.score;

    EvalReport report;
    report.far_targets = settings.far_targets;
    for (const auto& age : settings.age_buckets) {
        for (const auto& lapse : settings.lapse_buckets) {
            BucketRow row;
            row.age_bucket = age.label;
            row.lapse_bucket = lapse.label;
            std::vector<double> gen, imp;
            std::set<std::string> subjects;
            for (const auto& p : build_protocol(records, age, lapse)) {
                const double s = matrix[p.probe * n + p.enrolled];
                if (p.label == PairLabel::genuine) {
                    gen.push_back(s);
                    subjects.insert(records[p.probe].subject_id);
                } else {
                    imp.push_back(s);
                }
            }
            row.subjects = static_cast<int>(subjects.size());
            row.genuine_pairs = static_cast<int>(gen.size());
            row.imposter_pairs = static_cast<int>(imp.size());
            row.tar.assign(settings.far_targets.size(), std::nullopt);
            if (!gen.empty() && !imp.empty()) {
                for (std::size_t f = 0; f < settings.far_targets.size(); ++f)
                    row.tar[f] = tar_at_far(gen, imp, settings.far_targets[f]).tar;
                row.eer = eer(gen, imp);
            } else {
                report.warnings.push_back("bucket " + age.label + "/" + lapse.label + " is empty");
            }

            // Identification: first sessions in the age bucket form the
            // gallery; later sessions whose lapse fits are probes.
            std::vector<std::size_t> gallery;
            for (std::size_t i = 0; i < n; ++i)
                if (records[i].ordinal == 0 && age.contains(records[i].age_weeks))
                    gallery.push_back(i);
            std::vector<SearchResult> results;
            for (std::size_t p = 0; p < n && !gallery.empty(); ++p) {
                if (records[p].ordinal == 0)
                    continue;
                const auto mate = std::find_if(gallery.begin(), gallery.end(), [&](std::size_t g) {
                    return records[g].subject_id == records[p].subject_id;
                });
                if (mate == gallery.end() || !lapse.contains(records[p].age_weeks - records[*mate].age_weeks))
                    continue;
                SearchResult r;
                r.probe_subject = records[p].subject_id;
                for (std::size_t g : gallery)
                    r.ranking.push_back({records[g].subject_id, matrix[p * n + g], 0});
                std::sort(r.ranking.begin(), r.ranking.end(), [](const auto& a, const auto& b) {
                    if (a.fused_score != b.fused_score)
                        return a.fused_score > b.fused_score;
                    return a.subject_id < b.subject_id;
                });
                for (std::size_t k = 0; k < r.ranking.size(); ++k)
                    r.ranking[k].rank = static_cast<int>(k) + 1;
                results.push_back(std::move(r));
            }
            row.probes = static_cast<int>(results.size());
            if (!results.empty()) {
                row.rank1 = cmc(results, 1);
                row.rank5 = cmc(results, 5);
            }
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string fixed4(const std::optional<double>& v)
{
    if (!v)
        return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

std::string far_label(double far)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "tar@far=%g%%", far * 100.0);
    return buf;
}

std::vector<std::vector<std::string>> report_cells(const EvalReport& report)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"age_bucket", "lapse_bucket", "subjects", "genuine_pairs", "imposter_pairs"};
    for (double f : report.far_targets)
        header.push_back(far_label(f));
    for (const char* h : {"eer", "probes", "rank1", "rank5"})
        header.emplace_back(h);
    rows.push_back(header);
    for (const auto& r : report.rows) {
        std::vector<std::string> cells{r.age_bucket, r.lapse_bucket, std::to_string(r.subjects),
                                       std::to_string(r.genuine_pairs), std::to_string(r.imposter_pairs)};
        for (const auto& t : r.tar)
            cells.push_back(fixed4(t));
        cells.push_back(fixed4(r.eer));
        cells.push_back(std::to_string(r.probes));
        cells.push_back(fixed4(r.rank1));
        cells.push_back(fixed4(r.rank5));
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

std::string report_csv(const EvalReport& report)
{
    std::string out;
    for (const auto& row : report_cells(report)) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i)
                out += ',';
            out += row[i];
        }
        out += '\n';
    }
    return out;
}

std::string report_table(const EvalReport& report)
{
    const auto rows = report_cells(report);
    std::vector<std::size_t> width(rows[0].size(), 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i)
            width[i] = std::max(width[i], row[i].size());
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i)
                out += "  ";
            // Labels left-aligned, numbers right-aligned.
            const std::string pad(width[i] - row[i].size(), ' ');
            out += i < 2 ? row[i] + pad : pad + row[i];
        }
        while (!out.empty() && out.back() == ' ')
            out.pop_back();
        out += '\n';
    }
    return out;
}

}  // namespace infantprints::eval
