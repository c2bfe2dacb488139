#include "infantprints/match.hpp"

#include "infantprints/extract.hpp"
#include "infantprints/image.hpp"
#include "infantprints/parallel.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <charconv>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace infantprints::match {

void MatchParams::validate() const
{
    if (!(pos_tolerance > 0.0) || !(angle_tolerance > 0.0))
        throw ValidationError("match tolerances must be positive");
    if (!(max_rotation >= 0.0) || !(rotation_step > 0.0))
        throw ValidationError("rotation search range must be non-negative with a positive step");
    if (neighbours < 1 || hypotheses < 1)
        throw ValidationError("neighbours and hypotheses must be positive");
}

// ---------------------------------------------------------------------------
// Minutiae matcher

namespace {

double wrap_pi(double a)
{
    return std::remainder(a, kTwoPi);
}

struct Neighbour {
    double dist;
    double bearing;  // direction to the neighbour, relative to the minutia
    double turn;     // neighbour direction relative to the minutia
};

struct Prepared {
    std::vector<Minutia> pts;
    std::vector<std::vector<Neighbour>> local;
};

Prepared prepare(const MinutiaeSet& set, double scale, int k)
{
    Prepared p;
    p.pts = set.minutiae;
    for (auto& m : p.pts) {
        m.x *= scale;
        m.y *= scale;
    }
    const std::size_t n = p.pts.size();
    p.local.resize(n);
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < n; ++i) {
        order.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i)
                order.emplace_back(std::hypot(p.pts[j].x - p.pts[i].x, p.pts[j].y - p.pts[i].y), j);
        const std::size_t take = std::min<std::size_t>(order.size(), static_cast<std::size_t>(k));
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end());
        for (std::size_t q = 0; q < take; ++q) {
            const auto& o = p.pts[order[q].second];
            const double bearing = angle_of(o.x - p.pts[i].x, o.y - p.pts[i].y);
            p.local[i].push_back({order[q].first, wrap_pi(bearing - p.pts[i].theta), wrap_pi(o.theta - p.pts[i].theta)});
        }
    }
    return p;
}

double local_similarity(const std::vector<Neighbour>& a, const std::vector<Neighbour>& b, double tol)
{
    double sim = 0.0;
    std::array<bool, 64> used{};
    for (const auto& na : a) {
        int best = -1;
        double best_cost = 1.0;
        const double dtol = tol + 0.12 * na.dist;
        for (std::size_t j = 0; j < b.size() && j < used.size(); ++j) {
            if (used[j])
                continue;
            const double dd = std::abs(na.dist - b[j].dist) / dtol;
            const double db = std::abs(wrap_pi(na.bearing - b[j].bearing)) / (kPi / 6);
            const double dt = std::abs(wrap_pi(na.turn - b[j].turn)) / (kPi / 6);
            const double cost = std::max({dd, db, dt});
            if (cost < best_cost) {
                best_cost = cost;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            used[static_cast<std::size_t>(best)] = true;
            sim += 1.0 - best_cost;
        }
    }
    return sim;
}

struct Alignment {
    double rotation;
    Vec2 pivot_b;  // b point mapped onto pivot_a
    Vec2 pivot_a;
};

Vec2 apply(const Alignment& al, const Minutia& m)
{
    const Vec2 r = rotate_about({m.x - al.pivot_b.x, m.y - al.pivot_b.y}, {0.0, 0.0}, al.rotation);
    return {r.x + al.pivot_a.x, r.y + al.pivot_a.y};
}

struct Pairing {
    int matched = 0;
    std::vector<std::pair<int, int>> pairs;
};

Pairing pair_up(const Prepared& a, const Prepared& b, const Alignment& al, double tol, double angle_tol,
                std::vector<std::tuple<double, int, int>>& scratch)
{
    scratch.clear();
    const double tol2 = tol * tol;
    for (std::size_t j = 0; j < b.pts.size(); ++j) {
        const Vec2 q = apply(al, b.pts[j]);
        const double qt = b.pts[j].theta + al.rotation;
        for (std::size_t i = 0; i < a.pts.size(); ++i) {
            const double dx = a.pts[i].x - q.x, dy = a.pts[i].y - q.y;
            const double d2 = dx * dx + dy * dy;
            if (d2 > tol2)
                continue;
            if (std::abs(wrap_pi(a.pts[i].theta - qt)) > angle_tol)
                continue;
            scratch.emplace_back(d2, static_cast<int>(i), static_cast<int>(j));
        }
    }
    std::sort(scratch.begin(), scratch.end());
    std::vector<char> used_a(a.pts.size(), 0), used_b(b.pts.size(), 0);
    Pairing out;
    for (const auto& [d2, i, j] : scratch) {
        if (used_a[static_cast<std::size_t>(i)] || used_b[static_cast<std::size_t>(j)])
            continue;
        used_a[static_cast<std::size_t>(i)] = 1;
        used_b[static_cast<std::size_t>(j)] = 1;
        out.pairs.emplace_back(i, j);
    }
    out.matched = static_cast<int>(out.pairs.size());
    return out;
}

// Least-squares rigid fit of the paired b points onto their a partners.
Alignment refit(const Prepared& a, const Prepared& b, const Pairing& p, double max_rotation)
{
    Vec2 ca{}, cb{};
    for (auto [i, j] : p.pairs) {
        ca.x += a.pts[static_cast<std::size_t>(i)].x;
        ca.y += a.pts[static_cast<std::size_t>(i)].y;
        cb.x += b.pts[static_cast<std::size_t>(j)].x;
        cb.y += b.pts[static_cast<std::size_t>(j)].y;
    }
    const double n = static_cast<double>(p.pairs.size());
    ca = {ca.x / n, ca.y / n};
    cb = {cb.x / n, cb.y / n};
    // Work in y-up coordinates so the fitted angle is counter-clockwise.
    double sc = 0.0, ss = 0.0;
    for (auto [i, j] : p.pairs) {
        const double ax = a.pts[static_cast<std::size_t>(i)].x - ca.x, ay = -(a.pts[static_cast<std::size_t>(i)].y - ca.y);
        const double bx = b.pts[static_cast<std::size_t>(j)].x - cb.x, by = -(b.pts[static_cast<std::size_t>(j)].y - cb.y);
        sc += bx * ax + by * ay;
        ss += bx * ay - by * ax;
    }
    double rot = std::atan2(ss, sc);
    rot = std::clamp(rot, -max_rotation, max_rotation);
    return {rot, cb, ca};
}

int align_and_count(const Prepared& a, const Prepared& b, const MatchParams& params, double tol)
{
    const std::size_t na = a.pts.size(), nb = b.pts.size();
    struct Hyp {
        double sim;
        int i, j;
    };
    std::vector<Hyp> hyps;
    hyps.reserve(na * nb);
    const double rot_limit = params.max_rotation + params.rotation_step / 2;
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < nb; ++j) {
            if (std::abs(wrap_pi(a.pts[i].theta - b.pts[j].theta)) > rot_limit)
                continue;
            hyps.push_back({local_similarity(a.local[i], b.local[j], tol), static_cast<int>(i), static_cast<int>(j)});
        }
    const std::size_t take = std::min<std::size_t>(hyps.size(), static_cast<std::size_t>(params.hypotheses));
    std::partial_sort(hyps.begin(), hyps.begin() + static_cast<std::ptrdiff_t>(take), hyps.end(),
                      [](const Hyp& x, const Hyp& y) {
                          if (x.sim != y.sim)
                              return x.sim > y.sim;
                          return std::tie(x.i, x.j) < std::tie(y.i, y.j);
                      });

    std::vector<std::tuple<double, int, int>> scratch;
    int best = 0;
    for (std::size_t h = 0; h < take; ++h) {
        const auto& pa = a.pts[static_cast<std::size_t>(hyps[h].i)];
        const auto& pb = b.pts[static_cast<std::size_t>(hyps[h].j)];
        double rot = std::round(wrap_pi(pa.theta - pb.theta) / params.rotation_step) * params.rotation_step;
        rot = std::clamp(rot, -params.max_rotation, params.max_rotation);
        Alignment al{rot, {pb.x, pb.y}, {pa.x, pa.y}};
        Pairing p = pair_up(a, b, al, tol, params.angle_tolerance, scratch);
        for (int iter = 0; iter < 2 && p.matched >= 2; ++iter) {
            const Alignment refined = refit(a, b, p, rot_limit);
            Pairing q = pair_up(a, b, refined, tol, params.angle_tolerance, scratch);
            if (q.matched <= p.matched)
                break;
            p = std::move(q);
        }
        best = std::max(best, p.matched);
        if (best == static_cast<int>(std::min(na, nb)))
            break;
    }
    return best;
}

}  // namespace

MinutiaeScore minutiae_match_detailed(const MinutiaeSet& a, const MinutiaeSet& b, const MatchParams& params)
{
    params.validate();
    MinutiaeScore out;
    if (a.empty() || b.empty()) {
        out.no_features = true;
        return out;
    }
    if (a.source_ppi <= 0 || b.source_ppi <= 0)
        throw ValidationError("minutiae sets need a positive ppi");
    // Everything is measured in a's pixel grid.
    const double tol = params.pos_tolerance * a.source_ppi / 1900.0;
    const Prepared pa = prepare(a, 1.0, params.neighbours);
    const Prepared pb = prepare(b, static_cast<double>(a.source_ppi) / b.source_ppi, params.neighbours);
    const int n = std::max(align_and_count(pa, pb, params, tol), align_and_count(pb, pa, params, tol));
    out.matched = n;
    out.score = 2.0 * n / static_cast<double>(a.size() + b.size());
    return out;
}

double minutiae_match(const MinutiaeSet& a, const MinutiaeSet& b, const MatchParams& params)
{
    return minutiae_match_detailed(a, b, params).score;
}

// ---------------------------------------------------------------------------
// Texture

double texture_match(const std::vector<float>& e, const std::vector<float>& p)
{
    if (e.size() != kEmbeddingDim || p.size() != kEmbeddingDim)
        throw ValidationError("embeddings must have dimension 192");
    double ee = 0.0, pp = 0.0, ep = 0.0;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        ee += static_cast<double>(e[i]) * e[i];
        pp += static_cast<double>(p[i]) * p[i];
        ep += static_cast<double>(e[i]) * p[i];
    }
    if (std::abs(ee - 1.0) > 1e-4 || std::abs(pp - 1.0) > 1e-4)
        throw ValidationError("embeddings must be unit vectors");
    return std::clamp(ep, -1.0, 1.0);
}

std::vector<float> fallback_embedding(const GrayImage& img)
{
    img.validate();
    constexpr int kGrid = 4;
    constexpr int kOrientBins = 8;
    constexpr int kFreqBins = 4;
    constexpr int kPerCell = kOrientBins + kFreqBins;
    static_assert(kGrid * kGrid * kPerCell == kEmbeddingDim);
    const std::vector<float> uniform(kEmbeddingDim, static_cast<float>(1.0 / std::sqrt(double(kEmbeddingDim))));

    const int w = img.width(), h = img.height();
    if (w < 3 || h < 3)
        return uniform;
    const double m = mean_intensity(img);
    double var = 0.0;
    for (float v : img.pixels())
        var += (v - m) * (v - m);
    if (var / (static_cast<double>(w) * h) < 1e-8)
        return uniform;

    const GrayImage n = extract::normalize_image(img);
    const auto field = extract::estimate_orientation_field(n, extract::ExtractParams::for_ppi(img.ppi()));

    // Centre the grid on the foreground centroid so small shifts cancel.
    double cx = 0.0, cy = 0.0, cnt = 0.0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (field.foreground(c, r)) {
                cx += c;
                cy += r;
                cnt += 1.0;
            }
    if (cnt == 0.0)
        return uniform;
    cx /= cnt;
    cy /= cnt;

    const double cell = 0.064 * img.ppi();
    const double x0 = cx - kGrid * cell / 2, y0 = cy - kGrid * cell / 2;
    // Ridge period bins in inches (about 7 to 12 px at 1000 ppi).
    const double period_lo = 0.006, period_hi = 0.013;

    std::vector<double> hist(kEmbeddingDim, 0.0);
    auto add_soft = [&](std::size_t base, int bins, double pos, bool cyclic, double weight) {
        const double f = std::floor(pos - 0.5);
        const double t = pos - 0.5 - f;
        for (int s = 0; s < 2; ++s) {
            int b = static_cast<int>(f) + s;
            if (cyclic)
                b = ((b % bins) + bins) % bins;
            else
                b = std::clamp(b, 0, bins - 1);
            hist[base + static_cast<std::size_t>(b)] += weight * (s == 0 ? 1.0 - t : t);
        }
    };

    const int step = std::max(4, static_cast<int>(std::lround(img.ppi() / 125.0)));
    for (int r = 1 + step / 2; r < h - 1; r += step) {
        for (int c = 1 + step / 2; c < w - 1; c += step) {
            if (!field.foreground(c, r))
                continue;
            const int gx = static_cast<int>(std::floor((c - x0) / cell));
            const int gy = static_cast<int>(std::floor((r - y0) / cell));
            if (gx < 0 || gy < 0 || gx >= kGrid || gy >= kGrid)
                continue;
            const std::size_t base = static_cast<std::size_t>(gy * kGrid + gx) * kPerCell;
            const double theta = field.angle_at_pixel(c, r);
            const double coh = field.coherence_at_pixel(c, r);
            add_soft(base, kOrientBins, theta / kPi * kOrientBins, true, coh);

            // Local frequency from the ratio of second- to first-derivative
            // energy across the ridges over a small window.
            double e1 = 0.0, e2 = 0.0;
            const int rad = step;
            for (int dr = -rad; dr <= rad; ++dr)
                for (int dc = -rad; dc <= rad; ++dc) {
                    const int rr = std::clamp(r + dr, 1, h - 2), cc = std::clamp(c + dc, 1, w - 2);
                    const double dx = 0.5 * (n.at(rr, cc + 1) - n.at(rr, cc - 1));
                    const double dy = 0.5 * (n.at(rr + 1, cc) - n.at(rr - 1, cc));
                    const double lap = n.at(rr, cc + 1) + n.at(rr, cc - 1) + n.at(rr + 1, cc) + n.at(rr - 1, cc) -
                                       4.0 * n.at(rr, cc);
                    e1 += dx * dx + dy * dy;
                    e2 += lap * lap;
                }
            if (e1 <= 1e-12 || e2 <= 0.0)
                continue;
            const double omega = std::sqrt(e2 / e1);
            const double period_in = kTwoPi / omega / img.ppi();
            const double pos = (period_in - period_lo) / (period_hi - period_lo) * kFreqBins;
            add_soft(base + kOrientBins, kFreqBins, pos, false, coh);
        }
    }

    double norm = 0.0;
    for (auto& v : hist) {
        v = std::sqrt(v);
        norm += v * v;
    }
    if (norm <= 0.0)
        return uniform;
    norm = std::sqrt(norm);
    std::vector<float> out(kEmbeddingDim);
    for (std::size_t i = 0; i < kEmbeddingDim; ++i)
        out[i] = static_cast<float>(hist[i] / norm);
    return out;
}

// ---------------------------------------------------------------------------
// External matcher

namespace {

std::string substitute(std::string cmd, const std::string& key, const std::string& value)
{
    for (std::size_t pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key, pos + value.size()))
        cmd.replace(pos, key.size(), value);
    return cmd;
}

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char ch : s) {
        if (ch == '\'')
            out += "'\\''";
        else
            out += ch;
    }
    return out + "'";
}

std::optional<double> parse_score(const std::string& text)
{
    const auto b = text.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return std::nullopt;
    const auto e = text.find_last_not_of(" \t\r\n");
    const std::string t = text.substr(b, e - b + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

struct RunResult {
    bool timed_out = false;
    int status = -1;
    std::string out;
};

RunResult run_shell(const std::string& command, double timeout_seconds)
{
    RunResult res;
    int fds[2];
    if (pipe(fds) != 0)
        return res;
    const pid_t pid = fork();
    if (pid < 0) {
        close(fds[0]);
        close(fds[1]);
        return res;
    }
    if (pid == 0) {
        setpgid(0, 0);
        dup2(fds[1], STDOUT_FILENO);
        close(fds[0]);
        close(fds[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(fds[1]);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    char buf[4096];
    while (true) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            res.timed_out = true;
            break;
        }
        pollfd pfd{fds[0], POLLIN, 0};
        const int rc = poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
        if (rc < 0 && errno != EINTR)
            break;
        if (rc <= 0)
            continue;
        const ssize_t got = read(fds[0], buf, sizeof buf);
        if (got <= 0)
            break;
        if (res.out.size() < (1u << 16))
            res.out.append(buf, static_cast<std::size_t>(got));
    }
    close(fds[0]);
    if (res.timed_out) {
        kill(-pid, SIGKILL);
        kill(pid, SIGKILL);
    }
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    res.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::filesystem::path scratch_path(const char* tag)
{
    static std::atomic<unsigned long> counter{0};
    const auto id = counter.fetch_add(1);
    return std::filesystem::temp_directory_path() /
           ("infantprints_" + std::to_string(getpid()) + "_" + std::to_string(id) + "_" + tag + ".pgm");
}

}  // namespace

std::optional<double> external_match(const GrayImage& probe, const GrayImage& enrolled,
                                     const std::optional<ExternalConnector>& connector, std::string* warning)
{
    if (!connector || connector->command.empty())
        return std::nullopt;
    auto fail = [&](const std::string& why) -> std::optional<double> {
        if (warning)
            *warning = "external matcher: " + why;
        return std::nullopt;
    };
    const auto probe_path = scratch_path("probe");
    const auto enrolled_path = scratch_path("enrolled");
    try {
        write_pgm(probe, probe_path);
        write_pgm(enrolled, enrolled_path);
    } catch (const std::exception& e) {
        return fail(e.what());
    }
    std::string cmd = substitute(connector->command, "{probe}", shell_quote(probe_path.string()));
    cmd = substitute(cmd, "{enrolled}", shell_quote(enrolled_path.string()));
    const RunResult run = run_shell(cmd, connector->timeout_seconds);
    std::error_code ec;
    std::filesystem::remove(probe_path, ec);
    std::filesystem::remove(enrolled_path, ec);
    if (run.timed_out)
        return fail("timed out");
    if (run.status != 0)
        return fail("exit status " + std::to_string(run.status));
    const auto score = parse_score(run.out);
    if (!score)
        return fail("unparsable output '" + run.out.substr(0, 60) + "'");
    return score;
}

// ---------------------------------------------------------------------------
// Normalization and fusion

void NormalizationBounds::validate() const
{
    for (const Bounds* b : {&minutiae, &texture, &external})
        if (!(b->max > b->min) || !std::isfinite(b->min) || !std::isfinite(b->max))
            throw ValidationError("normalization bounds need max > min");
}

ScoreBundle normalize_scores(const ScoreBundle& raw, const NormalizationBounds& bounds)
{
    bounds.validate();
    auto norm = [](const std::optional<double>& s, const Bounds& b) -> std::optional<double> {
        if (!s)
            return std::nullopt;
        return std::clamp((*s - b.min) / (b.max - b.min), 0.0, 1.0);
    };
    return {norm(raw.minutiae, bounds.minutiae), norm(raw.texture, bounds.texture),
            norm(raw.external, bounds.external)};
}

double fuse_scores(const ScoreBundle& norm, const FusionWeights& w)
{
    validate(w);
    if (!norm.any())
        throw ValidationError("fusion needs at least one score");
    double num = 0.0, den = 0.0;
    auto add = [&](const std::optional<double>& s, double weight) {
        if (s) {
            num += weight * *s;
            den += weight;
        }
    };
    add(norm.minutiae, w.minutiae);
    add(norm.texture, w.texture);
    add(norm.external, w.external);
    // Present slots that all carry zero weight fall back to a plain mean.
    if (den <= 0.0) {
        int n = 0;
        num = 0.0;
        for (const auto* s : {&norm.minutiae, &norm.texture, &norm.external})
            if (*s) {
                num += **s;
                ++n;
            }
        return std::clamp(num / n, 0.0, 1.0);
    }
    return std::clamp(num / den, 0.0, 1.0);
}

double gender_gate(Gender a, Gender b, double fused)
{
    if (a != Gender::unknown && b != Gender::unknown && a != b)
        return 0.0;
    return fused;
}

double gender_gate(const Template& a, const Template& b, double fused)
{
    return gender_gate(a.gender, b.gender, fused);
}

double multi_sample_fuse(const std::vector<double>& scores)
{
    if (scores.empty())
        throw ValidationError("average fusion needs at least one score");
    return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

// ---------------------------------------------------------------------------
// Authentication and search

void Diagnostics::report_external_failure(const std::string& message)
{
    failures_.fetch_add(1);
    std::lock_guard lock(mutex_);
    // Keep the log bounded on large batches.
    if (messages_.size() < 100)
        messages_.push_back(message);
}

std::vector<std::string> Diagnostics::messages() const
{
    std::lock_guard lock(mutex_);
    return messages_;
}

namespace {

GrayImage prepare_external(const std::string& path, double lambda)
{
    const GrayImage img = read_pgm(path);
    const auto params = extract::ExtractParams::for_ppi(img.ppi());
    const GrayImage norm = extract::normalize_image(img);
    const auto field = extract::estimate_orientation_field(norm, params);
    const GrayImage enhanced = extract::enhance(norm, field, params);
    return aging::downscale_for_external(aging::age_image(enhanced, lambda));
}

}  // namespace

ScoreBundle pair_bundle(const Template& probe, const Template& enrolled, const MatchConfig& config,
                        const std::string& probe_image, const std::string& enrolled_image)
{
    const Template aged = aging::age_enrollment(enrolled, config.policy);
    ScoreBundle raw;
    raw.minutiae = minutiae_match(probe.minutiae, aged.minutiae, config.params);
    if (probe.embedding && enrolled.embedding)
        raw.texture = texture_match(*probe.embedding, *enrolled.embedding);
    if (config.external && !probe_image.empty() && !enrolled_image.empty()) {
        const double lambda = enrolled.aged ? 1.0 : aging::select_scale_factor(enrolled.age_weeks_at_capture, config.policy);
        std::string warning;
        try {
            raw.external = external_match(prepare_external(probe_image, 1.0), prepare_external(enrolled_image, lambda),
                                          config.external, &warning);
        } catch (const std::exception& e) {
            warning = std::string("external matcher: ") + e.what();
        }
        if (!raw.external && config.diagnostics)
            config.diagnostics->report_external_failure(warning);
    }
    return normalize_scores(raw, config.bounds);
}

double pair_score(const Template& probe, const Template& enrolled, const MatchConfig& config,
                  const std::string& probe_image, const std::string& enrolled_image)
{
    return fuse_scores(pair_bundle(probe, enrolled, config, probe_image, enrolled_image), config.weights);
}

AuthResult authenticate_detailed(const SubjectRecord& probe, const SubjectRecord& enrolled, const MatchConfig& config)
{
    auto image = [](const SubjectRecord& r, std::size_t i) {
        return i < r.image_paths.size() ? r.image_paths[i] : std::string();
    };
    std::vector<double> scores;
    double sums[3] = {0, 0, 0};
    int counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < probe.templates.size(); ++i)
        for (std::size_t j = 0; j < enrolled.templates.size(); ++j) {
            if (probe.templates[i].thumb != enrolled.templates[j].thumb)
                continue;
            const ScoreBundle b =
                pair_bundle(probe.templates[i], enrolled.templates[j], config, image(probe, i), image(enrolled, j));
            scores.push_back(fuse_scores(b, config.weights));
            const std::optional<double>* slots[3] = {&b.minutiae, &b.texture, &b.external};
            for (int k = 0; k < 3; ++k)
                if (*slots[k]) {
                    sums[k] += **slots[k];
                    ++counts[k];
                }
        }
    if (scores.empty())
        throw ValidationError("no same-thumb template pairs between " + probe.subject_id + " and " +
                              enrolled.subject_id);
    AuthResult out;
    out.comparisons = static_cast<int>(scores.size());
    out.score = gender_gate(probe.gender, enrolled.gender, multi_sample_fuse(scores));
    const bool gated = gender_gate(probe.gender, enrolled.gender, 1.0) == 0.0;
    std::optional<double>* slots[3] = {&out.bundle.minutiae, &out.bundle.texture, &out.bundle.external};
    for (int k = 0; k < 3; ++k)
        if (counts[k] > 0)
            *slots[k] = gated ? 0.0 : sums[k] / counts[k];
    return out;
}

double authenticate(const SubjectRecord& probe, const SubjectRecord& enrolled, const MatchConfig& config)
{
    return authenticate_detailed(probe, enrolled, config).score;
}

std::vector<RankedCandidate> search(const SubjectRecord& probe, const std::vector<SubjectRecord>& gallery,
                                    const MatchConfig& config, int jobs)
{
    if (gallery.empty())
        throw ValidationError("search needs a non-empty gallery");
    std::vector<RankedCandidate> out(gallery.size());
    parallel_for(gallery.size(), jobs, [&](std::size_t g) {
        out[g].subject_id = gallery[g].subject_id;
        out[g].fused_score = authenticate(probe, gallery[g], config);
    });
    std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.fused_score != b.fused_score)
            return a.fused_score > b.fused_score;
        return a.subject_id < b.subject_id;
    });
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i].rank = static_cast<int>(i) + 1;
    return out;
}

}  // namespace infantprints::match
