#include "infantprints/synth.hpp"

#include "infantprints/image.hpp"
#include "infantprints/manifest.hpp"
#include "infantprints/parallel.hpp"
#include "infantprints/template_codec.hpp"

#include <algorithm>
#include <cstdio>

namespace infantprints::synth {

// ---------------------------------------------------------------------------
// RNG

namespace {

std::uint64_t splitmix(std::uint64_t& x)
{
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts)
{
    std::uint64_t state = 0x6a09e667f3bcc908ull;
    std::uint64_t out = 0;
    for (auto p : parts) {
        state ^= p + 0x9e3779b97f4a7c15ull + (state << 6) + (state >> 2);
        out = splitmix(state);
    }
    return out;
}

std::uint64_t Rng::next()
{
    return splitmix(state_);
}

double Rng::uniform()
{
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int lo, int hi)
{
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(next() % span);
}

double Rng::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = 0.0;
    while (u <= 1e-300)
        u = uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    spare_ = r * std::sin(kTwoPi * v);
    has_spare_ = true;
    return r * std::cos(kTwoPi * v);
}

// ---------------------------------------------------------------------------
// Names

std::string to_string(PatternClass c)
{
    switch (c) {
    case PatternClass::arch:
        return "arch";
    case PatternClass::loop:
        return "loop";
    case PatternClass::whorl:
        return "whorl";
    }
    return "loop";
}

PatternClass parse_pattern_class(const std::string& s)
{
    if (s == "arch")
        return PatternClass::arch;
    if (s == "loop")
        return PatternClass::loop;
    if (s == "whorl")
        return PatternClass::whorl;
    throw ValidationError("unknown pattern class: " + s);
}

std::string to_string(Profile p)
{
    switch (p) {
    case Profile::clean:
        return "clean";
    case Profile::mild:
        return "mild";
    case Profile::hard:
        return "hard";
    }
    return "mild";
}

Profile parse_profile(const std::string& s)
{
    if (s == "clean")
        return Profile::clean;
    if (s == "mild")
        return Profile::mild;
    if (s == "hard")
        return Profile::hard;
    throw ValidationError("unknown profile: " + s);
}

ProfileRanges profile_ranges(Profile p)
{
    switch (p) {
    case Profile::clean:
        return {kPi / 36, 6.0, 0.0, 0.0, 0.0, 0.0};
    case Profile::mild:
        return {kPi / 18, 12.0, 0.08, 1.0, 0.3, 0.0};
    case Profile::hard:
        return {kPi / 9, 20.0, 0.18, 2.5, 0.6, 3.0};
    }
    return {};
}

// ---------------------------------------------------------------------------
// Master fingers

namespace {

double distance_to_segment(double x, double y, Vec2 a, Vec2 b)
{
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = 0.0;
    if (len2 > 0.0)
        t = std::clamp(((x - a.x) * vx + (y - a.y) * vy) / len2, 0.0, 1.0);
    return std::hypot(x - (a.x + t * vx), y - (a.y + t * vy));
}

double wrapped(double d)
{
    return std::remainder(d, kTwoPi);
}

double ellipse_radius(const MasterFinger& m, double x, double y)
{
    const double u = (x - m.finger_center.x) / m.finger_rx;
    const double v = (y - m.finger_center.y) / m.finger_ry;
    return std::sqrt(u * u + v * v);
}

// Direction of a spiral's minutia: along the ridge flow, toward the side
// where the spiral adds a ridge (the branch side).
double spiral_direction(const MasterFinger& m, int index)
{
    const Spiral& s = m.spirals[static_cast<std::size_t>(index)];
    constexpr double h = 0.5;
    const double gx = wrapped(m.phase_excluding(s.x + h, s.y, index) - m.phase_excluding(s.x - h, s.y, index)) / (2 * h);
    const double gy = wrapped(m.phase_excluding(s.x, s.y + h, index) - m.phase_excluding(s.x, s.y - h, index)) / (2 * h);
    const double gn = std::hypot(gx, gy);
    const Vec2 g{gx / gn, gy / gn};
    const Vec2 t{-g.y, g.x};
    const double T = m.ridge_period;

    double best_span = -1.0;
    double best_theta = 0.0;
    for (int side : {1, -1}) {
        const double cx = s.x + side * 0.5 * T * t.x;
        const double cy = s.y + side * 0.5 * T * t.y;
        constexpr int kSteps = 64;
        double span = 0.0;
        double prev = m.phase(cx - T * g.x, cy - T * g.y);
        for (int k = 1; k <= kSteps; ++k) {
            const double u = -T + 2.0 * T * k / kSteps;
            const double cur = m.phase(cx + u * g.x, cy + u * g.y);
            span += wrapped(cur - prev);
            prev = cur;
        }
        if (std::abs(span) > best_span) {
            best_span = std::abs(span);
            best_theta = angle_of(side * t.x, side * t.y);
        }
    }
    return best_theta;
}

}  // namespace

double MasterFinger::phase_excluding(double x, double y, int skip) const
{
    const double wx = x + warp_amp[0] * std::sin(kTwoPi * y / warp_len[0] + warp_phase[0]);
    const double wy = y + warp_amp[1] * std::sin(kTwoPi * x / warp_len[1] + warp_phase[1]);
    const double d = distance_to_segment(wx, wy, core, core_tail);
    double phi = kTwoPi * d / ridge_period + phase_offset;
    for (std::size_t n = 0; n < spirals.size(); ++n) {
        if (static_cast<int>(n) == skip)
            continue;
        phi += spirals[n].polarity * std::atan2(y - spirals[n].y, x - spirals[n].x);
    }
    return phi;
}

double MasterFinger::phase(double x, double y) const
{
    return phase_excluding(x, y, -1);
}

MasterFinger generate_master(std::uint64_t seed, PatternClass pattern, const Canvas& canvas)
{
    if (canvas.width < 64 || canvas.height < 64 || canvas.ppi <= 0)
        throw ValidationError("canvas too small for a master finger");
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(pattern), 0x6d6173746572ull}));
    MasterFinger m;
    m.id = "master-" + std::to_string(seed);
    m.pattern = pattern;
    m.canvas = canvas;
    const double scale = canvas.ppi / 1000.0;
    m.ridge_period = rng.uniform(8.0, 10.0) * scale;
    const double W = canvas.width, H = canvas.height;
    m.finger_center = {W / 2 + rng.uniform(-0.03, 0.03) * W, H / 2 + rng.uniform(-0.03, 0.03) * H};
    m.finger_rx = W * rng.uniform(0.37, 0.41);
    m.finger_ry = H * rng.uniform(0.43, 0.46);
    for (int a = 0; a < 2; ++a) {
        m.warp_amp[a] = rng.uniform(1.0, 4.0) * scale;
        m.warp_len[a] = rng.uniform(180.0, 320.0) * scale;
        m.warp_phase[a] = rng.uniform(0.0, kTwoPi);
    }

    const Vec2 c = m.finger_center;
    switch (pattern) {
    case PatternClass::arch: {
        // Far centre below the print: gently curved arcs.
        const double far = H * rng.uniform(1.2, 2.5);
        m.core = {c.x + rng.uniform(-0.2, 0.2) * W, c.y + far};
        m.core_tail = m.core;
        break;
    }
    case PatternClass::loop: {
        // Distance to a segment opening away from the core gives a loop.
        m.core = {c.x + rng.uniform(-0.12, 0.12) * W, c.y + rng.uniform(-0.25, -0.05) * H};
        const double dir = kPi / 2 + rng.uniform(-0.5, 0.5);  // roughly downward on screen
        const double len = 2.0 * H;
        m.core_tail = {m.core.x + len * std::cos(dir), m.core.y + len * std::sin(dir)};
        break;
    }
    case PatternClass::whorl: {
        m.core = {c.x + rng.uniform(-0.1, 0.1) * W, c.y + rng.uniform(-0.1, 0.1) * H};
        const double dir = rng.uniform(0.0, kTwoPi);
        const double len = rng.uniform(0.0, 2.0) * m.ridge_period;
        m.core_tail = {m.core.x + len * std::cos(dir), m.core.y + len * std::sin(dir)};
        break;
    }
    }
    // A valley along the singular locus keeps the core free of minutiae.
    m.phase_offset = kPi;

    const double T = m.ridge_period;
    const double edge_margin = 3.5 * T;
    const double min_sep = 2.5 * T;
    const double core_clear = 2.5 * T;
    const int target = rng.uniform_int(22, 42);
    int attempts = 0;
    while (static_cast<int>(m.spirals.size()) < target && attempts < 20000) {
        ++attempts;
        const double x = rng.uniform(0.0, W);
        const double y = rng.uniform(0.0, H);
        const double shrink = 1.0 - edge_margin / std::min(m.finger_rx, m.finger_ry);
        if (ellipse_radius(m, x, y) > shrink)
            continue;
        if (distance_to_segment(x, y, m.core, m.core_tail) < core_clear)
            continue;
        bool ok = true;
        for (const auto& s : m.spirals)
            if (std::hypot(s.x - x, s.y - y) < min_sep) {
                ok = false;
                break;
            }
        if (!ok)
            continue;
        m.spirals.push_back({x, y, rng.uniform() < 0.5 ? 1 : -1});
    }

    m.minutiae.source_ppi = canvas.ppi;
    for (std::size_t i = 0; i < m.spirals.size(); ++i)
        m.minutiae.minutiae.push_back({m.spirals[i].x, m.spirals[i].y, spiral_direction(m, static_cast<int>(i))});
    return m;
}

// ---------------------------------------------------------------------------
// Impressions

void ImpressionParams::validate() const
{
    if (!(growth_lambda >= 1.0) || !std::isfinite(growth_lambda))
        throw ValidationError("growth_lambda must be >= 1");
    if (!std::isfinite(rotation) || !std::isfinite(translation.x) || !std::isfinite(translation.y))
        throw ValidationError("transform must be finite");
    if (!(noise_sigma >= 0.0) || !(blur_radius >= 0.0) || !(distortion >= 0.0))
        throw ValidationError("degradation amounts must be non-negative");
    if (!(moisture >= 0.0 && moisture <= 1.0))
        throw ValidationError("moisture must lie in [0,1]");
}

Vec2 transform_point(const MasterFinger& master, const ImpressionParams& params, Vec2 q)
{
    const Vec2 c{master.canvas.width / 2.0, master.canvas.height / 2.0};
    const Vec2 r = rotate_about({q.x - c.x, q.y - c.y}, {0.0, 0.0}, params.rotation);
    return {c.x + params.translation.x + params.growth_lambda * r.x,
            c.y + params.translation.y + params.growth_lambda * r.y};
}

namespace {

Vec2 inverse_transform(const MasterFinger& master, const ImpressionParams& params, Vec2 p)
{
    const Vec2 c{master.canvas.width / 2.0, master.canvas.height / 2.0};
    const Vec2 d{(p.x - c.x - params.translation.x) / params.growth_lambda,
                 (p.y - c.y - params.translation.y) / params.growth_lambda};
    const Vec2 r = rotate_about(d, {0.0, 0.0}, -params.rotation);
    return {c.x + r.x, c.y + r.y};
}

void motion_blur(GrayImage& img, double radius, double angle)
{
    if (radius <= 0.0)
        return;
    const int taps = std::max(1, static_cast<int>(std::ceil(radius)));
    const Vec2 d = direction_of(angle);
    const GrayImage src = img;
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) {
            double acc = 0.0;
            double wsum = 0.0;
            for (int k = -taps; k <= taps; ++k) {
                const double t = k * radius / taps;
                const double x = c + t * d.x, y = r + t * d.y;
                const int xi = static_cast<int>(std::lround(x)), yi = static_cast<int>(std::lround(y));
                acc += src.clamped(yi, xi);
                wsum += 1.0;
            }
            img.at(r, c) = static_cast<float>(acc / wsum);
        }
    }
}

}  // namespace

Impression render_impression(const MasterFinger& master, const ImpressionParams& params)
{
    params.validate();
    Rng rng(derive_seed({params.rng_seed, 0x696d70ull}));
    const int W = master.canvas.width, H = master.canvas.height;
    GrayImage img(W, H, master.canvas.ppi, 1.0f);

    // Smooth displacement field: a few random low-frequency sinusoids.
    struct Wave {
        double amp, kx, ky, phase;
    };
    std::vector<Wave> waves_x, waves_y;
    if (params.distortion > 0.0) {
        for (int i = 0; i < 3; ++i) {
            const double len = rng.uniform(120.0, 260.0);
            const double dir = rng.uniform(0.0, kTwoPi);
            waves_x.push_back({params.distortion / 3.0 * rng.uniform(0.5, 1.5), kTwoPi / len * std::cos(dir),
                               kTwoPi / len * std::sin(dir), rng.uniform(0.0, kTwoPi)});
            const double dir2 = rng.uniform(0.0, kTwoPi);
            waves_y.push_back({params.distortion / 3.0 * rng.uniform(0.5, 1.5), kTwoPi / len * std::cos(dir2),
                               kTwoPi / len * std::sin(dir2), rng.uniform(0.0, kTwoPi)});
        }
    }

    const double bias = 0.8 * params.moisture;
    const double edge_soft = 0.04;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            Vec2 p{static_cast<double>(c), static_cast<double>(r)};
            for (const auto& w : waves_x)
                p.x += w.amp * std::sin(w.kx * c + w.ky * r + w.phase);
            for (const auto& w : waves_y)
                p.y += w.amp * std::sin(w.kx * c + w.ky * r + w.phase);
            const Vec2 q = inverse_transform(master, params, p);
            const double er = ellipse_radius(master, q.x, q.y);
            if (er >= 1.0 + edge_soft)
                continue;
            const double s = std::cos(master.phase(q.x, q.y)) + bias;
            double v = 0.5 - 0.5 * std::clamp(1.5 * s, -1.0, 1.0);
            if (er > 1.0 - edge_soft) {
                // Fade to background across the finger edge.
                const double t = (er - (1.0 - edge_soft)) / (2.0 * edge_soft);
                v = v * (1.0 - t) + 1.0 * t;
            }
            img.at(r, c) = static_cast<float>(v);
        }
    }

    if (params.blur_radius > 0.0)
        motion_blur(img, params.blur_radius, rng.uniform(0.0, kPi));
    if (params.noise_sigma > 0.0) {
        for (auto& v : img.pixels())
            v = static_cast<float>(std::clamp(v + params.noise_sigma * rng.normal(), 0.0, 1.0));
    }

    Impression out;
    out.image = std::move(img);
    out.ground_truth.source_ppi = master.canvas.ppi;
    for (const auto& m : master.minutiae.minutiae) {
        const Vec2 p = transform_point(master, params, {m.x, m.y});
        if (p.x < 0.0 || p.y < 0.0 || p.x >= W || p.y >= H)
            continue;
        out.ground_truth.minutiae.push_back({p.x, p.y, wrap_two_pi(m.theta + params.rotation)});
    }
    if (out.ground_truth.empty() && !master.minutiae.empty())
        throw ValidationError("impression transform pushes every minutia off the canvas");
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark datasets

namespace {

// Days since 1970-01-01 to a civil date.
std::string civil_date(long days)
{
    days += 719468;
    const long era = (days >= 0 ? days : days - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(days - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned mth = mp < 10 ? mp + 3 : mp - 9;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04ld-%02u-%02u", y + (mth <= 2), mth, d);
    return buf;
}

std::string subject_name(int i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "S%04d", i + 1);
    return buf;
}

}  // namespace

BenchmarkSummary build_benchmark(const BenchmarkSpec& spec, const std::filesystem::path& out_dir)
{
    if (spec.n_subjects < 2)
        throw ValidationError("a benchmark needs at least two subjects");
    if (spec.sessions < 1 || spec.impressions_per_thumb < 1)
        throw ValidationError("sessions and impressions must be positive");

    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "truth");
    const ProfileRanges ranges = profile_ranges(spec.profile);

    struct Job {
        int subject;
        int session;
        Thumb thumb;
        int impression;
    };
    struct SubjectPlan {
        Gender gender;
        int enroll_age;
        std::vector<int> session_age;
        long birth_day;
        MasterFinger thumbs[2];
    };

    std::vector<SubjectPlan> plans(static_cast<std::size_t>(spec.n_subjects));
    parallel_for(plans.size(), spec.jobs, [&](std::size_t s) {
        Rng rng(derive_seed({spec.seed, 0x7375626aull, s}));
        auto& p = plans[s];
        p.gender = rng.uniform() < 0.43 ? Gender::male : Gender::female;
        p.enroll_age = rng.uniform_int(1, 12);
        p.birth_day = 17897 + rng.uniform_int(0, 300);  // births during 2019
        p.session_age.push_back(p.enroll_age);
        for (int k = 1; k < spec.sessions; ++k)
            p.session_age.push_back(p.session_age.back() + rng.uniform_int(12, 26));
        for (int t = 0; t < 2; ++t) {
            const auto cls = static_cast<PatternClass>(rng.uniform_int(0, 2));
            p.thumbs[t] = generate_master(derive_seed({spec.seed, s, static_cast<std::uint64_t>(t)}), cls, spec.canvas);
        }
    });

    std::vector<Job> jobs;
    for (int s = 0; s < spec.n_subjects; ++s)
        for (int k = 0; k < spec.sessions; ++k)
            for (Thumb th : {Thumb::left, Thumb::right})
                for (int i = 0; i < spec.impressions_per_thumb; ++i)
                    jobs.push_back({s, k, th, i});

    eval::Manifest manifest;
    manifest.records.resize(jobs.size());
    parallel_for(jobs.size(), spec.jobs, [&](std::size_t j) {
        const Job& job = jobs[j];
        const SubjectPlan& plan = plans[static_cast<std::size_t>(job.subject)];
        const MasterFinger& master = plan.thumbs[job.thumb == Thumb::left ? 0 : 1];
        Rng rng(derive_seed({spec.seed, 0x696d7072ull, static_cast<std::uint64_t>(job.subject),
                             static_cast<std::uint64_t>(job.session), static_cast<std::uint64_t>(job.thumb),
                             static_cast<std::uint64_t>(job.impression)}));
        ImpressionParams ip;
        ip.growth_lambda = std::pow(spec.growth_per_session, job.session);
        ip.rotation = rng.uniform(-ranges.max_rotation, ranges.max_rotation);
        ip.translation = {rng.uniform(-ranges.max_translation, ranges.max_translation),
                          rng.uniform(-ranges.max_translation, ranges.max_translation)};
        ip.noise_sigma = ranges.noise_sigma;
        ip.blur_radius = rng.uniform(0.0, ranges.max_blur);
        ip.moisture = rng.uniform(0.0, ranges.max_moisture);
        ip.distortion = ranges.distortion;
        ip.rng_seed = rng.next();
        const Impression imp = render_impression(master, ip);

        const std::string subject = subject_name(job.subject);
        const std::string session = "s" + std::to_string(job.session + 1);
        const std::string stem = subject + "_" + session + "_" + (job.thumb == Thumb::left ? "L" : "R") + "_" +
                                 std::to_string(job.impression + 1);
        write_pgm(imp.image, out_dir / "images" / (stem + ".pgm"));

        Template truth;
        truth.subject_id = subject;
        truth.session_id = session;
        truth.thumb = job.thumb;
        truth.gender = plan.gender;
        truth.age_weeks_at_capture = plan.session_age[static_cast<std::size_t>(job.session)];
        truth.minutiae = imp.ground_truth;
        save_template(truth, out_dir / "truth" / (stem + ".iptf"));

        auto& rec = manifest.records[j];
        rec.subject_id = subject;
        rec.session_id = session;
        rec.capture_date = civil_date(plan.birth_day + 7L * truth.age_weeks_at_capture);
        rec.age_weeks = truth.age_weeks_at_capture;
        rec.gender = plan.gender;
        rec.thumb = job.thumb;
        rec.path = "images/" + stem + ".pgm";
    });

    BenchmarkSummary summary;
    summary.manifest = out_dir / "manifest.csv";
    eval::write_manifest(manifest, summary.manifest);
    summary.images = static_cast<int>(jobs.size());
    summary.templates = static_cast<int>(jobs.size());
    return summary;
}

}  // namespace infantprints::synth
