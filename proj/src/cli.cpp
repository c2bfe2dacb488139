#include "infantprints/cli.hpp"

#include "infantprints/config.hpp"
#include "infantprints/eval.hpp"
#include "infantprints/image.hpp"
#include "infantprints/manifest.hpp"
#include "infantprints/minmap.hpp"
#include "infantprints/pipeline.hpp"
#include "infantprints/synth.hpp"
#include "infantprints/template_codec.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace infantprints::cli {

namespace {

// Thrown for bad input data; maps to kExitData.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::string config_path;
    std::vector<std::string> overrides;
    int jobs = 1;
    bool dump_config = false;
};

Config effective_config(const Globals& g)
{
    Config c;
    if (!g.config_path.empty())
        c = load_config(g.config_path);
    for (const auto& kv : g.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
}

std::string fixed4(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

match::SubjectRecord record_from_files(const std::vector<std::string>& files, const std::vector<std::string>& images)
{
    if (!images.empty() && images.size() != files.size())
        throw DataError("image list must be parallel to the template list");
    match::SubjectRecord r;
    for (const auto& f : files)
        r.templates.push_back(load_template(f));
    r.subject_id = r.templates.front().subject_id;
    r.gender = r.templates.front().gender;
    for (const auto& t : r.templates)
        if (t.gender != r.gender)
            throw DataError("templates of one subject disagree on gender");
    r.image_paths = images;
    return r;
}

int finish_external(const match::Diagnostics& diag, std::ostream& err)
{
    if (diag.external_failures() == 0)
        return kExitOk;
    for (const auto& m : diag.messages())
        err << "warning: " << m << '\n';
    err << "warning: " << diag.external_failures() << " external comparison(s) failed\n";
    return kExitExternal;
}

// ---------------------------------------------------------------------------

struct EnrollArgs {
    std::vector<std::string> images;
    std::string subject = "unknown";
    std::string session = "s1";
    std::string thumb;
    int age_weeks = -1;
    std::string gender = "unknown";
    std::string out_dir;
    bool probe = false;
    std::string dump_map;
    bool list = false;
};

int cmd_enroll(const EnrollArgs& a, const Config& config, std::ostream& out, std::ostream& err)
{
    CaptureInfo info;
    info.subject_id = a.subject;
    info.session_id = a.session;
    info.age_weeks = a.age_weeks;
    try {
        info.thumb = parse_thumb(a.thumb);
        info.gender = parse_gender(a.gender);
    } catch (const ValidationError& e) {
        throw DataError(e.what());
    }
    if (a.age_weeks < 0 || a.age_weeks >= kMaxAgeWeeks)
        throw DataError("--age-weeks must lie in [0, " + std::to_string(kMaxAgeWeeks) + ")");

    int status = kExitOk;
    for (const auto& path : a.images) {
        const GrayImage img = load_image(path, config);
        std::vector<extract::DetectedMinutia> found;
        Template t = template_from_image(img, info, config, &found);
        if (!a.probe)
            t = aging::age_enrollment(t, config.aging);
        std::filesystem::path dest = std::filesystem::path(path).replace_extension(".iptf");
        if (!a.out_dir.empty()) {
            std::filesystem::create_directories(a.out_dir);
            dest = std::filesystem::path(a.out_dir) / dest.filename();
        }
        save_template(t, dest);
        if (a.list) {
            auto txt = dest;
            std::ofstream f(txt.replace_extension(".txt"), std::ios::trunc);
            if (!f)
                throw DataError("cannot write " + txt.string());
            f << format_minutiae_list(found);
        }
        if (!a.dump_map.empty()) {
            std::filesystem::create_directories(a.dump_map);
            const auto map = minmap::encode_minutiae_map(t.minutiae, img.height(), img.width(), config.minmap);
            minmap::dump_channels(map, std::filesystem::path(a.dump_map) / dest.stem());
        }
        out << dest.string() << ": " << t.minutiae.size() << " minutiae, aged=" << (t.aged ? "yes" : "no") << '\n';
        if (t.minutiae.empty()) {
            err << "warning: no minutiae found in " << path << '\n';
            status = kExitData;
        }
    }
    return status;
}

struct MatchArgs {
    std::vector<std::string> probe;
    std::vector<std::string> enrolled;
    std::vector<std::string> probe_images;
    std::vector<std::string> enrolled_images;
};

int cmd_match(const MatchArgs& a, const Config& config, std::ostream& out, std::ostream& err)
{
    const auto probe = record_from_files(a.probe, a.probe_images);
    const auto enrolled = record_from_files(a.enrolled, a.enrolled_images);
    match::Diagnostics diag;
    auto mc = config.match_config();
    mc.diagnostics = &diag;
    double score = 0.0;
    try {
        score = match::authenticate(probe, enrolled, mc);
    } catch (const ValidationError& e) {
        throw DataError(e.what());
    }
    out << fixed4(score) << '\n';
    return finish_external(diag, err);
}

std::vector<match::SubjectRecord> gallery_from_manifest(const eval::Manifest& m, const Config& config, int jobs)
{
    const auto templates = load_manifest_templates(m, config, jobs);
    std::vector<match::SubjectRecord> gallery;
    for (const auto& s : eval::group_sessions(m)) {
        if (s.ordinal != 0)
            continue;
        match::SubjectRecord r;
        r.subject_id = s.subject_id;
        r.gender = s.gender;
        for (std::size_t row : s.rows) {
            Template t = templates[row];
            t.thumb = m.records[row].thumb;
            t.age_weeks_at_capture = m.records[row].age_weeks;
            r.templates.push_back(std::move(t));
            if (config.match_config().external)
                r.image_paths.push_back(m.resolve(m.records[row]).string());
        }
        gallery.push_back(std::move(r));
    }
    return gallery;
}

struct SearchArgs {
    std::vector<std::string> probe;
    std::vector<std::string> probe_images;
    std::string gallery;
    int top = 0;
};

int cmd_search(const SearchArgs& a, const Config& config, int jobs, std::ostream& out, std::ostream& err)
{
    const auto probe = record_from_files(a.probe, a.probe_images);
    const auto gallery = gallery_from_manifest(eval::read_manifest(a.gallery), config, jobs);
    match::Diagnostics diag;
    auto mc = config.match_config();
    mc.diagnostics = &diag;
    // Gallery subjects lacking the probe's thumbs cannot be compared; they
    // rank last with score 0.
    std::vector<match::SubjectRecord> comparable;
    std::vector<match::RankedCandidate> skipped;
    for (const auto& g : gallery) {
        bool shared = false;
        for (const auto& pt : probe.templates)
            for (const auto& gt : g.templates)
                shared = shared || pt.thumb == gt.thumb;
        if (shared)
            comparable.push_back(g);
        else
            skipped.push_back({g.subject_id, 0.0, 0});
    }
    if (comparable.empty())
        throw DataError("no gallery subject shares a thumb with the probe");
    auto ranking = match::search(probe, comparable, mc, jobs);
    std::sort(skipped.begin(), skipped.end(),
              [](const auto& x, const auto& y) { return x.subject_id < y.subject_id; });
    for (auto& s : skipped) {
        s.rank = static_cast<int>(ranking.size()) + 1;
        ranking.push_back(s);
    }
    out << "rank,subject_id,score\n";
    for (const auto& c : ranking) {
        if (a.top > 0 && c.rank > a.top)
            break;
        out << c.rank << ',' << c.subject_id << ',' << fixed4(c.fused_score) << '\n';
    }
    return finish_external(diag, err);
}

struct EvalArgs {
    std::string manifest;
    std::string csv;
};

int cmd_eval(const EvalArgs& a, const Config& config, int jobs, std::ostream& out, std::ostream& err)
{
    const auto manifest = eval::read_manifest(a.manifest);
    const auto templates = load_manifest_templates(manifest, config, jobs);
    match::Diagnostics diag;
    auto mc = config.match_config();
    mc.diagnostics = &diag;
    const auto report = eval::evaluate(manifest, templates, mc, config.eval, jobs);
    for (const auto& w : report.warnings)
        err << "warning: " << w << '\n';
    const std::string csv = eval::report_csv(report);
    if (!a.csv.empty()) {
        std::ofstream f(a.csv, std::ios::binary | std::ios::trunc);
        if (!f)
            throw DataError("cannot write " + a.csv);
        f << csv;
    }
    out << eval::report_table(report);
    return finish_external(diag, err);
}

struct SynthArgs {
    std::string out_dir;
    std::uint64_t seed = 0;
    int subjects = 100;
    int sessions = 2;
    int impressions = 2;
    std::string profile = "mild";
};

int cmd_synth(const SynthArgs& a, int jobs, std::ostream& out)
{
    synth::BenchmarkSpec spec;
    spec.n_subjects = a.subjects;
    spec.sessions = a.sessions;
    spec.impressions_per_thumb = a.impressions;
    spec.seed = a.seed;
    spec.jobs = jobs;
    try {
        spec.profile = synth::parse_profile(a.profile);
    } catch (const ValidationError& e) {
        throw DataError(e.what());
    }
    const auto summary = synth::build_benchmark(spec, a.out_dir);
    out << "wrote " << summary.images << " images and " << summary.templates << " ground-truth templates; manifest "
        << summary.manifest.string() << '\n';
    return kExitOk;
}

struct CalibrateArgs {
    std::string manifest;
    double far = 0.01;
    double step = 0.05;
    std::string write_config;
};

int cmd_calibrate(const CalibrateArgs& a, const Config& config, int jobs, std::ostream& out, std::ostream& err)
{
    const auto manifest = eval::read_manifest(a.manifest);
    const auto templates = load_manifest_templates(manifest, config, jobs);
    match::Diagnostics diag;
    auto mc = config.match_config();
    mc.diagnostics = &diag;
    const auto records = eval::group_sessions(manifest);
    const auto scored = eval::score_protocol(records, manifest, templates, mc, jobs);
    std::vector<ScoreBundle> gen, imp;
    for (const auto& s : scored)
        (s.pair.label == eval::PairLabel::genuine ? gen : imp).push_back(s.bundle);
    const auto result = eval::calibrate_weights(gen, imp, a.far, a.step);
    Config tuned = config;
    tuned.weights = result.weights;
    for (const char* key : {"fusion.minutiae", "fusion.texture", "fusion.external"})
        out << key << " = " << tuned.get(key) << '\n';
    out << "# tar@far=" << a.far << ": " << fixed4(result.tar) << '\n';
    if (!a.write_config.empty()) {
        std::ofstream f(a.write_config, std::ios::trunc);
        if (!f)
            throw DataError("cannot write " + a.write_config);
        f << tuned.dump();
    }
    return finish_external(diag, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Infant fingerprint enrollment, matching and evaluation", "infantprints"};
    app.require_subcommand(0, 1);
    Globals g;
    app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--set", g.overrides, "override one config key (key=value); repeatable");
    app.add_option("--jobs,-j", g.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--dump-config", g.dump_config, "print the effective config and exit");

    EnrollArgs ea;
    auto* enroll = app.add_subcommand("enroll", "extract templates from images");
    enroll->add_option("images", ea.images, "PGM images")->required();
    enroll->add_option("--subject", ea.subject);
    enroll->add_option("--session", ea.session);
    enroll->add_option("--thumb", ea.thumb, "left or right")->required();
    enroll->add_option("--age-weeks", ea.age_weeks, "age at capture")->required();
    enroll->add_option("--gender", ea.gender, "male, female or unknown");
    enroll->add_option("--out-dir", ea.out_dir, "directory for .iptf files (default: next to each image)");
    enroll->add_flag("--probe", ea.probe, "store unaged (probe captures are never aged)");
    enroll->add_option("--dump-map", ea.dump_map, "directory for minutiae-map channel dumps");
    enroll->add_flag("--list", ea.list, "also write a .txt minutiae list (capture coordinates)");

    MatchArgs ma;
    auto* matchc = app.add_subcommand("match", "fused score of probe templates against enrolled templates");
    matchc->add_option("--probe", ma.probe, "probe .iptf files")->required();
    matchc->add_option("--enrolled", ma.enrolled, "enrolled .iptf files")->required();
    matchc->add_option("--probe-images", ma.probe_images, "images for the external matcher");
    matchc->add_option("--enrolled-images", ma.enrolled_images, "images for the external matcher");

    SearchArgs sa;
    auto* searchc = app.add_subcommand("search", "rank gallery subjects against a probe");
    searchc->add_option("--probe", sa.probe, "probe .iptf files")->required();
    searchc->add_option("--probe-images", sa.probe_images, "images for the external matcher");
    searchc->add_option("--gallery", sa.gallery, "gallery manifest")->required();
    searchc->add_option("--top", sa.top, "print only the first N ranks");

    EvalArgs va;
    auto* evalc = app.add_subcommand("eval", "longitudinal accuracy report for a manifest");
    evalc->add_option("--manifest", va.manifest)->required();
    evalc->add_option("--csv", va.csv, "write the report as CSV");

    SynthArgs ya;
    auto* synthc = app.add_subcommand("synth", "generate a synthetic longitudinal benchmark");
    synthc->add_option("--out", ya.out_dir)->required();
    synthc->add_option("--seed", ya.seed)->required();
    synthc->add_option("--subjects", ya.subjects)->check(CLI::Range(2, 100000));
    synthc->add_option("--sessions", ya.sessions)->check(CLI::Range(1, 100));
    synthc->add_option("--impressions", ya.impressions)->check(CLI::Range(1, 100));
    synthc->add_option("--profile", ya.profile, "clean, mild or hard");

    CalibrateArgs ca;
    auto* calib = app.add_subcommand("calibrate", "grid-search fusion weights on a manifest");
    calib->add_option("--manifest", ca.manifest)->required();
    calib->add_option("--far", ca.far)->check(CLI::Range(0.0, 1.0));
    calib->add_option("--step", ca.step)->check(CLI::Range(0.0, 1.0));
    calib->add_option("--write-config", ca.write_config, "write the full config with calibrated weights");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty())
        reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        const Config config = effective_config(g);
        if (g.dump_config) {
            out << config.dump();
            return kExitOk;
        }
        if (*enroll)
            return cmd_enroll(ea, config, out, err);
        if (*matchc)
            return cmd_match(ma, config, out, err);
        if (*searchc)
            return cmd_search(sa, config, g.jobs, out, err);
        if (*evalc)
            return cmd_eval(va, config, g.jobs, out, err);
        if (*synthc)
            return cmd_synth(ya, g.jobs, out);
        if (*calib)
            return cmd_calibrate(ca, config, g.jobs, out, err);
        err << app.help();
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace infantprints::cli
