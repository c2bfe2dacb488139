#include "infantprints/pipeline.hpp"

#include "infantprints/image.hpp"
#include "infantprints/parallel.hpp"
#include "infantprints/template_codec.hpp"

#include <cstdio>


namespace infantprints {

GrayImage load_image(const std::filesystem::path& path, const Config& config)
{
    const int fallback = read_ppi_sidecar(path).value_or(config.default_ppi);
    return read_pgm(path, fallback);
}

Template template_from_image(const GrayImage& img, const CaptureInfo& info, const Config& config,
                             std::vector<extract::DetectedMinutia>* detections)
{
    img.validate();
    Template t;
    t.subject_id = info.subject_id;
    t.session_id = info.session_id;
    t.thumb = info.thumb;
    t.age_weeks_at_capture = info.age_weeks;
    t.gender = info.gender;
    const auto ex = extract::run_pipeline(img, config.extract_params(img.ppi()));
    t.minutiae = ex.as_set(img.ppi());
    if (detections)
        *detections = ex.minutiae;
    if (config.texture_enabled)
        t.embedding = match::fallback_embedding(img);
    validate(t);
    return t;
}

std::string format_minutiae_list(const std::vector<extract::DetectedMinutia>& minutiae)
{
    std::string out;
    char buf[96];
    for (const auto& d : minutiae) {
        std::snprintf(buf, sizeof buf, "%.3f %.3f %.3f %s\n", d.minutia.x, d.minutia.y, d.minutia.theta * 180.0 / kPi,
                      d.type == extract::MinutiaType::ending ? "ending" : "bifurcation");
        out += buf;
    }
    return out;
}

std::vector<Template> load_manifest_templates(const eval::Manifest& manifest, const Config& config, int jobs)
{
    std::vector<Template> out(manifest.records.size());
    parallel_for(out.size(), jobs, [&](std::size_t i) {
        const auto& r = manifest.records[i];
        const auto path = manifest.resolve(r);
        if (path.extension() == ".iptf") {
            out[i] = load_template(path);
            return;
        }
        out[i] = template_from_image(load_image(path, config),
                                     {r.subject_id, r.session_id, r.thumb, r.age_weeks, r.gender}, config);
    });
    return out;
}

}  // namespace infantprints
