#include "infantprints/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace infantprints {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

int to_int(const std::string& key, const std::string& v)
{
    int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Field {
    std::function<void(Config&, const std::string&, const std::string&)> set;
    std::function<std::string(const Config&)> get;
};

Field real(double Config::*member)
{
    return {[member](Config& c, const std::string& k, const std::string& v) { c.*member = to_double(k, v); },
            [member](const Config& c) { return fmt(c.*member); }};
}

Field integer(int Config::*member)
{
    return {[member](Config& c, const std::string& k, const std::string& v) { c.*member = to_int(k, v); },
            [member](const Config& c) { return std::to_string(c.*member); }};
}

template <typename Get>
Field real_ref(Get ref)
{
    return {[ref](Config& c, const std::string& k, const std::string& v) { ref(c) = to_double(k, v); },
            [ref](const Config& c) { return fmt(ref(const_cast<Config&>(c))); }};
}

template <typename Get>
Field int_ref(Get ref)
{
    return {[ref](Config& c, const std::string& k, const std::string& v) { ref(c) = to_int(k, v); },
            [ref](const Config& c) { return std::to_string(ref(const_cast<Config&>(c))); }};
}

const std::map<std::string, Field>& fields()
{
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> t;
        t["minmap.sigma_s"] = real_ref([](Config& c) -> double& { return c.minmap.sigma_s; });
        t["minmap.peak_threshold"] = real_ref([](Config& c) -> double& { return c.minmap.peak_threshold; });
        t["minmap.nms_radius"] = real_ref([](Config& c) -> double& { return c.minmap.nms_radius; });

        t["extract.block_size"] = integer(&Config::extract_block_size);
        t["extract.border_margin"] = integer(&Config::extract_border_margin);
        t["extract.gabor_wavelength"] = real(&Config::extract_gabor_wavelength);
        t["extract.min_quality_coherence"] = real(&Config::extract_min_quality_coherence);
        t["extract.target_std"] = real(&Config::extract_target_std);
        t["extract.binarize"] = {
            [](Config& c, const std::string& k, const std::string& v) {
                if (v == "fixed_midpoint")
                    c.extract_binarize = extract::BinarizeMethod::fixed_midpoint;
                else if (v == "local_mean")
                    c.extract_binarize = extract::BinarizeMethod::local_mean;
                else
                    throw ConfigError(k + ": expected fixed_midpoint or local_mean, got '" + v + "'");
            },
            [](const Config& c) {
                return std::string(c.extract_binarize == extract::BinarizeMethod::local_mean ? "local_mean"
                                                                                             : "fixed_midpoint");
            }};
        t["image.default_ppi"] = integer(&Config::default_ppi);
        t["texture.enabled"] = {
            [](Config& c, const std::string& k, const std::string& v) { c.texture_enabled = to_bool(k, v); },
            [](const Config& c) { return std::string(c.texture_enabled ? "true" : "false"); }};

        t["aging.lambda"] = real_ref([](Config& c) -> double& { return c.aging.lambda; });
        t["aging.age_cutoff_weeks"] = int_ref([](Config& c) -> int& { return c.aging.age_cutoff_weeks; });

        t["match.pos_tolerance"] = real_ref([](Config& c) -> double& { return c.match.pos_tolerance; });
        t["match.angle_tolerance"] = real_ref([](Config& c) -> double& { return c.match.angle_tolerance; });
        t["match.max_rotation"] = real_ref([](Config& c) -> double& { return c.match.max_rotation; });
        t["match.rotation_step"] = real_ref([](Config& c) -> double& { return c.match.rotation_step; });
        t["match.neighbours"] = int_ref([](Config& c) -> int& { return c.match.neighbours; });
        t["match.hypotheses"] = int_ref([](Config& c) -> int& { return c.match.hypotheses; });

        t["fusion.minutiae"] = real_ref([](Config& c) -> double& { return c.weights.minutiae; });
        t["fusion.texture"] = real_ref([](Config& c) -> double& { return c.weights.texture; });
        t["fusion.external"] = real_ref([](Config& c) -> double& { return c.weights.external; });

        t["bounds.minutiae_min"] = real_ref([](Config& c) -> double& { return c.bounds.minutiae.min; });
        t["bounds.minutiae_max"] = real_ref([](Config& c) -> double& { return c.bounds.minutiae.max; });
        t["bounds.texture_min"] = real_ref([](Config& c) -> double& { return c.bounds.texture.min; });
        t["bounds.texture_max"] = real_ref([](Config& c) -> double& { return c.bounds.texture.max; });
        t["bounds.external_min"] = real_ref([](Config& c) -> double& { return c.bounds.external.min; });
        t["bounds.external_max"] = real_ref([](Config& c) -> double& { return c.bounds.external.max; });

        t["external.command"] = {[](Config& c, const std::string&, const std::string& v) { c.external_command = v; },
                                 [](const Config& c) { return c.external_command; }};
        t["external.timeout"] = real(&Config::external_timeout);

        t["eval.far_targets"] = {
            [](Config& c, const std::string& k, const std::string& v) {
                std::vector<double> out;
                std::istringstream in(v);
                std::string item;
                while (std::getline(in, item, ','))
                    out.push_back(to_double(k, trim(item)));
                if (out.empty())
                    throw ConfigError(k + ": needs at least one value");
                c.eval.far_targets = out;
            },
            [](const Config& c) {
                std::string s;
                for (double f : c.eval.far_targets)
                    s += (s.empty() ? "" : ",") + fmt(f);
                return s;
            }};
        auto buckets = [](std::vector<eval::Bucket> eval::EvalSettings::*member) {
            return Field{[member](Config& c, const std::string& k, const std::string& v) {
                             try {
                                 c.eval.*member = eval::parse_buckets(v);
                             } catch (const ValidationError& e) {
                                 throw ConfigError(k + ": " + e.what());
                             }
                         },
                         [member](const Config& c) { return eval::format_buckets(c.eval.*member); }};
        };
        t["eval.age_buckets"] = buckets(&eval::EvalSettings::age_buckets);
        t["eval.lapse_buckets"] = buckets(&eval::EvalSettings::lapse_buckets);
        return t;
    }();
    return table;
}

}  // namespace

const std::vector<std::string>& Config::keys()
{
    static const std::vector<std::string> list = [] {
        std::vector<std::string> k;
        for (const auto& [name, f] : fields())
            k.push_back(name);
        return k;
    }();
    return list;
}

void Config::set(const std::string& key, const std::string& value)
{
    const auto it = fields().find(key);
    if (it == fields().end())
        throw ConfigError("unknown config key '" + key + "'");
    it->second.set(*this, key, value);
}

std::string Config::get(const std::string& key) const
{
    const auto it = fields().find(key);
    if (it == fields().end())
        throw ConfigError("unknown config key '" + key + "'");
    return it->second.get(*this);
}

void Config::validate() const
{
    try {
        minmap.validate();
        extract_params(500).validate();
        aging.validate();
        match.validate();
        infantprints::validate(weights);
        bounds.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    if (extract_block_size < 4 || extract_border_margin < 0)
        throw ConfigError("extract.block_size must be >= 4 and extract.border_margin >= 0");
    if (default_ppi <= 0)
        throw ConfigError("image.default_ppi must be positive");
    if (!(external_timeout > 0.0))
        throw ConfigError("external.timeout must be positive");
    for (double f : eval.far_targets)
        if (!(f > 0.0 && f < 1.0))
            throw ConfigError("eval.far_targets must lie in (0, 1)");
}

std::string Config::dump() const
{
    std::string out;
    for (const auto& [name, f] : fields())
        out += name + " = " + f.get(*this) + "\n";
    return out;
}

extract::ExtractParams Config::extract_params(int ppi) const
{
    if (ppi <= 0)
        throw ValidationError("ppi must be positive");
    const double s = ppi / 500.0;
    extract::ExtractParams p;
    p.block_size = std::max(4, static_cast<int>(std::lround(extract_block_size * s)));
    p.border_margin = std::max(0, static_cast<int>(std::lround(extract_border_margin * s)));
    p.gabor_wavelength = extract_gabor_wavelength;
    p.binarize = extract_binarize;
    p.min_quality_coherence = extract_min_quality_coherence;
    p.target_std = extract_target_std;
    return p;
}

match::MatchConfig Config::match_config() const
{
    match::MatchConfig c;
    c.params = match;
    c.bounds = bounds;
    c.weights = weights;
    c.policy = aging;
    if (!external_command.empty())
        c.external = match::ExternalConnector{external_command, external_timeout};
    return c;
}

Config parse_config(const std::string& text, Config base)
{
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        try {
            base.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return base;
}

Config load_config(const std::filesystem::path& path, Config base)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), std::move(base));
}

}  // namespace infantprints
