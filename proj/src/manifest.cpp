#include "infantprints/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace infantprints::eval {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ','))
        out.push_back(trim(field));
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

bool valid_date(const std::string& d)
{
    if (d.size() != 10 || d[4] != '-' || d[7] != '-')
        return false;
    for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (d[i] < '0' || d[i] > '9')
            return false;
    const int month = std::stoi(d.substr(5, 2));
    const int day = std::stoi(d.substr(8, 2));
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

}  // namespace

std::filesystem::path Manifest::resolve(const ManifestRecord& r) const
{
    std::filesystem::path p(r.path);
    if (p.is_absolute() || base_dir.empty())
        return p;
    return base_dir / p;
}

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir)
{
    Manifest m;
    m.base_dir = base_dir;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        if (!header_seen) {
            if (t != kManifestHeader)
                throw ManifestError(line_no, std::string("expected header '") + kManifestHeader + "'");
            header_seen = true;
            continue;
        }
        const auto f = split(t);
        if (f.size() != 7)
            throw ManifestError(line_no, "expected 7 fields, found " + std::to_string(f.size()));
        ManifestRecord r;
        r.subject_id = f[0];
        r.session_id = f[1];
        r.capture_date = f[2];
        if (r.subject_id.empty() || r.session_id.empty())
            throw ManifestError(line_no, "subject_id and session_id must be non-empty");
        if (!valid_date(r.capture_date))
            throw ManifestError(line_no, "capture_date must be YYYY-MM-DD");
        const auto [ptr, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), r.age_weeks);
        if (ec != std::errc() || ptr != f[3].data() + f[3].size() || r.age_weeks < 0 || r.age_weeks >= kMaxAgeWeeks)
            throw ManifestError(line_no, "invalid age_weeks '" + f[3] + "'");
        try {
            r.gender = parse_gender(f[4]);
            r.thumb = parse_thumb(f[5]);
        } catch (const ValidationError& e) {
            throw ManifestError(line_no, e.what());
        }
        r.path = f[6];
        if (r.path.empty())
            throw ManifestError(line_no, "path must be non-empty");
        m.records.push_back(std::move(r));
    }
    if (!header_seen)
        throw ManifestError(line_no, "missing header");
    return m;
}

Manifest read_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open manifest " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), path.parent_path());
}

std::string format_manifest(const Manifest& m)
{
    std::ostringstream out;
    out << kManifestHeader << '\n';
    for (const auto& r : m.records) {
        out << r.subject_id << ',' << r.session_id << ',' << r.capture_date << ',' << r.age_weeks << ','
            << to_string(r.gender) << ',' << to_string(r.thumb) << ',' << r.path << '\n';
    }
    return out.str();
}

void write_manifest(const Manifest& m, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write manifest " + path.string());
    out << format_manifest(m);
}

}  // namespace infantprints::eval
