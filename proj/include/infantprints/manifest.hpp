#pragma once

#include "infantprints/core.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace infantprints::eval {

// One capture (image or template file) in a dataset.
struct ManifestRecord {
    std::string subject_id;
    std::string session_id;
    std::string capture_date;  // YYYY-MM-DD
    int age_weeks = 0;
    Gender gender = Gender::unknown;
    Thumb thumb = Thumb::left;
    std::string path;  // relative to the manifest's directory unless absolute

    bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestRecord> records;

    std::filesystem::path resolve(const ManifestRecord& r) const;
};

class ManifestError : public std::runtime_error {
public:
    ManifestError(int line, const std::string& what)
        : std::runtime_error("manifest line " + std::to_string(line) + ": " + what), line_(line)
    {
    }
    int line() const { return line_; }

private:
    int line_;
};

inline constexpr const char* kManifestHeader = "subject_id,session_id,capture_date,age_weeks,gender,thumb,path";

// Comma-separated, header line required, '#' comments and blank lines ignored.
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});
Manifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const Manifest& m);
void write_manifest(const Manifest& m, const std::filesystem::path& path);

}  // namespace infantprints::eval
