#pragma once

#include "infantprints/core.hpp"

#include <filesystem>
#include <unistd.h>
#include <random>
#include <string>

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ip_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Minutiae at least `min_sep` apart inside [margin, w - margin) x [margin, h - margin).
inline infantprints::MinutiaeSet separated_set(std::mt19937_64& rng, int n, double w, double h, double margin,
                                               double min_sep)
{
    std::uniform_real_distribution<double> ux(margin, w - margin), uy(margin, h - margin), ut(0.0, infantprints::kTwoPi);
    infantprints::MinutiaeSet s;
    int tries = 0;
    while (static_cast<int>(s.size()) < n && tries++ < 100000) {
        infantprints::Minutia m{ux(rng), uy(rng), ut(rng)};
        bool ok = true;
        for (const auto& o : s.minutiae)
            ok = ok && std::hypot(o.x - m.x, o.y - m.y) >= min_sep;
        if (ok)
            s.minutiae.push_back(m);
    }
    return s;
}

}  // namespace testing_support
