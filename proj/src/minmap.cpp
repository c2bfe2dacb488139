#include "infantprints/minmap.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace infantprints::minmap {

void MinmapParams::validate() const
{
    if (!(sigma_s > 0.0) || !std::isfinite(sigma_s))
        throw ValidationError("sigma_s must be positive");
    if (!(peak_threshold > 0.0 && peak_threshold <= 1.0))
        throw ValidationError("peak_threshold must lie in (0, 1]");
    if (!(nms_radius >= 1.0) || !std::isfinite(nms_radius))
        throw ValidationError("nms_radius must be at least 1");
    if (!(contribution_floor > 0.0 && contribution_floor < 1.0))
        throw ValidationError("contribution_floor must lie in (0, 1)");
}

MinutiaeMap::MinutiaeMap(int height, int width) : height_(height), width_(width)
{
    if (height < 0 || width < 0)
        throw ValidationError("map dimensions must be non-negative");
    values_.assign(static_cast<std::size_t>(height) * width * kChannels, 0.0);
}

double MinutiaeMap::cell_sum(int row, int col) const
{
    const double* p = &values_[index(row, col, 0)];
    double s = 0.0;
    for (int k = 0; k < kChannels; ++k)
        s += p[k];
    return s;
}

double angle_difference(double theta1, double theta2)
{
    if (!std::isfinite(theta1) || !std::isfinite(theta2))
        throw ValidationError("angle_difference requires finite angles");
    const double d = wrap_two_pi(theta1) - wrap_two_pi(theta2);
    if (d >= -kPi && d <= kPi)
        return std::abs(d);
    return kTwoPi - std::abs(d);
}

double spatial_contribution(double px, double py, int i, int j, double sigma_s)
{
    if (!(sigma_s > 0.0))
        throw ValidationError("sigma_s must be positive");
    const double dx = px - j;
    const double dy = py - i;
    return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_s * sigma_s));
}

double orientation_contribution(double theta_t, int k, double sigma_s)
{
    if (k < 0 || k >= kChannels)
        throw ValidationError("channel index must lie in [0, 12)");
    if (!(sigma_s > 0.0))
        throw ValidationError("sigma_s must be positive");
    return std::exp(-angle_difference(theta_t, channel_center(k)) / (2.0 * sigma_s * sigma_s));
}

MinutiaeMap encode_minutiae_map(const MinutiaeSet& set, int height, int width, const MinmapParams& params)
{
    params.validate();
    for (const auto& m : set.minutiae) {
        validate(m);
        if (m.x >= width || m.y >= height)
            throw ValidationError("minutia lies outside the map");
    }

    MinutiaeMap map(height, width);
    const double two_s2 = 2.0 * params.sigma_s * params.sigma_s;
    // Per-axis factors below the floor cannot lift the product above it.
    const double reach = params.sigma_s * std::sqrt(2.0 * std::log(1.0 / params.contribution_floor));

    std::vector<double> row_w;
    std::vector<double> col_w;
    for (const auto& m : set.minutiae) {
        double co[kChannels];
        for (int k = 0; k < kChannels; ++k)
            co[k] = orientation_contribution(m.theta, k, params.sigma_s);

        const int r0 = std::max(0, static_cast<int>(std::floor(m.y - reach)));
        const int r1 = std::min(height - 1, static_cast<int>(std::ceil(m.y + reach)));
        const int c0 = std::max(0, static_cast<int>(std::floor(m.x - reach)));
        const int c1 = std::min(width - 1, static_cast<int>(std::ceil(m.x + reach)));

        row_w.resize(static_cast<std::size_t>(r1 - r0 + 1));
        col_w.resize(static_cast<std::size_t>(c1 - c0 + 1));
        for (int i = r0; i <= r1; ++i)
            row_w[i - r0] = std::exp(-(i - m.y) * (i - m.y) / two_s2);
        for (int j = c0; j <= c1; ++j)
            col_w[j - c0] = std::exp(-(j - m.x) * (j - m.x) / two_s2);

        for (int i = r0; i <= r1; ++i) {
            for (int j = c0; j <= c1; ++j) {
                const double cs = row_w[i - r0] * col_w[j - c0];
                if (cs < params.contribution_floor)
                    continue;
                for (int k = 0; k < kChannels; ++k)
                    map.at(i, j, k) += cs * co[k];
            }
        }
    }
    return map;
}

namespace {

struct Peak {
    int row;
    int col;
    double strength;
};

// Vertex offset of a parabola through (-1, a), (0, b), (1, c); log-domain
// samples make this exact for an isolated Gaussian.
double parabolic_offset(double a, double b, double c)
{
    if (a <= 0.0 || b <= 0.0 || c <= 0.0)
        return 0.0;
    const double la = std::log(a), lb = std::log(b), lc = std::log(c);
    const double denom = la - 2.0 * lb + lc;
    if (denom >= 0.0)
        return 0.0;
    return std::clamp(0.5 * (la - lc) / denom, -0.5, 0.5);
}

}  // namespace

MinutiaeSet decode_minutiae_map(const MinutiaeMap& map, const MinmapParams& params, int source_ppi)
{
    params.validate();
    const int h = map.height();
    const int w = map.width();
    MinutiaeSet out;
    out.source_ppi = source_ppi;
    if (h == 0 || w == 0)
        return out;

    std::vector<double> sum(static_cast<std::size_t>(h) * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            sum[static_cast<std::size_t>(i) * w + j] = map.cell_sum(i, j);
    auto S = [&](int i, int j) { return sum[static_cast<std::size_t>(i) * w + j]; };

    std::vector<Peak> peaks;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double v = S(i, j);
            if (v <= 0.0)
                continue;
            bool is_max = true;
            for (int di = -1; di <= 1 && is_max; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0)
                        continue;
                    const int ni = i + di, nj = j + dj;
                    if (ni < 0 || nj < 0 || ni >= h || nj >= w)
                        continue;
                    if (S(ni, nj) >= v) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (!is_max)
                continue;
            double strongest = 0.0;
            for (int k = 0; k < kChannels; ++k)
                strongest = std::max(strongest, map.at(i, j, k));
            if (strongest >= params.peak_threshold)
                peaks.push_back({i, j, v});
        }
    }

    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        if (a.strength != b.strength)
            return a.strength > b.strength;
        if (a.row != b.row)
            return a.row < b.row;
        return a.col < b.col;
    });

    const double r2 = params.nms_radius * params.nms_radius;
    std::vector<Peak> kept;
    for (const auto& p : peaks) {
        bool suppressed = false;
        for (const auto& q : kept) {
            const double dr = p.row - q.row, dc = p.col - q.col;
            if (dr * dr + dc * dc < r2) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed)
            kept.push_back(p);
    }

    for (const auto& p : kept) {
        double dx = 0.0, dy = 0.0;
        if (p.col > 0 && p.col < w - 1)
            dx = parabolic_offset(S(p.row, p.col - 1), p.strength, S(p.row, p.col + 1));
        if (p.row > 0 && p.row < h - 1)
            dy = parabolic_offset(S(p.row - 1, p.col), p.strength, S(p.row + 1, p.col));

        double cx = 0.0, cy = 0.0;
        for (int k = 0; k < kChannels; ++k) {
            const double v = map.at(p.row, p.col, k);
            cx += v * std::cos(channel_center(k));
            cy += v * std::sin(channel_center(k));
        }
        Minutia m;
        m.x = std::max(0.0, p.col + dx);
        m.y = std::max(0.0, p.row + dy);
        m.theta = wrap_two_pi(std::atan2(cy, cx));
        out.minutiae.push_back(m);
    }
    return out;
}

void dump_channels(const MinutiaeMap& map, const std::filesystem::path& stem)
{
    for (int k = 0; k < kChannels; ++k) {
        std::ostringstream name;
        name << stem.filename().string() << "_ch" << std::setw(2) << std::setfill('0') << k << ".txt";
        const auto path = stem.parent_path() / name.str();
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("cannot write " + path.string());
        out << map.width() << ' ' << map.height() << ' ' << k << '\n';
        out << std::setprecision(9);
        for (int i = 0; i < map.height(); ++i) {
            for (int j = 0; j < map.width(); ++j) {
                if (j)
                    out << ' ';
                out << map.at(i, j, k);
            }
            out << '\n';
        }
    }
}

}  // namespace infantprints::minmap
