#include "infantprints/extract.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace infantprints::extract {

ExtractParams ExtractParams::for_ppi(int ppi)
{
    if (ppi <= 0)
        throw ValidationError("ppi must be positive");
    const double s = ppi / 500.0;
    ExtractParams p;
    p.block_size = std::max(4, static_cast<int>(std::lround(16.0 * s)));
    p.border_margin = std::max(1, static_cast<int>(std::lround(16.0 * s)));
    return p;
}

void ExtractParams::validate() const
{
    if (block_size < 4)
        throw ValidationError("block_size must be at least 4");
    if (gabor_wavelength < 0.0 || !std::isfinite(gabor_wavelength))
        throw ValidationError("gabor_wavelength must be >= 0");
    if (!(min_quality_coherence >= 0.0 && min_quality_coherence <= 1.0))
        throw ValidationError("min_quality_coherence must lie in [0,1]");
    if (border_margin < 0)
        throw ValidationError("border_margin must be non-negative");
    if (!(target_std > 0.0 && target_std < 0.5))
        throw ValidationError("target_std must lie in (0, 0.5)");
}

// ---------------------------------------------------------------------------
// Normalization

GrayImage normalize_image(const GrayImage& img, double target_std)
{
    GrayImage out(img.width(), img.height(), img.ppi(), 0.5f);
    const auto& px = img.pixels();
    if (px.empty())
        return out;
    const double n = static_cast<double>(px.size());
    double mean = 0.0;
    for (float v : px)
        mean += v;
    mean /= n;
    double var = 0.0;
    for (float v : px)
        var += (v - mean) * (v - mean);
    var /= n;
    if (var < 1e-14)
        return out;

    const double gain = target_std / std::sqrt(var);
    auto mapped_mean = [&](double offset) {
        double s = 0.0;
        for (float v : px)
            s += std::clamp(gain * (v - mean) + offset, 0.0, 1.0);
        return s / n;
    };

    // Clamping shifts the mean; restore it by searching the offset, which the
    // mean depends on monotonically.
    double offset = 0.5;
    if (std::abs(mapped_mean(offset) - 0.5) > 1e-9) {
        double lo = -gain, hi = 1.0 + gain;
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mapped_mean(mid) < 0.5)
                lo = mid;
            else
                hi = mid;
        }
        offset = 0.5 * (lo + hi);
    }
    auto& o = out.pixels();
    for (std::size_t i = 0; i < px.size(); ++i)
        o[i] = static_cast<float>(std::clamp(gain * (px[i] - mean) + offset, 0.0, 1.0));
    return out;
}

// ---------------------------------------------------------------------------
// Orientation field

double OrientationField::angle_at_pixel(double x, double y) const
{
    if (rows == 0 || cols == 0)
        return 0.0;
    const double u = (x - block_size * 0.5) / block_size;
    const double v = (y - block_size * 0.5) / block_size;
    const int c0 = std::clamp(static_cast<int>(std::floor(u)), 0, cols - 1);
    const int r0 = std::clamp(static_cast<int>(std::floor(v)), 0, rows - 1);
    const int c1 = std::min(c0 + 1, cols - 1);
    const int r1 = std::min(r0 + 1, rows - 1);
    const double fu = std::clamp(u - c0, 0.0, 1.0);
    const double fv = std::clamp(v - r0, 0.0, 1.0);
    double sx = 0.0, sy = 0.0;
    auto add = [&](int r, int c, double w) {
        const double a = 2.0 * angle(r, c);
        const double q = w * std::max(coherence_at(r, c), 1e-6);
        sx += q * std::cos(a);
        sy += q * std::sin(a);
    };
    add(r0, c0, (1 - fu) * (1 - fv));
    add(r0, c1, fu * (1 - fv));
    add(r1, c0, (1 - fu) * fv);
    add(r1, c1, fu * fv);
    double a = 0.5 * std::atan2(sy, sx);
    if (a < 0.0)
        a += kPi;
    return a >= kPi ? 0.0 : a;
}

double OrientationField::coherence_at_pixel(int x, int y) const
{
    if (rows == 0 || cols == 0)
        return 1.0;
    const int r = std::clamp(y / block_size, 0, rows - 1);
    const int c = std::clamp(x / block_size, 0, cols - 1);
    return coherence_at(r, c);
}

bool OrientationField::foreground(int x, int y) const
{
    if (mask.empty())
        return true;
    if (x < 0 || y < 0 || x >= width || y >= height)
        return false;
    return mask[static_cast<std::size_t>(y) * width + x] != 0;
}

double OrientationField::distance_to_background(int x, int y) const
{
    if (edge_distance.empty())
        return std::numeric_limits<double>::infinity();
    if (x < 0 || y < 0 || x >= width || y >= height)
        return 0.0;
    return edge_distance[static_cast<std::size_t>(y) * width + x];
}

namespace {

struct Gradients {
    std::vector<double> gx;  // +x (right)
    std::vector<double> gy;  // +y on screen (up)
};

Gradients sobel(const GrayImage& img)
{
    const int w = img.width(), h = img.height();
    Gradients g;
    g.gx.assign(static_cast<std::size_t>(w) * h, 0.0);
    g.gy.assign(static_cast<std::size_t>(w) * h, 0.0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            auto p = [&](int dr, int dc) { return static_cast<double>(img.clamped(r + dr, c + dc)); };
            const double dx = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
            const double dy_down = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
            g.gx[static_cast<std::size_t>(r) * w + c] = dx / 8.0;
            g.gy[static_cast<std::size_t>(r) * w + c] = -dy_down / 8.0;
        }
    }
    return g;
}

double sample_bilinear(const GrayImage& img, double x, double y)
{
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    return (1 - fx) * (1 - fy) * img.clamped(y0, x0) + fx * (1 - fy) * img.clamped(y0, x0 + 1) +
           (1 - fx) * fy * img.clamped(y0 + 1, x0) + fx * fy * img.clamped(y0 + 1, x0 + 1);
}

// Period from the projection of a block onto its ridge normal.
double block_period(const GrayImage& img, double cx, double cy, double ridge_angle, int bs)
{
    const Vec2 t = direction_of(ridge_angle);
    const Vec2 n = direction_of(ridge_angle + kPi / 2);
    const int half = bs;
    const int across = std::max(1, bs / 4);
    std::vector<double> sig(static_cast<std::size_t>(2 * half + 1));
    for (int k = -half; k <= half; ++k) {
        double s = 0.0;
        for (int a = -across; a <= across; ++a)
            s += sample_bilinear(img, cx + k * n.x + a * t.x, cy + k * n.y + a * t.y);
        sig[k + half] = s;
    }
    std::vector<double> sm(sig.size());
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const double a = sig[i > 0 ? i - 1 : i], b = sig[i], c = sig[i + 1 < sig.size() ? i + 1 : i];
        sm[i] = 0.25 * a + 0.5 * b + 0.25 * c;
    }
    // Valleys in intensity are ridge centres; peaks work equally well.
    std::vector<double> peaks;
    for (std::size_t i = 1; i + 1 < sm.size(); ++i) {
        if (sm[i] > sm[i - 1] && sm[i] >= sm[i + 1]) {
            const double a = sm[i - 1], b = sm[i], c = sm[i + 1];
            const double den = a - 2 * b + c;
            peaks.push_back(static_cast<double>(i) + (den < 0 ? 0.5 * (a - c) / den : 0.0));
        }
    }
    if (peaks.size() < 2)
        return 0.0;
    return (peaks.back() - peaks.front()) / static_cast<double>(peaks.size() - 1);
}

// Pixel mask from local contrast, restricted to blocks with ridge flow, plus
// a chamfer distance to the nearest background pixel.
void segment(const GrayImage& img, const ExtractParams& params, OrientationField& f)
{
    const int w = img.width(), h = img.height();
    f.width = w;
    f.height = h;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    f.mask.assign(n, 0);
    f.edge_distance.assign(n, 0.0f);
    if (n == 0)
        return;

    std::vector<double> s1(static_cast<std::size_t>(w + 1) * (h + 1), 0.0), s2(s1.size(), 0.0);
    for (int r = 0; r < h; ++r) {
        double a = 0.0, b = 0.0;
        for (int c = 0; c < w; ++c) {
            const double v = img.at(r, c);
            a += v;
            b += v * v;
            const std::size_t i = static_cast<std::size_t>(r + 1) * (w + 1) + c + 1;
            s1[i] = s1[i - (w + 1)] + a;
            s2[i] = s2[i - (w + 1)] + b;
        }
    }
    const int rad = std::max(2, params.block_size / 4);
    std::vector<double> local(n);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int r0 = std::max(0, r - rad), r1 = std::min(h, r + rad + 1);
            const int c0 = std::max(0, c - rad), c1 = std::min(w, c + rad + 1);
            auto box = [&](const std::vector<double>& t) {
                auto I = [&](int rr, int cc) { return t[static_cast<std::size_t>(rr) * (w + 1) + cc]; };
                return I(r1, c1) - I(r0, c1) - I(r1, c0) + I(r0, c0);
            };
            const double cnt = static_cast<double>((r1 - r0) * (c1 - c0));
            const double m = box(s1) / cnt;
            local[static_cast<std::size_t>(r) * w + c] = std::sqrt(std::max(0.0, box(s2) / cnt - m * m));
        }
    }
    std::vector<double> sorted = local;
    auto p90 = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() * 9 / 10);
    std::nth_element(sorted.begin(), p90, sorted.end());
    const double threshold = std::max(0.02, 0.5 * *p90);
    const double coh_min = 0.5 * params.min_quality_coherence;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * w + c;
            const int br = std::min(r / f.block_size, f.rows - 1), bc = std::min(c / f.block_size, f.cols - 1);
            f.mask[i] = local[i] >= threshold && f.coherence_at(br, bc) >= coh_min;
        }
    }

    // Two-pass 3-4 chamfer transform, scaled to pixels.
    constexpr float kInf = 1e9f;
    for (std::size_t i = 0; i < n; ++i)
        f.edge_distance[i] = f.mask[i] ? kInf : 0.0f;
    auto at = [&](int r, int c) -> float& { return f.edge_distance[static_cast<std::size_t>(r) * w + c]; };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            float& d = at(r, c);
            if (d == 0.0f)
                continue;
            // Outside the image counts as background.
            float best = (r == 0 || c == 0 || c == w - 1) ? 3.0f : kInf;
            if (r > 0)
                best = std::min(best, at(r - 1, c) + 3.0f);
            if (c > 0)
                best = std::min(best, at(r, c - 1) + 3.0f);
            if (r > 0 && c > 0)
                best = std::min(best, at(r - 1, c - 1) + 4.0f);
            if (r > 0 && c + 1 < w)
                best = std::min(best, at(r - 1, c + 1) + 4.0f);
            d = std::min(d, best);
        }
    for (int r = h - 1; r >= 0; --r)
        for (int c = w - 1; c >= 0; --c) {
            float& d = at(r, c);
            if (d == 0.0f)
                continue;
            float best = (r == h - 1 || c == w - 1 || c == 0) ? 3.0f : kInf;
            if (r + 1 < h)
                best = std::min(best, at(r + 1, c) + 3.0f);
            if (c + 1 < w)
                best = std::min(best, at(r, c + 1) + 3.0f);
            if (r + 1 < h && c + 1 < w)
                best = std::min(best, at(r + 1, c + 1) + 4.0f);
            if (r + 1 < h && c > 0)
                best = std::min(best, at(r + 1, c - 1) + 4.0f);
            d = std::min(d, best);
        }
    for (auto& d : f.edge_distance)
        d /= 3.0f;
}

}  // namespace

OrientationField estimate_orientation_field(const GrayImage& img, const ExtractParams& params)
{
    params.validate();
    OrientationField f;
    const int bs = params.block_size;
    f.block_size = bs;
    f.rows = (img.height() + bs - 1) / bs;
    f.cols = (img.width() + bs - 1) / bs;
    const std::size_t nb = static_cast<std::size_t>(f.rows) * f.cols;
    f.angles.assign(nb, 0.0);
    f.coherence.assign(nb, 0.0);
    f.contrast.assign(nb, 0.0);
    if (nb == 0)
        return f;

    const auto g = sobel(img);
    const int w = img.width(), h = img.height();
    const int pad = bs / 4;

    std::vector<double> vx(nb, 0.0), vy(nb, 0.0), energy(nb, 0.0);
    for (int br = 0; br < f.rows; ++br) {
        for (int bc = 0; bc < f.cols; ++bc) {
            const int r0 = std::max(0, br * bs - pad), r1 = std::min(h, (br + 1) * bs + pad);
            const int c0 = std::max(0, bc * bs - pad), c1 = std::min(w, (bc + 1) * bs + pad);
            double sxx = 0, syy = 0, sxy = 0, sum = 0, sum2 = 0;
            for (int r = r0; r < r1; ++r) {
                for (int c = c0; c < c1; ++c) {
                    const std::size_t i = static_cast<std::size_t>(r) * w + c;
                    sxx += g.gx[i] * g.gx[i];
                    syy += g.gy[i] * g.gy[i];
                    sxy += g.gx[i] * g.gy[i];
                }
            }
            const int rb1 = std::min(h, (br + 1) * bs), cb1 = std::min(w, (bc + 1) * bs);
            int count = 0;
            for (int r = br * bs; r < rb1; ++r) {
                for (int c = bc * bs; c < cb1; ++c) {
                    sum += img.at(r, c);
                    sum2 += static_cast<double>(img.at(r, c)) * img.at(r, c);
                    ++count;
                }
            }
            const std::size_t b = static_cast<std::size_t>(br) * f.cols + bc;
            vx[b] = sxx - syy;
            vy[b] = 2.0 * sxy;
            energy[b] = sxx + syy;
            if (count > 0) {
                const double m = sum / count;
                f.contrast[b] = std::sqrt(std::max(0.0, sum2 / count - m * m));
            }
        }
    }

    for (int br = 0; br < f.rows; ++br) {
        for (int bc = 0; bc < f.cols; ++bc) {
            const std::size_t b = static_cast<std::size_t>(br) * f.cols + bc;
            if (energy[b] < 1e-12)
                continue;
            f.coherence[b] = std::clamp(std::hypot(vx[b], vy[b]) / energy[b], 0.0, 1.0);
            // Light smoothing of the doubled-angle field for the angle only.
            double sx = 0.0, sy = 0.0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int r = br + dr, c = bc + dc;
                    if (r < 0 || c < 0 || r >= f.rows || c >= f.cols)
                        continue;
                    const std::size_t q = static_cast<std::size_t>(r) * f.cols + c;
                    const double wgt = (dr == 0 && dc == 0) ? 4.0 : 1.0;
                    sx += wgt * vx[q];
                    sy += wgt * vy[q];
                }
            }
            // Gradient direction plus a quarter turn gives the ridge direction.
            double a = 0.5 * std::atan2(sy, sx) + kPi / 2;
            a = std::fmod(a, kPi);
            if (a < 0.0)
                a += kPi;
            f.angles[b] = a >= kPi ? 0.0 : a;
        }
    }

    std::vector<double> periods;
    const double lo = bs / 6.0, hi = bs * 1.5;
    for (int br = 0; br < f.rows; ++br) {
        for (int bc = 0; bc < f.cols; ++bc) {
            const std::size_t b = static_cast<std::size_t>(br) * f.cols + bc;
            if (f.coherence[b] < 0.5 || f.contrast[b] < 1e-3)
                continue;
            const double p = block_period(img, bc * bs + bs * 0.5, br * bs + bs * 0.5, f.angles[b], bs);
            if (p >= lo && p <= hi)
                periods.push_back(p);
        }
    }
    if (!periods.empty()) {
        auto mid = periods.begin() + static_cast<std::ptrdiff_t>(periods.size() / 2);
        std::nth_element(periods.begin(), mid, periods.end());
        f.ridge_period = *mid;
    }
    segment(img, params, f);
    return f;
}

// ---------------------------------------------------------------------------
// Foreground

namespace {

double working_period(const OrientationField& f, const ExtractParams& params)
{
    if (params.gabor_wavelength > 0.0)
        return params.gabor_wavelength;
    if (f.ridge_period > 0.0)
        return f.ridge_period;
    return params.block_size / 3.0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Enhancement

GrayImage enhance(const GrayImage& img, const OrientationField& field, const ExtractParams& params)
{
    params.validate();
    const int w = img.width(), h = img.height();
    GrayImage out(w, h, img.ppi(), 1.0f);
    if (field.rows == 0 || w == 0 || h == 0)
        return out;

    const double period = working_period(field, params);
    const double sigma_n = 0.45 * period;
    const double sigma_t = 0.6 * period;
    const int radius = static_cast<int>(std::ceil(3.0 * std::max(sigma_n, sigma_t)));
    const int side = 2 * radius + 1;
    constexpr int kBins = 24;

    std::vector<std::vector<double>> kernels(kBins, std::vector<double>(static_cast<std::size_t>(side) * side));
    for (int b = 0; b < kBins; ++b) {
        const double a = kPi * b / kBins;
        const double ca = std::cos(a), sa = std::sin(a);
        auto& k = kernels[b];
        double sum = 0.0, env_sum = 0.0;
        std::vector<double> env(k.size());
        for (int dy = -radius; dy <= radius; ++dy) {
            for (int dx = -radius; dx <= radius; ++dx) {
                const double ux = dx, uy = -dy;  // screen-up frame
                const double along = ux * ca + uy * sa;
                const double across = -ux * sa + uy * ca;
                const double e = std::exp(-0.5 * (along * along / (sigma_t * sigma_t) +
                                                   across * across / (sigma_n * sigma_n)));
                const std::size_t i = static_cast<std::size_t>(dy + radius) * side + (dx + radius);
                env[i] = e;
                k[i] = e * std::cos(kTwoPi * across / period);
                sum += k[i];
                env_sum += e;
            }
        }
        // Remove the DC component so flat regions map to zero response.
        for (std::size_t i = 0; i < k.size(); ++i)
            k[i] -= sum / env_sum * env[i];
    }

    std::vector<double> resp(static_cast<std::size_t>(w) * h, 0.0);
    std::vector<char> active(resp.size(), 0);
    double s2 = 0.0;
    std::size_t n_active = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!field.foreground(c, r))
                continue;
            const double a = field.angle_at_pixel(c + 0.5, r + 0.5);
            const int bin = static_cast<int>(std::lround(a / kPi * kBins)) % kBins;
            const auto& k = kernels[bin];
            double acc = 0.0;
            const bool interior = r >= radius && c >= radius && r + radius < h && c + radius < w;
            for (int dy = -radius; dy <= radius; ++dy) {
                const double* krow = &k[static_cast<std::size_t>(dy + radius) * side];
                if (interior) {
                    const float* row = &img.pixels()[static_cast<std::size_t>(r + dy) * w + (c - radius)];
                    for (int dx = 0; dx < side; ++dx)
                        acc += krow[dx] * (row[dx] - 0.5);
                } else {
                    for (int dx = -radius; dx <= radius; ++dx)
                        acc += krow[dx + radius] * (img.clamped(r + dy, c + dx) - 0.5);
                }
            }
            const std::size_t i = static_cast<std::size_t>(r) * w + c;
            resp[i] = acc;
            active[i] = 1;
            s2 += acc * acc;
            ++n_active;
        }
    }
    if (n_active == 0)
        return out;
    const double rms = std::sqrt(s2 / static_cast<double>(n_active));
    if (rms < 1e-9) {
        for (std::size_t i = 0; i < resp.size(); ++i)
            if (active[i])
                out.pixels()[i] = 0.5f;
        return out;
    }
    // Dark ridges in, dark ridges out: the kernel's positive lobe sits on the
    // ridge centre, so a negative response marks a ridge.
    for (std::size_t i = 0; i < resp.size(); ++i) {
        if (active[i])
            out.pixels()[i] = static_cast<float>(std::clamp(0.5 + 0.25 * resp[i] / rms, 0.0, 1.0));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Binarization and thinning

GrayImage binarize(const GrayImage& img, const ExtractParams& params)
{
    const int w = img.width(), h = img.height();
    GrayImage out(w, h, img.ppi(), 0.0f);
    // A uniform image has no ridges, whatever its level.
    const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
    if (lo == img.pixels().end() || *hi - *lo < 1e-6f)
        return out;
    if (params.binarize == BinarizeMethod::fixed_midpoint) {
        for (std::size_t i = 0; i < img.pixels().size(); ++i)
            out.pixels()[i] = img.pixels()[i] < 0.5f ? 1.0f : 0.0f;
        return out;
    }
    // Local mean over a block-sized window via an integral image.
    std::vector<double> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
    for (int r = 0; r < h; ++r) {
        double row = 0.0;
        for (int c = 0; c < w; ++c) {
            row += img.at(r, c);
            integral[static_cast<std::size_t>(r + 1) * (w + 1) + c + 1] =
                integral[static_cast<std::size_t>(r) * (w + 1) + c + 1] + row;
        }
    }
    const int half = params.block_size / 2;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int r0 = std::max(0, r - half), r1 = std::min(h, r + half + 1);
            const int c0 = std::max(0, c - half), c1 = std::min(w, c + half + 1);
            auto I = [&](int rr, int cc) { return integral[static_cast<std::size_t>(rr) * (w + 1) + cc]; };
            const double mean = (I(r1, c1) - I(r0, c1) - I(r1, c0) + I(r0, c0)) / ((r1 - r0) * (c1 - c0));
            const float v = img.at(r, c);
            out.at(r, c) = (v < mean && v < 0.999f) ? 1.0f : 0.0f;
        }
    }
    return out;
}

namespace {

constexpr int kDr[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDc[8] = {0, 1, 1, 1, 0, -1, -1, -1};

Neighborhood ring(const std::vector<char>& px, int w, int h, int r, int c)
{
    Neighborhood n{};
    for (int k = 0; k < 8; ++k) {
        const int rr = r + kDr[k], cc = c + kDc[k];
        n[k] = rr >= 0 && cc >= 0 && rr < h && cc < w && px[static_cast<std::size_t>(rr) * w + cc];
    }
    return n;
}

int count_set(const Neighborhood& n)
{
    return static_cast<int>(std::count(n.begin(), n.end(), true));
}

// 8-connected components among the set ring neighbours. Consecutive ring
// positions touch, and so do orthogonal positions two steps apart.
int ring_components(const Neighborhood& n)
{
    int label[8];
    std::fill(std::begin(label), std::end(label), -1);
    int comps = 0;
    for (int k = 0; k < 8; ++k) {
        if (!n[k] || label[k] >= 0)
            continue;
        int stack[8];
        int top = 0;
        stack[top++] = k;
        label[k] = comps;
        while (top > 0) {
            const int q = stack[--top];
            const int adj[4] = {(q + 1) % 8, (q + 7) % 8, q % 2 == 0 ? (q + 2) % 8 : -1, q % 2 == 0 ? (q + 6) % 8 : -1};
            for (int a : adj) {
                if (a >= 0 && n[a] && label[a] < 0) {
                    label[a] = comps;
                    stack[top++] = a;
                }
            }
        }
        ++comps;
    }
    return comps;
}

// One representative per run of consecutive set ring positions, preferring
// an orthogonal member.
std::vector<int> ring_runs(const Neighborhood& n)
{
    std::vector<int> reps;
    int start = 0;
    while (start < 8 && n[start])
        ++start;
    if (start == 8)
        return reps;
    int rep = -1;
    for (int step = 1; step <= 8; ++step) {
        const int k = (start + step) % 8;
        if (n[k]) {
            if (rep < 0 || (rep % 2 == 1 && k % 2 == 0))
                rep = k;
        } else if (rep >= 0) {
            reps.push_back(rep);
            rep = -1;
        }
    }
    return reps;
}

}  // namespace

GrayImage thin(const GrayImage& binary)
{
    const int w = binary.width(), h = binary.height();
    std::vector<char> px(binary.pixels().size());
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = binary.pixels()[i] > 0.5f;

    // Zhang-Suen.
    std::vector<std::size_t> to_clear;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            to_clear.clear();
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    if (!px[static_cast<std::size_t>(r) * w + c])
                        continue;
                    const auto n = ring(px, w, h, r, c);
                    const int b = count_set(n);
                    if (b < 2 || b > 6)
                        continue;
                    int a = 0;
                    for (int k = 0; k < 8; ++k)
                        if (!n[k] && n[(k + 1) % 8])
                            ++a;
                    if (a != 1)
                        continue;
                    // P2=N(0) P4=E(2) P6=S(4) P8=W(6)
                    if (pass == 0) {
                        if ((n[0] && n[2] && n[4]) || (n[2] && n[4] && n[6]))
                            continue;
                    } else {
                        if ((n[0] && n[2] && n[6]) || (n[0] && n[4] && n[6]))
                            continue;
                    }
                    to_clear.push_back(static_cast<std::size_t>(r) * w + c);
                }
            }
            for (auto i : to_clear)
                px[i] = 0;
            if (!to_clear.empty())
                changed = true;
        }
    }

    // Break any surviving 2x2 ridge squares by deleting a simple pixel.
    for (int guard = 0; guard < 4; ++guard) {
        bool any = false;
        for (int r = 0; r + 1 < h; ++r) {
            for (int c = 0; c + 1 < w; ++c) {
                const std::size_t i00 = static_cast<std::size_t>(r) * w + c;
                if (!(px[i00] && px[i00 + 1] && px[i00 + w] && px[i00 + w + 1]))
                    continue;
                any = true;
                const int cand_r[4] = {r, r, r + 1, r + 1};
                const int cand_c[4] = {c, c + 1, c, c + 1};
                int best = 0, best_n = 99;
                for (int q = 0; q < 4; ++q) {
                    const auto n = ring(px, w, h, cand_r[q], cand_c[q]);
                    if (ring_components(n) == 1 && count_set(n) < best_n) {
                        best = q;
                        best_n = count_set(n);
                    }
                }
                px[static_cast<std::size_t>(cand_r[best]) * w + cand_c[best]] = 0;
            }
        }
        if (!any)
            break;
    }

    GrayImage out(w, h, binary.ppi(), 0.0f);
    for (std::size_t i = 0; i < px.size(); ++i)
        out.pixels()[i] = px[i] ? 1.0f : 0.0f;
    return out;
}

GrayImage binarize_and_thin(const GrayImage& img, const ExtractParams& params)
{
    return thin(binarize(img, params));
}

// ---------------------------------------------------------------------------
// Crossing numbers

Neighborhood neighborhood_from_mask(unsigned mask)
{
    Neighborhood n{};
    for (int k = 0; k < 8; ++k)
        n[k] = (mask >> k) & 1u;
    return n;
}

int crossing_number(const Neighborhood& n)
{
    int s = 0;
    for (int k = 0; k < 8; ++k)
        s += std::abs(static_cast<int>(n[k]) - static_cast<int>(n[(k + 1) % 8]));
    return s / 2;
}

PixelClass classify(const Neighborhood& n)
{
    switch (crossing_number(n)) {
    case 0:
        return PixelClass::isolated;
    case 1:
        return PixelClass::ending;
    case 2:
        return PixelClass::ridge;
    case 3:
        return PixelClass::bifurcation;
    default:
        return PixelClass::crossing;
    }
}

// ---------------------------------------------------------------------------
// Minutiae

namespace {

struct Skeleton {
    int w = 0, h = 0;
    std::vector<char> px;
    std::vector<signed char> cn;

    bool on(int r, int c) const { return r >= 0 && c >= 0 && r < h && c < w && px[idx(r, c)]; }
    std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * w + c; }
};

enum class TraceEnd { length, ending, junction, dead };

struct Trace {
    int r = 0, c = 0;
    int steps = 0;
    TraceEnd end = TraceEnd::dead;
};

// Follows the skeleton from (r, c) through `first` for at most `max_steps`.
Trace follow(const Skeleton& s, int r, int c, int first_r, int first_c, int max_steps,
             std::vector<std::size_t>& visited_stamp, std::size_t stamp,
             const std::vector<std::pair<int, int>>& blocked)
{
    visited_stamp[s.idx(r, c)] = stamp;
    for (const auto& [br, bc] : blocked)
        visited_stamp[s.idx(br, bc)] = stamp;
    Trace t;
    int cr = first_r, cc = first_c;
    t.steps = 1;
    while (true) {
        visited_stamp[s.idx(cr, cc)] = stamp;
        const int cnum = s.cn[s.idx(cr, cc)];
        if (cnum == 1) {
            t.end = TraceEnd::ending;
            break;
        }
        if (cnum >= 3) {
            t.end = TraceEnd::junction;
            break;
        }
        if (t.steps >= max_steps) {
            t.end = TraceEnd::length;
            break;
        }
        int nr = -1, nc = -1;
        for (int pref = 0; pref < 2 && nr < 0; ++pref) {
            for (int k = pref; k < 8; k += 2) {  // orthogonal first, then diagonal
                const int rr = cr + kDr[k], c2 = cc + kDc[k];
                if (s.on(rr, c2) && visited_stamp[s.idx(rr, c2)] != stamp) {
                    nr = rr;
                    nc = c2;
                    break;
                }
            }
        }
        if (nr < 0) {
            t.end = TraceEnd::dead;
            break;
        }
        cr = nr;
        cc = nc;
        ++t.steps;
    }
    t.r = cr;
    t.c = cc;
    return t;
}

struct Candidate {
    int r, c;
    MinutiaType type;
    double theta;
    bool removed = false;
    // For endings: where the trace stopped and why.
    Trace trace;
};

}  // namespace

std::vector<DetectedMinutia> extract_detailed(const GrayImage& skeleton, const OrientationField& field,
                                              const ExtractParams& params)
{
    params.validate();
    Skeleton s;
    s.w = skeleton.width();
    s.h = skeleton.height();
    s.px.resize(skeleton.pixels().size());
    for (std::size_t i = 0; i < s.px.size(); ++i)
        s.px[i] = skeleton.pixels()[i] > 0.5f;
    s.cn.assign(s.px.size(), 0);
    for (int r = 0; r < s.h; ++r)
        for (int c = 0; c < s.w; ++c)
            if (s.px[s.idx(r, c)])
                s.cn[s.idx(r, c)] = static_cast<signed char>(crossing_number(ring(s.px, s.w, s.h, r, c)));

    const double period = working_period(field, params);
    const int trace_len = std::max(4, static_cast<int>(std::lround(period)));
    std::vector<std::size_t> stamp(s.px.size(), 0);
    std::size_t next_stamp = 1;

    std::vector<Candidate> cands;
    for (int r = 0; r < s.h; ++r) {
        for (int c = 0; c < s.w; ++c) {
            if (!s.px[s.idx(r, c)])
                continue;
            const int cnum = s.cn[s.idx(r, c)];
            if (cnum == 1) {
                const auto n = ring(s.px, s.w, s.h, r, c);
                int k0 = -1;
                for (int k = 0; k < 8; k += 2)
                    if (n[k]) {
                        k0 = k;
                        break;
                    }
                if (k0 < 0)
                    for (int k = 1; k < 8; k += 2)
                        if (n[k]) {
                            k0 = k;
                            break;
                        }
                const Trace t = follow(s, r, c, r + kDr[k0], c + kDc[k0], trace_len, stamp, next_stamp++, {});
                Candidate cand{r, c, MinutiaType::ending, angle_of(t.c - c, t.r - r), false, t};
                cands.push_back(cand);
            } else if (cnum == 3) {
                // Junction pixels adjacent to an already-recorded one belong
                // to the same bifurcation.
                bool dup = false;
                for (auto it = cands.rbegin(); it != cands.rend(); ++it) {
                    if (it->r < r - 2)
                        break;
                    if (it->type == MinutiaType::bifurcation && std::abs(it->r - r) <= 2 && std::abs(it->c - c) <= 2) {
                        dup = true;
                        break;
                    }
                }
                if (dup)
                    continue;
                const auto n = ring(s.px, s.w, s.h, r, c);
                std::vector<std::pair<int, int>> starts;
                for (int k : ring_runs(n))
                    starts.emplace_back(r + kDr[k], c + kDc[k]);
                if (starts.size() != 3)
                    continue;
                Vec2 dirs[3];
                for (int q = 0; q < 3; ++q) {
                    std::vector<std::pair<int, int>> blocked;
                    for (int o = 0; o < 3; ++o)
                        if (o != q)
                            blocked.push_back(starts[o]);
                    const Trace t = follow(s, r, c, starts[q].first, starts[q].second, trace_len, stamp,
                                           next_stamp++, blocked);
                    const double dx = t.c - c, dy = t.r - r;
                    const double len = std::hypot(dx, dy);
                    dirs[q] = len > 0 ? Vec2{dx / len, dy / len} : Vec2{};
                }
                // The two branches closest in direction; the third is the stem.
                int a = 0, b = 1;
                double best_dot = -2.0;
                for (int i = 0; i < 3; ++i)
                    for (int j = i + 1; j < 3; ++j) {
                        const double d = dirs[i].x * dirs[j].x + dirs[i].y * dirs[j].y;
                        if (d > best_dot) {
                            best_dot = d;
                            a = i;
                            b = j;
                        }
                    }
                cands.push_back({r, c, MinutiaType::bifurcation,
                                 angle_of(dirs[a].x + dirs[b].x, dirs[a].y + dirs[b].y), false, {}});
            }
        }
    }

    auto dist = [](const Candidate& p, const Candidate& q) { return std::hypot(p.r - q.r, p.c - q.c); };

    // Spurs and short isolated segments.
    const int short_len = std::max(2, static_cast<int>(std::lround(0.8 * period)));
    for (auto& e : cands) {
        if (e.type != MinutiaType::ending || e.trace.steps > short_len)
            continue;
        if (e.trace.end != TraceEnd::junction && e.trace.end != TraceEnd::ending)
            continue;
        e.removed = true;
        for (auto& o : cands) {
            if (&o == &e || o.removed)
                continue;
            if (std::abs(o.r - e.trace.r) <= 2 && std::abs(o.c - e.trace.c) <= 2)
                o.removed = true;
        }
    }
    // Broken ridges: opposing endings; bridges: close bifurcation pairs.
    for (std::size_t i = 0; i < cands.size(); ++i) {
        for (std::size_t j = i + 1; j < cands.size(); ++j) {
            auto& p = cands[i];
            auto& q = cands[j];
            if (p.type != q.type)
                continue;
            const double d = dist(p, q);
            if (d >= period)
                continue;
            if (p.type == MinutiaType::ending) {
                double diff = std::abs(wrap_two_pi(p.theta - q.theta) - kPi);
                if (diff <= kPi / 3.0) {
                    p.removed = true;
                    q.removed = true;
                }
            } else {
                p.removed = true;
                q.removed = true;
            }
        }
    }

    const double edge_margin = std::max(period, 0.25 * params.block_size);

    std::vector<DetectedMinutia> out;
    for (const auto& cand : cands) {
        if (cand.removed)
            continue;
        const int m = params.border_margin;
        if (cand.c < m || cand.r < m || cand.c >= s.w - m || cand.r >= s.h - m)
            continue;
        if (field.rows > 0) {
            const int br = std::min(cand.r / field.block_size, field.rows - 1);
            const int bc = std::min(cand.c / field.block_size, field.cols - 1);
            if (field.coherence_at(br, bc) < params.min_quality_coherence)
                continue;
        }
        if (field.distance_to_background(cand.c, cand.r) < edge_margin)
            continue;
        out.push_back({{static_cast<double>(cand.c), static_cast<double>(cand.r), cand.theta}, cand.type});
    }
    return out;
}

MinutiaeSet extract_minutiae(const GrayImage& skeleton, const OrientationField& field, const ExtractParams& params)
{
    MinutiaeSet set;
    set.source_ppi = skeleton.ppi();
    for (const auto& d : extract_detailed(skeleton, field, params))
        set.minutiae.push_back(d.minutia);
    return set;
}

MinutiaeSet Extraction::as_set(int ppi) const
{
    MinutiaeSet set;
    set.source_ppi = ppi;
    for (const auto& d : minutiae)
        set.minutiae.push_back(d.minutia);
    return set;
}

Extraction run_pipeline(const GrayImage& img, const ExtractParams& params)
{
    Extraction ex;
    const GrayImage norm = normalize_image(img, params.target_std);
    ex.field = estimate_orientation_field(norm, params);
    ex.enhanced = enhance(norm, ex.field, params);
    ex.skeleton = binarize_and_thin(ex.enhanced, params);
    ex.minutiae = extract_detailed(ex.skeleton, ex.field, params);
    return ex;
}

}  // namespace infantprints::extract
