#include "infantprints/image.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace infantprints {

namespace {

// Skips whitespace and comments; picks up "# ppi N" along the way.
void skip_header_space(std::istream& in, std::optional<int>& ppi)
{
    while (true) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            std::istringstream ls(line.substr(1));
            std::string key;
            int value = 0;
            if (ls >> key >> value && key == "ppi" && value > 0)
                ppi = value;
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

int read_header_int(std::istream& in, std::optional<int>& ppi, const std::string& what)
{
    skip_header_space(in, ppi);
    int v = 0;
    if (!(in >> v) || v <= 0)
        throw std::runtime_error("malformed PGM header (" + what + ")");
    return v;
}

double cubic_weight(double t)
{
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0)
        return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0)
        return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

struct Taps {
    int first;
    double w[4];
};

std::vector<Taps> make_taps(int in_size, int out_size)
{
    std::vector<Taps> taps(static_cast<std::size_t>(out_size));
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        const double src = (o + 0.5) * scale - 0.5;
        const int base = static_cast<int>(std::floor(src));
        const double frac = src - base;
        taps[o].first = base - 1;
        for (int k = 0; k < 4; ++k)
            taps[o].w[k] = cubic_weight(frac - (k - 1));
    }
    return taps;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path, int default_ppi)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open image " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5")
        throw std::runtime_error(path.string() + ": only binary PGM (P5) is supported");
    std::optional<int> ppi;
    const int width = read_header_int(in, ppi, "width");
    const int height = read_header_int(in, ppi, "height");
    const int maxval = read_header_int(in, ppi, "maxval");
    if (maxval > 65535)
        throw std::runtime_error(path.string() + ": maxval out of range");
    in.get();  // single whitespace before raster

    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<float> pixels(n);
    if (maxval < 256) {
        std::vector<unsigned char> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw std::runtime_error(path.string() + ": truncated raster");
        for (std::size_t i = 0; i < n; ++i)
            pixels[i] = std::min(1.0f, static_cast<float>(raw[i]) / maxval);
    } else {
        std::vector<unsigned char> raw(2 * n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(2 * n));
        if (static_cast<std::size_t>(in.gcount()) != 2 * n)
            throw std::runtime_error(path.string() + ": truncated raster");
        for (std::size_t i = 0; i < n; ++i)
            pixels[i] = std::min(1.0f, static_cast<float>((raw[2 * i] << 8) | raw[2 * i + 1]) / maxval);
    }
    return GrayImage(width, height, ppi.value_or(default_ppi), std::move(pixels));
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write image " + path.string());
    out << "P5\n# ppi " << img.ppi() << '\n' << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<unsigned char> raw(img.pixels().size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<unsigned char>(std::lround(std::clamp(img.pixels()[i], 0.0f, 1.0f) * 255.0f));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

std::optional<int> read_ppi_sidecar(const std::filesystem::path& image_path)
{
    auto sidecar = image_path;
    sidecar += ".ppi";
    std::ifstream in(sidecar);
    int v = 0;
    if (in && (in >> v) && v > 0)
        return v;
    return std::nullopt;
}

GrayImage resize_bicubic(const GrayImage& img, int out_width, int out_height, int out_ppi)
{
    if (out_width <= 0 || out_height <= 0)
        throw ValidationError("resize target must be positive");
    if (img.empty())
        throw ValidationError("cannot resize an empty image");

    const auto col_taps = make_taps(img.width(), out_width);
    const auto row_taps = make_taps(img.height(), out_height);

    // Horizontal pass into an intermediate (in_height x out_width) buffer.
    std::vector<double> tmp(static_cast<std::size_t>(img.height()) * out_width);
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < out_width; ++c) {
            const auto& t = col_taps[c];
            double acc = 0.0;
            for (int k = 0; k < 4; ++k)
                acc += t.w[k] * img.clamped(r, t.first + k);
            tmp[static_cast<std::size_t>(r) * out_width + c] = acc;
        }
    }

    GrayImage out(out_width, out_height, out_ppi);
    for (int r = 0; r < out_height; ++r) {
        const auto& t = row_taps[r];
        for (int c = 0; c < out_width; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                const int rr = std::clamp(t.first + k, 0, img.height() - 1);
                acc += t.w[k] * tmp[static_cast<std::size_t>(rr) * out_width + c];
            }
            out.at(r, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
        }
    }
    return out;
}

GrayImage scale_bicubic(const GrayImage& img, double scale)
{
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw ValidationError("scale factor must be positive");
    const int w = std::max(1, static_cast<int>(std::lround(scale * img.width())));
    const int h = std::max(1, static_cast<int>(std::lround(scale * img.height())));
    const int ppi = std::max(1, static_cast<int>(std::lround(scale * img.ppi())));
    return resize_bicubic(img, w, h, ppi);
}

double mean_intensity(const GrayImage& img)
{
    if (img.empty())
        return 0.0;
    double s = 0.0;
    for (float v : img.pixels())
        s += v;
    return s / static_cast<double>(img.pixels().size());
}

}  // namespace infantprints
