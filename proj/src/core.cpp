#include "infantprints/core.hpp"

#include <algorithm>

namespace infantprints {

double wrap_two_pi(double theta)
{
    double r = std::fmod(theta, kTwoPi);
    if (r < 0.0)
        r += kTwoPi;
    // fmod of a tiny negative value can round up to exactly 2pi
    if (r >= kTwoPi)
        r = 0.0;
    return r;
}

Vec2 rotate_about(Vec2 p, Vec2 center, double angle)
{
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double dx = p.x - center.x;
    const double dy = p.y - center.y;
    return {center.x + c * dx + s * dy, center.y - s * dx + c * dy};
}

GrayImage::GrayImage(int width, int height, int ppi, float fill)
    : width_(width), height_(height), ppi_(ppi)
{
    if (width < 0 || height < 0)
        throw ValidationError("image dimensions must be non-negative");
    if (ppi <= 0)
        throw ValidationError("ppi must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, int ppi, std::vector<float> pixels)
    : width_(width), height_(height), ppi_(ppi), pixels_(std::move(pixels))
{
    validate();
}

float GrayImage::clamped(int row, int col) const
{
    row = std::clamp(row, 0, height_ - 1);
    col = std::clamp(col, 0, width_ - 1);
    return at(row, col);
}

void GrayImage::set_ppi(int ppi)
{
    if (ppi <= 0)
        throw ValidationError("ppi must be positive");
    ppi_ = ppi;
}

void GrayImage::validate() const
{
    if (width_ < 0 || height_ < 0)
        throw ValidationError("image dimensions must be non-negative");
    if (ppi_ <= 0)
        throw ValidationError("ppi must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width_) * height_)
        throw ValidationError("pixel buffer does not match width x height");
    for (float v : pixels_) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
            throw ValidationError("pixel intensity outside [0,1]");
    }
}

void validate(const Minutia& m)
{
    if (!std::isfinite(m.x) || !std::isfinite(m.y) || m.x < 0.0 || m.y < 0.0)
        throw ValidationError("minutia coordinates must be finite and non-negative");
    if (!std::isfinite(m.theta) || m.theta < 0.0 || m.theta >= kTwoPi)
        throw ValidationError("minutia orientation must lie in [0, 2pi)");
}

void validate(const MinutiaeSet& set)
{
    if (set.source_ppi <= 0)
        throw ValidationError("minutiae set ppi must be positive");
    for (const auto& m : set.minutiae)
        validate(m);
}

std::string to_string(Thumb thumb)
{
    return thumb == Thumb::left ? "left" : "right";
}

std::string to_string(Gender gender)
{
    switch (gender) {
    case Gender::male:
        return "male";
    case Gender::female:
        return "female";
    case Gender::unknown:
        break;
    }
    return "unknown";
}

Thumb parse_thumb(const std::string& text)
{
    if (text == "left" || text == "L")
        return Thumb::left;
    if (text == "right" || text == "R")
        return Thumb::right;
    throw ValidationError("unknown thumb label: " + text);
}

Gender parse_gender(const std::string& text)
{
    if (text == "male" || text == "M")
        return Gender::male;
    if (text == "female" || text == "F")
        return Gender::female;
    if (text == "unknown" || text == "U" || text.empty())
        return Gender::unknown;
    throw ValidationError("unknown gender label: " + text);
}

void validate(const Template& t)
{
    if (t.age_weeks_at_capture < 0 || t.age_weeks_at_capture >= kMaxAgeWeeks)
        throw ValidationError("age_weeks_at_capture out of range");
    validate(t.minutiae);
    if (t.embedding) {
        if (t.embedding->size() != kEmbeddingDim)
            throw ValidationError("embedding must have dimension 192");
        double norm2 = 0.0;
        for (float v : *t.embedding) {
            if (!std::isfinite(v))
                throw ValidationError("embedding contains a non-finite value");
            norm2 += static_cast<double>(v) * v;
        }
        if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6)
            throw ValidationError("embedding must be unit norm");
    }
}

void validate(const FusionWeights& w)
{
    if (!(w.minutiae >= 0.0) || !(w.texture >= 0.0) || !(w.external >= 0.0))
        throw ValidationError("fusion weights must be non-negative");
    if (std::abs(w.minutiae + w.texture + w.external - 1.0) > 1e-9)
        throw ValidationError("fusion weights must sum to 1");
}

}  // namespace infantprints
