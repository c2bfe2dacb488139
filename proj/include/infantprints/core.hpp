#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace infantprints {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr std::size_t kEmbeddingDim = 192;
inline constexpr int kMaxAgeWeeks = 1040;

// Raised whenever a value violates a domain invariant.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Reduce an angle into [0, 2pi).
double wrap_two_pi(double theta);

// Angles use x = column, y = row (origin top-left) and grow counter-clockwise
// as seen on screen, so the unit vector for theta is (cos theta, -sin theta).
struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 direction_of(double theta) { return {std::cos(theta), -std::sin(theta)}; }
inline double angle_of(double dx, double dy) { return wrap_two_pi(std::atan2(-dy, dx)); }

// Rotates a point about `center` by `angle` (counter-clockwise on screen).
Vec2 rotate_about(Vec2 p, Vec2 center, double angle);

class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, int ppi, float fill = 0.0f);
    GrayImage(int width, int height, int ppi, std::vector<float> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    int ppi() const { return ppi_; }
    bool empty() const { return pixels_.empty(); }

    float at(int row, int col) const { return pixels_[static_cast<std::size_t>(row) * width_ + col]; }
    float& at(int row, int col) { return pixels_[static_cast<std::size_t>(row) * width_ + col]; }
    // Border-replicating access.
    float clamped(int row, int col) const;

    const std::vector<float>& pixels() const { return pixels_; }
    std::vector<float>& pixels() { return pixels_; }

    void set_ppi(int ppi);
    // Throws ValidationError if any invariant is broken.
    void validate() const;

private:
    int width_ = 0;
    int height_ = 0;
    int ppi_ = 500;
    std::vector<float> pixels_;
};

struct Minutia {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    bool operator==(const Minutia&) const = default;
};

void validate(const Minutia& m);

struct MinutiaeSet {
    std::vector<Minutia> minutiae;
    int source_ppi = 500;

    std::size_t size() const { return minutiae.size(); }
    bool empty() const { return minutiae.empty(); }
    bool operator==(const MinutiaeSet&) const = default;
};

void validate(const MinutiaeSet& set);

enum class Thumb : std::uint8_t { left = 0, right = 1 };
enum class Gender : std::uint8_t { male = 0, female = 1, unknown = 2 };

std::string to_string(Thumb thumb);
std::string to_string(Gender gender);
Thumb parse_thumb(const std::string& text);
Gender parse_gender(const std::string& text);

struct Template {
    std::string subject_id;
    Thumb thumb = Thumb::left;
    std::string session_id;
    int age_weeks_at_capture = 0;
    Gender gender = Gender::unknown;
    MinutiaeSet minutiae;
    std::optional<std::vector<float>> embedding;
    bool aged = false;

    bool operator==(const Template&) const = default;
};

void validate(const Template& t);

struct ScoreBundle {
    std::optional<double> minutiae;
    std::optional<double> texture;
    std::optional<double> external;

    bool any() const { return minutiae || texture || external; }
};

struct FusionWeights {
    double minutiae = 0.6;
    double texture = 0.1;
    double external = 0.3;

    bool operator==(const FusionWeights&) const = default;
};

void validate(const FusionWeights& w);

}  // namespace infantprints
