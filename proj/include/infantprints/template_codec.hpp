#pragma once

#include "infantprints/core.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace infantprints {

// IPTF v1, all multi-byte fields little-endian:
//
//   "IPTF" | version u8 | flags u8 (bit0 embedding, bit1 aged) | ppi u16
//   | thumb u8 | gender u8 | age_weeks u16
//   | subject_id (u8 length + UTF-8) | session_id (u8 length + UTF-8)
//   | count u16 | count x { x u24, y u24 (8 fractional bits), theta u16 turns }
//   | [192 x f32 embedding]
inline constexpr std::uint8_t kTemplateVersion = 1;
inline constexpr std::size_t kTemplateFixedHeaderBytes = 4 + 1 + 1 + 2 + 1 + 1 + 2 + 1 + 1 + 2;
inline constexpr std::size_t kMinutiaRecordBytes = 8;

enum class TemplateErrorKind { bad_magic, unsupported_version, truncated, invalid };

class TemplateFormatError : public std::runtime_error {
public:
    TemplateFormatError(TemplateErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {
    }
    TemplateErrorKind kind() const { return kind_; }

private:
    TemplateErrorKind kind_;
};

// Quantization used by the codec, exposed for tests and callers that want to
// pre-round coordinates.
std::uint32_t quantize_coordinate(double v);
double dequantize_coordinate(std::uint32_t q);
std::uint16_t quantize_angle(double theta);
double dequantize_angle(std::uint16_t q);

// Rounds every minutia to the codec's fixed-point grid so that a round trip
// through write/read is exact.
Template quantized(Template t);

std::vector<std::uint8_t> write_template(const Template& t);
Template read_template(std::span<const std::uint8_t> bytes);

void save_template(const Template& t, const std::filesystem::path& path);
Template load_template(const std::filesystem::path& path);

}  // namespace infantprints
