#include "infantprints/template_codec.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace infantprints {

namespace {

constexpr std::uint8_t kMagic[4] = {'I', 'P', 'T', 'F'};
constexpr std::uint8_t kFlagEmbedding = 0x01;
constexpr std::uint8_t kFlagAged = 0x02;
constexpr double kCoordinateLimit = static_cast<double>(1u << 24) / 256.0;

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v)
    {
        out_.push_back(static_cast<std::uint8_t>(v & 0xff));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u24(std::uint32_t v)
    {
        for (int i = 0; i < 3; ++i)
            out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void text(const std::string& s)
    {
        if (s.size() > 255)
            throw ValidationError("identifier longer than 255 bytes: " + s);
        u8(static_cast<std::uint8_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8()
    {
        need(1, "header");
        return bytes_[pos_++];
    }
    std::uint16_t u16(const char* field)
    {
        need(2, field);
        std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u24(const char* field)
    {
        need(3, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 3; ++i)
            v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 3;
        return v;
    }
    float f32(const char* field)
    {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return std::bit_cast<float>(v);
    }
    std::string text(const char* field)
    {
        need(1, field);
        const std::size_t n = bytes_[pos_++];
        need(n, field);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void need(std::size_t n, const char* field) const
    {
        if (bytes_.size() - pos_ < n)
            throw TemplateFormatError(TemplateErrorKind::truncated,
                                      std::string("template truncated in ") + field);
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t quantize_coordinate(double v)
{
    if (!(v >= 0.0) || v * 256.0 + 0.5 >= static_cast<double>(1u << 24))
        throw ValidationError("coordinate outside the encodable range [0, 65536)");
    return static_cast<std::uint32_t>(std::lround(v * 256.0));
}

double dequantize_coordinate(std::uint32_t q)
{
    return static_cast<double>(q) / 256.0;
}

std::uint16_t quantize_angle(double theta)
{
    const double turns = wrap_two_pi(theta) / kTwoPi * 65536.0;
    return static_cast<std::uint16_t>(static_cast<std::uint32_t>(std::lround(turns)) & 0xffffu);
}

double dequantize_angle(std::uint16_t q)
{
    return static_cast<double>(q) * kTwoPi / 65536.0;
}

Template quantized(Template t)
{
    for (auto& m : t.minutiae.minutiae) {
        m.x = dequantize_coordinate(quantize_coordinate(m.x));
        m.y = dequantize_coordinate(quantize_coordinate(m.y));
        m.theta = dequantize_angle(quantize_angle(m.theta));
    }
    return t;
}

std::vector<std::uint8_t> write_template(const Template& t)
{
    validate(t);
    if (t.minutiae.size() > 0xffff)
        throw ValidationError("too many minutiae for IPTF");
    if (t.minutiae.source_ppi > 0xffff)
        throw ValidationError("ppi does not fit in 16 bits");

    Writer w;
    for (auto b : kMagic)
        w.u8(b);
    w.u8(kTemplateVersion);
    std::uint8_t flags = 0;
    if (t.embedding)
        flags |= kFlagEmbedding;
    if (t.aged)
        flags |= kFlagAged;
    w.u8(flags);
    w.u16(static_cast<std::uint16_t>(t.minutiae.source_ppi));
    w.u8(static_cast<std::uint8_t>(t.thumb));
    w.u8(static_cast<std::uint8_t>(t.gender));
    w.u16(static_cast<std::uint16_t>(t.age_weeks_at_capture));
    w.text(t.subject_id);
    w.text(t.session_id);
    w.u16(static_cast<std::uint16_t>(t.minutiae.size()));
    for (const auto& m : t.minutiae.minutiae) {
        if (m.x >= kCoordinateLimit || m.y >= kCoordinateLimit)
            throw ValidationError("minutia coordinate exceeds IPTF range");
        w.u24(quantize_coordinate(m.x));
        w.u24(quantize_coordinate(m.y));
        w.u16(quantize_angle(m.theta));
    }
    if (t.embedding) {
        for (float v : *t.embedding)
            w.f32(v);
    }
    return w.take();
}

Template read_template(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw TemplateFormatError(TemplateErrorKind::bad_magic, "not an IPTF template (bad magic)");
    Reader r(bytes.subspan(4));
    const std::uint8_t version = r.u8();
    if (version != kTemplateVersion)
        throw TemplateFormatError(TemplateErrorKind::unsupported_version,
                                  "unsupported IPTF version " + std::to_string(version));
    const std::uint8_t flags = r.u8();
    if ((flags & ~(kFlagEmbedding | kFlagAged)) != 0)
        throw TemplateFormatError(TemplateErrorKind::invalid, "unknown IPTF flag bits");

    Template t;
    t.minutiae.source_ppi = r.u16("header");
    const std::uint8_t thumb = r.u8();
    const std::uint8_t gender = r.u8();
    if (thumb > 1 || gender > 2)
        throw TemplateFormatError(TemplateErrorKind::invalid, "invalid thumb or gender code");
    t.thumb = static_cast<Thumb>(thumb);
    t.gender = static_cast<Gender>(gender);
    t.age_weeks_at_capture = r.u16("header");
    t.subject_id = r.text("subject_id");
    t.session_id = r.text("session_id");
    t.aged = (flags & kFlagAged) != 0;

    const std::size_t count = r.u16("minutiae count");
    r.need(count * kMinutiaRecordBytes, "minutiae block");
    t.minutiae.minutiae.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Minutia m;
        m.x = dequantize_coordinate(r.u24("minutiae block"));
        m.y = dequantize_coordinate(r.u24("minutiae block"));
        m.theta = dequantize_angle(r.u16("minutiae block"));
        t.minutiae.minutiae.push_back(m);
    }
    if (flags & kFlagEmbedding) {
        r.need(kEmbeddingDim * 4, "embedding");
        std::vector<float> e(kEmbeddingDim);
        for (auto& v : e)
            v = r.f32("embedding");
        t.embedding = std::move(e);
    }
    if (r.remaining() != 0)
        throw TemplateFormatError(TemplateErrorKind::invalid, "trailing bytes after IPTF payload");
    try {
        validate(t);
    } catch (const ValidationError& e) {
        throw TemplateFormatError(TemplateErrorKind::invalid, e.what());
    }
    return t;
}

void save_template(const Template& t, const std::filesystem::path& path)
{
    const auto bytes = write_template(t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw std::runtime_error("failed writing " + path.string());
}

Template load_template(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_template(bytes);
}

}  // namespace infantprints
