#include "bdf/frame.hpp"

#include <algorithm>
#include <string>

#include "bdf/error.hpp"

namespace bdf {

Plane::Plane(int width, int height, int bit_depth, std::vector<std::uint16_t> samples)
    : width_(width), height_(height), bit_depth_(bit_depth), samples_(std::move(samples)) {
    if (width <= 0 || height <= 0)
        throw Error(ErrorKind::Shape, "plane dimensions must be positive");
    if (bit_depth < kMinBitDepth || bit_depth > kMaxBitDepth)
        throw Error(ErrorKind::Range, "bit depth " + std::to_string(bit_depth) + " outside [6,16]");
    if (samples_.size() != static_cast<std::size_t>(width) * height)
        throw Error(ErrorKind::Shape, "sample count does not match width*height");
    const std::uint32_t limit = max_value();
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (samples_[i] > limit)
            throw Error(ErrorKind::Range, "sample " + std::to_string(samples_[i]) + " at " +
                                              std::to_string(i) + " exceeds " + std::to_string(bit_depth) +
                                              "-bit range");
    }
}

Plane Plane::filled(int width, int height, int bit_depth, std::uint16_t value) {
    return Plane(width, height, bit_depth,
                 std::vector<std::uint16_t>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), value));
}

Frame::Frame(std::vector<Plane> planes) : planes_(std::move(planes)) {
    if (planes_.size() != 1 && planes_.size() != 3)
        throw Error(ErrorKind::Shape, "frame must have 1 or 3 planes, got " + std::to_string(planes_.size()));
    for (const auto& p : planes_) {
        if (p.bit_depth() != planes_.front().bit_depth())
            throw Error(ErrorKind::Shape, "planes of one frame must share bit depth");
    }
}

char to_char(FrameType t) {
    switch (t) {
        case FrameType::I: return 'I';
        case FrameType::P: return 'P';
        case FrameType::B: return 'B';
    }
    return '?';
}

std::optional<FrameType> frame_type_from_char(char c) {
    switch (c) {
        case 'I': return FrameType::I;
        case 'P': return FrameType::P;
        case 'B': return FrameType::B;
        default: return std::nullopt;
    }
}

namespace {

bool same_layout(const Frame& a, const Frame& b) {
    if (a.plane_count() != b.plane_count()) return false;
    for (std::size_t i = 0; i < a.plane_count(); ++i) {
        const auto& p = a.plane(i);
        const auto& q = b.plane(i);
        if (p.width() != q.width() || p.height() != q.height() || p.bit_depth() != q.bit_depth()) return false;
    }
    return true;
}

}  // namespace

VideoSequence::VideoSequence(std::vector<Frame> frames, std::vector<FrameMeta> meta)
    : frames_(std::move(frames)), meta_(std::move(meta)) {
    for (const auto& f : frames_) {
        if (f.plane_count() == 0) throw Error(ErrorKind::Shape, "frame without planes");
        if (!same_layout(f, frames_.front()))
            throw Error(ErrorKind::Shape, "frames of a sequence must share geometry and bit depth");
    }
    if (!meta_.empty() && meta_.size() != frames_.size())
        throw Error(ErrorKind::Shape, "metadata count " + std::to_string(meta_.size()) +
                                          " does not match frame count " + std::to_string(frames_.size()));
    for (const auto& m : meta_) {
        if (m.compressed_size < 0) throw Error(ErrorKind::Range, "negative compressed size");
    }
}

VideoSequence VideoSequence::with_meta(std::vector<FrameMeta> meta) const {
    return VideoSequence(frames_, std::move(meta));
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

std::uint64_t mix_u64(std::uint64_t h, std::uint64_t v) {
    std::uint8_t buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
    return fnv1a64(buf, h);
}

std::uint64_t digest_into(std::uint64_t h, const Frame& frame) {
    for (const auto& p : frame.planes()) {
        h = mix_u64(h, static_cast<std::uint64_t>(p.width()) << 32 | static_cast<std::uint32_t>(p.height()));
        h = mix_u64(h, static_cast<std::uint64_t>(p.bit_depth()));
        auto s = p.samples();
        h = fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size_bytes()), h);
    }
    return h;
}

}  // namespace

std::uint64_t digest(const Frame& frame) { return digest_into(0xcbf29ce484222325ull, frame); }

std::uint64_t digest(const VideoSequence& video) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& f : video.frames()) h = digest_into(h, f);
    return h;
}

}  // namespace bdf
