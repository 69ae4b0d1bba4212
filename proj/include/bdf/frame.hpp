#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace bdf {

inline constexpr int kMinBitDepth = 6;
inline constexpr int kMaxBitDepth = 16;

/// One color channel: row-major unsigned samples, each below 2^bit_depth.
/// Storage is 16-bit for every depth so 6/8/10-bit content share code paths.
class Plane {
public:
    Plane() = default;
    Plane(int width, int height, int bit_depth, std::vector<std::uint16_t> samples);

    /// Constant-valued plane.
    static Plane filled(int width, int height, int bit_depth, std::uint16_t value);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int bit_depth() const noexcept { return bit_depth_; }
    std::uint32_t max_value() const noexcept { return (1u << bit_depth_) - 1u; }

    std::uint16_t at(int x, int y) const { return samples_[static_cast<std::size_t>(y) * width_ + x]; }
    std::span<const std::uint16_t> samples() const noexcept { return samples_; }
    std::span<const std::uint16_t> row(int y) const {
        return std::span<const std::uint16_t>(samples_).subspan(static_cast<std::size_t>(y) * width_, width_);
    }

    bool operator==(const Plane&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    int bit_depth_ = 8;
    std::vector<std::uint16_t> samples_;
};

/// Luma plus optional chroma. Chroma may be subsampled.
class Frame {
public:
    Frame() = default;
    explicit Frame(std::vector<Plane> planes);

    std::span<const Plane> planes() const noexcept { return planes_; }
    const Plane& plane(std::size_t i) const { return planes_.at(i); }
    std::size_t plane_count() const noexcept { return planes_.size(); }
    int bit_depth() const noexcept { return planes_.front().bit_depth(); }
    int width() const noexcept { return planes_.front().width(); }
    int height() const noexcept { return planes_.front().height(); }

    bool operator==(const Frame&) const = default;

private:
    std::vector<Plane> planes_;
};

enum class FrameType : std::uint8_t { I, P, B };

inline constexpr FrameType kFrameTypes[] = {FrameType::I, FrameType::P, FrameType::B};

char to_char(FrameType t);
std::optional<FrameType> frame_type_from_char(char c);

/// Coding metadata of one picture.
struct FrameMeta {
    std::int64_t index = 0;
    FrameType frame_type = FrameType::I;
    std::int64_t compressed_size = 0;

    bool operator==(const FrameMeta&) const = default;
};

/// Ordered frames with identical geometry, optionally carrying per-frame metadata.
class VideoSequence {
public:
    VideoSequence() = default;
    explicit VideoSequence(std::vector<Frame> frames, std::vector<FrameMeta> meta = {});

    std::span<const Frame> frames() const noexcept { return frames_; }
    const Frame& frame(std::size_t i) const { return frames_.at(i); }
    std::size_t size() const noexcept { return frames_.size(); }
    bool empty() const noexcept { return frames_.empty(); }

    bool has_meta() const noexcept { return !meta_.empty(); }
    std::span<const FrameMeta> meta() const noexcept { return meta_; }

    /// Copy of this sequence with metadata attached (validated against frame count).
    VideoSequence with_meta(std::vector<FrameMeta> meta) const;

    bool operator==(const VideoSequence&) const = default;

private:
    std::vector<Frame> frames_;
    std::vector<FrameMeta> meta_;
};

/// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

/// Content digest of every sample of every plane, with geometry folded in.
std::uint64_t digest(const VideoSequence& video);
std::uint64_t digest(const Frame& frame);

}  // namespace bdf
