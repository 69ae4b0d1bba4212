#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bdf/frame.hpp"

namespace bdf {

enum class ChromaSubsampling { Mono, S420, S422, S444 };
enum class SamplePacking { OneByte, TwoByteLE };

struct RawLayoutConfig {
    int width = 0;
    int height = 0;
    int bit_depth = 8;
    ChromaSubsampling chroma = ChromaSubsampling::S420;
    SamplePacking packing = SamplePacking::OneByte;

    /// Throws ConfigError when the layout is impossible (e.g. 10-bit in one byte).
    void validate() const;
    std::size_t frame_bytes() const;
};

/// Plane dimensions implied by a luma size and subsampling, luma first.
std::vector<std::pair<int, int>> plane_dimensions(int width, int height, ChromaSubsampling chroma);

/// Subsampling inferred from the plane geometry of a frame.
ChromaSubsampling infer_subsampling(const Frame& frame);

/// Reads a YUV4MPEG2 stream. Samples above the declared depth are a RangeError.
VideoSequence read_y4m(std::istream& in);
VideoSequence read_y4m_file(const std::string& path);

/// Writes a YUV4MPEG2 stream; `comment` (if nonempty) is emitted as an X tag
/// with spaces replaced so the header stays one token per field.
void write_y4m(const VideoSequence& video, std::ostream& out, std::string_view comment = {});
void write_y4m_file(const VideoSequence& video, const std::string& path, std::string_view comment = {});

VideoSequence read_raw_planar(const RawLayoutConfig& config, std::istream& in);

/// Sidecar table: `index,type,size` per line, optional header, `#` comments.
std::vector<FrameMeta> read_frame_metadata(std::string_view text);
std::vector<FrameMeta> read_frame_metadata_file(const std::string& path);
std::string format_frame_metadata(std::span<const FrameMeta> meta, std::string_view comment = {});

std::string read_text_file(const std::string& path);
std::vector<std::uint8_t> read_binary_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);
void write_binary_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace bdf
