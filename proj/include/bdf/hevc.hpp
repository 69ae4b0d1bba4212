#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "bdf/frame.hpp"

namespace bdf::hevc {

/// One Annex-B NAL unit. `offset`/`size` cover the start code (and any zero
/// bytes owned by it), so unit sizes tile the stream.
struct NalUnit {
    std::size_t offset = 0;
    std::size_t size = 0;
    std::size_t header_offset = 0;  // first byte of the 2-byte NAL header
    int nal_unit_type = 0;
    int nuh_layer_id = 0;
    int temporal_id_plus1 = 0;

    std::size_t payload_offset() const { return header_offset + 2; }
    std::size_t end() const { return offset + size; }
};

enum NalType : int {
    kTrailN = 0,
    kRaslR = 9,
    kBlaWLp = 16,
    kIdrWRadl = 19,
    kIdrNLp = 20,
    kCraNut = 21,
    kRsvIrap23 = 23,
    kVps = 32,
    kSps = 33,
    kPps = 34,
    kAud = 35,
    kEos = 36,
    kEob = 37,
    kFd = 38,
    kPrefixSei = 39,
    kSuffixSei = 40,
};

inline bool is_vcl(int type) { return type >= 0 && type <= 31; }
inline bool is_irap(int type) { return type >= kBlaWLp && type <= kCraNut; }
inline bool is_reserved_vcl(int type) { return (type >= 10 && type <= 15) || (type >= 22 && type <= 31); }

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint32_t bits(int n);
    bool flag() { return bits(1) != 0; }
    std::uint32_t ue();
    std::int32_t se();
    void skip(std::size_t n);
    std::size_t bits_left() const { return data_.size() * 8 - pos_; }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

class BitWriter {
public:
    void bits(std::uint32_t value, int n);
    void flag(bool b) { bits(b ? 1u : 0u, 1); }
    void ue(std::uint32_t value);
    void se(std::int32_t value);
    /// rbsp_stop_one_bit followed by zero alignment bits.
    void trailing_bits();
    std::size_t bit_count() const { return bytes_.size() * 8 - (bit_pos_ == 0 ? 0 : 8 - bit_pos_); }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
    int bit_pos_ = 0;  // bits used in the last byte; 0 means byte aligned
};

/// Removes emulation_prevention_three_byte from a NAL payload.
std::vector<std::uint8_t> strip_emulation_prevention(std::span<const std::uint8_t> ebsp);
/// Inverse of strip_emulation_prevention.
std::vector<std::uint8_t> add_emulation_prevention(std::span<const std::uint8_t> rbsp);

std::vector<NalUnit> scan_nal_units(std::span<const std::uint8_t> bytes);

struct SpsInfo {
    std::uint32_t sps_id = 0;
    std::uint32_t chroma_format_idc = 1;
    std::uint32_t pic_width = 0;
    std::uint32_t pic_height = 0;
    std::uint32_t bit_depth_luma = 8;
    std::uint32_t log2_min_cb_size = 3;
    std::uint32_t log2_ctb_size = 4;
    bool separate_colour_plane = false;
    std::uint32_t log2_max_poc_lsb = 4;

    std::uint32_t pic_size_in_ctbs() const;
    /// Width of slice_segment_address: Ceil(Log2(PicSizeInCtbsY)).
    int slice_address_bits() const;
};

struct PpsInfo {
    std::uint32_t pps_id = 0;
    std::uint32_t sps_id = 0;
    bool dependent_slice_segments_enabled = false;
    bool output_flag_present = false;
    std::uint32_t num_extra_slice_header_bits = 0;
};

/// Parses an SPS RBSP (payload after the NAL header) up to the CTB size fields.
SpsInfo parse_sps(std::span<const std::uint8_t> rbsp);
PpsInfo parse_pps(std::span<const std::uint8_t> rbsp);

class ParamSetStore {
public:
    void put(const SpsInfo& sps) { sps_[sps.sps_id] = sps; }
    /// Rejects a PPS whose SPS is unknown.
    void put(const PpsInfo& pps);
    const SpsInfo* sps(std::uint32_t id) const;
    const PpsInfo* pps(std::uint32_t id) const;
    bool has_pps() const { return !pps_.empty(); }

private:
    std::map<std::uint32_t, SpsInfo> sps_;
    std::map<std::uint32_t, PpsInfo> pps_;
};

struct SliceHeaderStart {
    bool first_slice_segment_in_pic = false;
    bool dependent_slice_segment = false;
    std::uint32_t pps_id = 0;
    std::uint32_t slice_type = 2;
    std::uint32_t pic_order_cnt_lsb = 0;  // 0 for IDR pictures
};

/// Parses a slice segment header just far enough to read slice_type and
/// slice_pic_order_cnt_lsb.
SliceHeaderStart parse_slice_header_start(std::span<const std::uint8_t> rbsp, int nal_unit_type,
                                          const ParamSetStore& store);

struct Picture {
    FrameMeta meta;  // meta.index is the decode position
    int nal_unit_type = 0;
    std::int64_t cvs = 0;  // coded video sequence counter
    std::int64_t poc = 0;  // PicOrderCntVal
    bool poc_known = true;
};

/// Groups NAL units into pictures in decode order. Parameter sets found in
/// the stream are added to `store`. Non-slice units are charged to the next
/// picture; any after the last picture are charged to the last picture.
/// IRAP pictures are typed I without relying on the slice header; if their
/// header cannot be read, poc_known is false.
std::vector<Picture> scan_pictures(std::span<const NalUnit> nals, std::span<const std::uint8_t> bytes,
                                   ParamSetStore& store);

/// scan_pictures reduced to FrameMeta, decode order.
std::vector<FrameMeta> classify_pictures(std::span<const NalUnit> nals, std::span<const std::uint8_t> bytes,
                                         ParamSetStore& store);

/// Sorts pictures by (cvs, poc) and renumbers index as the display position.
/// Throws ParseError if any picture lacks a picture order count.
std::vector<FrameMeta> display_order(std::span<const Picture> pictures);

enum class Order { Decode, Display };

/// scan_nal_units + scan_pictures with a fresh store.
std::vector<FrameMeta> parse_stream(std::span<const std::uint8_t> bytes, Order order = Order::Decode);

}  // namespace bdf::hevc
