#include "bdf/hevc.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <utility>

#include "bdf/error.hpp"

namespace bdf::hevc {

std::uint32_t BitReader::bits(int n) {
    if (n < 0 || n > 32) throw Error(ErrorKind::Parse, "bit read width out of range");
    if (static_cast<std::size_t>(n) > bits_left()) throw Error(ErrorKind::Parse, "read past end of RBSP");
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) {
        const auto byte = data_[pos_ >> 3];
        v = (v << 1) | ((byte >> (7 - (pos_ & 7))) & 1u);
        ++pos_;
    }
    return v;
}

std::uint32_t BitReader::ue() {
    int leading = 0;
    while (!flag()) {
        if (++leading > 32) throw Error(ErrorKind::Parse, "exp-Golomb code longer than 32 bits");
    }
    if (leading == 0) return 0;
    const std::uint64_t suffix = bits(leading);
    const std::uint64_t v = (std::uint64_t{1} << leading) - 1 + suffix;
    if (v > 0xffffffffull) throw Error(ErrorKind::Parse, "exp-Golomb value overflows 32 bits");
    return static_cast<std::uint32_t>(v);
}

std::int32_t BitReader::se() {
    const std::uint32_t k = ue();
    const auto mag = static_cast<std::int64_t>((static_cast<std::uint64_t>(k) + 1) / 2);
    return static_cast<std::int32_t>((k & 1u) ? mag : -mag);
}

void BitReader::skip(std::size_t n) {
    if (n > bits_left()) throw Error(ErrorKind::Parse, "skip past end of RBSP");
    pos_ += n;
}

void BitWriter::bits(std::uint32_t value, int n) {
    for (int i = n - 1; i >= 0; --i) {
        if (bit_pos_ == 0) bytes_.push_back(0);
        if ((value >> i) & 1u) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> bit_pos_);
        bit_pos_ = (bit_pos_ + 1) & 7;
    }
}

void BitWriter::ue(std::uint32_t value) {
    const std::uint64_t v = static_cast<std::uint64_t>(value) + 1;
    int len = 0;
    while ((v >> (len + 1)) != 0) ++len;
    bits(0, len);
    // v has len+1 significant bits; the top one is the marker.
    if (len + 1 > 32) {
        bits(1, 1);
        bits(static_cast<std::uint32_t>(v), len);
    } else {
        bits(static_cast<std::uint32_t>(v), len + 1);
    }
}

void BitWriter::se(std::int32_t value) {
    const std::int64_t v = value;
    ue(static_cast<std::uint32_t>(v > 0 ? 2 * v - 1 : -2 * v));
}

void BitWriter::trailing_bits() {
    flag(true);
    while (bit_pos_ != 0) flag(false);
}

std::vector<std::uint8_t> strip_emulation_prevention(std::span<const std::uint8_t> ebsp) {
    std::vector<std::uint8_t> out;
    out.reserve(ebsp.size());
    int zeros = 0;
    for (std::size_t i = 0; i < ebsp.size(); ++i) {
        const auto b = ebsp[i];
        if (zeros >= 2 && b == 0x03 && (i + 1 == ebsp.size() || ebsp[i + 1] <= 0x03)) {
            zeros = 0;
            continue;
        }
        out.push_back(b);
        zeros = b == 0 ? zeros + 1 : 0;
    }
    return out;
}

std::vector<std::uint8_t> add_emulation_prevention(std::span<const std::uint8_t> rbsp) {
    std::vector<std::uint8_t> out;
    out.reserve(rbsp.size() + rbsp.size() / 64 + 1);
    int zeros = 0;
    for (std::size_t i = 0; i < rbsp.size(); ++i) {
        const auto b = rbsp[i];
        if (zeros >= 2 && b <= 0x03) {
            out.push_back(0x03);
            zeros = 0;
        }
        out.push_back(b);
        zeros = b == 0 ? zeros + 1 : 0;
    }
    // A payload must not end in 0x00; cabac_zero_words-style tails get a guard byte.
    if (zeros >= 2) out.push_back(0x03);
    return out;
}

std::vector<NalUnit> scan_nal_units(std::span<const std::uint8_t> bytes) {
    // Positions of the 0x01 that terminates each 00 00 01 start code prefix.
    std::vector<std::size_t> prefix_ends;
    for (std::size_t i = 2; i < bytes.size(); ++i) {
        if (bytes[i] == 0x01 && bytes[i - 1] == 0x00 && bytes[i - 2] == 0x00) prefix_ends.push_back(i);
    }
    if (prefix_ends.empty()) throw Error(ErrorKind::Parse, "no Annex-B start code found");

    std::vector<NalUnit> units;
    units.reserve(prefix_ends.size());
    for (std::size_t k = 0; k < prefix_ends.size(); ++k) {
        NalUnit u;
        const std::size_t code_start = prefix_ends[k] - 2;
        u.header_offset = prefix_ends[k] + 1;
        if (k == 0) {
            u.offset = 0;
        } else {
            // A zero_byte directly before the prefix makes it a 4-byte start code.
            const auto& prev = units.back();
            u.offset = (code_start > prev.header_offset + 2 && bytes[code_start - 1] == 0x00) ? code_start - 1
                                                                                            : code_start;
        }
        units.push_back(u);
    }
    for (std::size_t k = 0; k < units.size(); ++k) {
        auto& u = units[k];
        const std::size_t end = k + 1 < units.size() ? units[k + 1].offset : bytes.size();
        u.size = end - u.offset;
        if (u.header_offset + 2 > end)
            throw Error(ErrorKind::Parse, "NAL unit at offset " + std::to_string(u.offset) + " has no header");
        const auto h0 = bytes[u.header_offset];
        const auto h1 = bytes[u.header_offset + 1];
        if (h0 & 0x80) throw Error(ErrorKind::Parse, "forbidden_zero_bit set at offset " + std::to_string(u.offset));
        u.nal_unit_type = (h0 >> 1) & 0x3f;
        u.nuh_layer_id = ((h0 & 1) << 5) | (h1 >> 3);
        u.temporal_id_plus1 = h1 & 0x7;
    }
    return units;
}

std::uint32_t SpsInfo::pic_size_in_ctbs() const {
    const std::uint64_t ctb = std::uint64_t{1} << log2_ctb_size;
    const std::uint64_t w = (pic_width + ctb - 1) / ctb;
    const std::uint64_t h = (pic_height + ctb - 1) / ctb;
    return static_cast<std::uint32_t>(w * h);
}

int SpsInfo::slice_address_bits() const {
    const std::uint32_t n = pic_size_in_ctbs();
    int bits = 0;
    while ((std::uint64_t{1} << bits) < n) ++bits;
    return bits;
}

namespace {

void skip_profile_tier_level(BitReader& br, std::uint32_t max_sub_layers_minus1) {
    br.skip(88);  // general profile space/tier/idc, compatibility and constraint flags
    br.skip(8);   // general_level_idc
    std::vector<bool> profile_present(max_sub_layers_minus1), level_present(max_sub_layers_minus1);
    for (std::uint32_t i = 0; i < max_sub_layers_minus1; ++i) {
        profile_present[i] = br.flag();
        level_present[i] = br.flag();
    }
    if (max_sub_layers_minus1 > 0) {
        for (std::uint32_t i = max_sub_layers_minus1; i < 8; ++i) br.skip(2);
    }
    for (std::uint32_t i = 0; i < max_sub_layers_minus1; ++i) {
        if (profile_present[i]) br.skip(88);
        if (level_present[i]) br.skip(8);
    }
}

}  // namespace

SpsInfo parse_sps(std::span<const std::uint8_t> rbsp) {
    BitReader br(rbsp);
    SpsInfo sps;
    br.skip(4);  // sps_video_parameter_set_id
    const std::uint32_t max_sub_layers_minus1 = br.bits(3);
    if (max_sub_layers_minus1 > 6) throw Error(ErrorKind::Parse, "sps_max_sub_layers_minus1 > 6");
    br.skip(1);  // sps_temporal_id_nesting_flag
    skip_profile_tier_level(br, max_sub_layers_minus1);
    sps.sps_id = br.ue();
    if (sps.sps_id > 15) throw Error(ErrorKind::Parse, "sps_seq_parameter_set_id > 15");
    sps.chroma_format_idc = br.ue();
    if (sps.chroma_format_idc > 3) throw Error(ErrorKind::Parse, "chroma_format_idc > 3");
    if (sps.chroma_format_idc == 3) sps.separate_colour_plane = br.flag();
    sps.pic_width = br.ue();
    sps.pic_height = br.ue();
    if (sps.pic_width == 0 || sps.pic_height == 0 || sps.pic_width > 16888 || sps.pic_height > 16888)
        throw Error(ErrorKind::Parse, "implausible picture size in SPS");
    if (br.flag()) {  // conformance_window_flag
        for (int i = 0; i < 4; ++i) br.ue();
    }
    sps.bit_depth_luma = br.ue() + 8;
    br.ue();  // bit_depth_chroma_minus8
    const std::uint32_t log2_max_poc_lsb_minus4 = br.ue();
    if (log2_max_poc_lsb_minus4 > 12) throw Error(ErrorKind::Parse, "log2_max_pic_order_cnt_lsb_minus4 > 12");
    sps.log2_max_poc_lsb = log2_max_poc_lsb_minus4 + 4;
    const bool ordering_info_present = br.flag();
    for (std::uint32_t i = ordering_info_present ? 0 : max_sub_layers_minus1; i <= max_sub_layers_minus1; ++i) {
        br.ue();  // sps_max_dec_pic_buffering_minus1
        br.ue();  // sps_max_num_reorder_pics
        br.ue();  // sps_max_latency_increase_plus1
    }
    const std::uint32_t log2_min_cb_minus3 = br.ue();
    const std::uint32_t log2_diff_max_min = br.ue();
    sps.log2_min_cb_size = log2_min_cb_minus3 + 3;
    sps.log2_ctb_size = sps.log2_min_cb_size + log2_diff_max_min;
    if (sps.log2_ctb_size < 4 || sps.log2_ctb_size > 6) throw Error(ErrorKind::Parse, "CTB size outside 16..64");
    return sps;
}

PpsInfo parse_pps(std::span<const std::uint8_t> rbsp) {
    BitReader br(rbsp);
    PpsInfo pps;
    pps.pps_id = br.ue();
    if (pps.pps_id > 63) throw Error(ErrorKind::Parse, "pps_pic_parameter_set_id > 63");
    pps.sps_id = br.ue();
    if (pps.sps_id > 15) throw Error(ErrorKind::Parse, "pps_seq_parameter_set_id > 15");
    pps.dependent_slice_segments_enabled = br.flag();
    pps.output_flag_present = br.flag();
    pps.num_extra_slice_header_bits = br.bits(3);
    return pps;
}

void ParamSetStore::put(const PpsInfo& pps) {
    if (!sps(pps.sps_id))
        throw Error(ErrorKind::Parse, "PPS " + std::to_string(pps.pps_id) + " references unknown SPS " +
                                          std::to_string(pps.sps_id));
    pps_[pps.pps_id] = pps;
}

const SpsInfo* ParamSetStore::sps(std::uint32_t id) const {
    auto it = sps_.find(id);
    return it == sps_.end() ? nullptr : &it->second;
}

const PpsInfo* ParamSetStore::pps(std::uint32_t id) const {
    auto it = pps_.find(id);
    return it == pps_.end() ? nullptr : &it->second;
}

SliceHeaderStart parse_slice_header_start(std::span<const std::uint8_t> rbsp, int nal_unit_type,
                                          const ParamSetStore& store) {
    BitReader br(rbsp);
    SliceHeaderStart sh;
    sh.first_slice_segment_in_pic = br.flag();
    if (nal_unit_type >= kBlaWLp && nal_unit_type <= kRsvIrap23) br.skip(1);  // no_output_of_prior_pics_flag
    sh.pps_id = br.ue();
    const PpsInfo* pps = store.pps(sh.pps_id);
    if (!pps) throw Error(ErrorKind::Parse, "slice references unknown PPS " + std::to_string(sh.pps_id));
    const SpsInfo* sps = store.sps(pps->sps_id);
    if (!sps) throw Error(ErrorKind::Parse, "PPS references unknown SPS");
    if (!sh.first_slice_segment_in_pic) {
        if (pps->dependent_slice_segments_enabled) sh.dependent_slice_segment = br.flag();
        br.skip(static_cast<std::size_t>(sps->slice_address_bits()));
    }
    if (!sh.dependent_slice_segment) {
        br.skip(pps->num_extra_slice_header_bits);
        sh.slice_type = br.ue();
        if (sh.slice_type > 2) throw Error(ErrorKind::Parse, "slice_type " + std::to_string(sh.slice_type));
        if (pps->output_flag_present) br.skip(1);  // pic_output_flag
        if (sps->separate_colour_plane) br.skip(2);  // colour_plane_id
        if (nal_unit_type != kIdrWRadl && nal_unit_type != kIdrNLp)
            sh.pic_order_cnt_lsb = br.bits(static_cast<int>(sps->log2_max_poc_lsb));
    }
    return sh;
}

namespace {

std::span<const std::uint8_t> payload_of(const NalUnit& u, std::span<const std::uint8_t> bytes) {
    return bytes.subspan(u.payload_offset(), u.end() - u.payload_offset());
}

FrameType frame_type_of(std::uint32_t slice_type) {
    switch (slice_type) {
        case 0: return FrameType::B;
        case 1: return FrameType::P;
        default: return FrameType::I;
    }
}

struct PocState {
    bool started = false;
    bool after_eos = false;
    std::int64_t cvs = -1;
    std::int64_t prev_lsb = 0;
    std::int64_t prev_msb = 0;
};

// Returns the picture order count of a first slice segment and advances the
// coded video sequence counter at each IRAP that resets the count.
std::int64_t next_poc(PocState& st, int nal_type, int temporal_id, std::uint32_t lsb, std::uint32_t log2_max_lsb) {
    const bool idr = nal_type == kIdrWRadl || nal_type == kIdrNLp;
    const bool bla = nal_type >= kBlaWLp && nal_type < kIdrWRadl;
    const bool reset = is_irap(nal_type) && (idr || bla || !st.started || st.after_eos);
    const std::int64_t max_lsb = std::int64_t{1} << log2_max_lsb;
    const auto cur = static_cast<std::int64_t>(lsb);
    std::int64_t msb = 0;
    if (reset) {
        ++st.cvs;
    } else if (cur < st.prev_lsb && st.prev_lsb - cur >= max_lsb / 2) {
        msb = st.prev_msb + max_lsb;
    } else if (cur > st.prev_lsb && cur - st.prev_lsb > max_lsb / 2) {
        msb = st.prev_msb - max_lsb;
    } else {
        msb = st.prev_msb;
    }
    st.started = true;
    st.after_eos = false;
    // RADL, RASL and sub-layer non-reference pictures do not anchor the wrap.
    const bool sub_layer_non_ref = nal_type <= 14 && nal_type % 2 == 0;
    const bool leading = nal_type >= 6 && nal_type <= 9;
    if (temporal_id == 0 && !leading && !sub_layer_non_ref) {
        st.prev_lsb = cur;
        st.prev_msb = msb;
    }
    return msb + cur;
}

}  // namespace

std::vector<Picture> scan_pictures(std::span<const NalUnit> nals, std::span<const std::uint8_t> bytes,
                                   ParamSetStore& store) {
    std::vector<Picture> pictures;
    PocState poc;
    std::int64_t pending = 0;
    for (const auto& u : nals) {
        if (u.end() > bytes.size()) throw Error(ErrorKind::Parse, "NAL unit extends past stream end");
        const auto size = static_cast<std::int64_t>(u.size);
        if (!is_vcl(u.nal_unit_type)) {
            if (u.nuh_layer_id == 0 && u.nal_unit_type == kSps) {
                store.put(parse_sps(strip_emulation_prevention(payload_of(u, bytes))));
            } else if (u.nuh_layer_id == 0 && u.nal_unit_type == kPps) {
                store.put(parse_pps(strip_emulation_prevention(payload_of(u, bytes))));
            } else if (u.nal_unit_type == kEos || u.nal_unit_type == kEob) {
                poc.after_eos = true;
            }
            pending += size;
            continue;
        }
        if (is_reserved_vcl(u.nal_unit_type))
            throw Error(ErrorKind::Parse, "reserved NAL unit type " + std::to_string(u.nal_unit_type) +
                                              " in slice position at offset " + std::to_string(u.offset));
        if (!store.has_pps()) throw Error(ErrorKind::Parse, "slice before any PPS");

        const auto payload = payload_of(u, bytes);
        if (payload.empty()) throw Error(ErrorKind::Parse, "empty slice segment");
        const bool first = (payload[0] & 0x80) != 0;
        if (!first) {
            if (pictures.empty()) throw Error(ErrorKind::Parse, "slice segment continues no picture");
            pictures.back().meta.compressed_size += pending + size;
            pending = 0;
            continue;
        }
        Picture pic;
        pic.nal_unit_type = u.nal_unit_type;
        pic.meta.index = static_cast<std::int64_t>(pictures.size());
        std::optional<SliceHeaderStart> sh;
        if (is_irap(u.nal_unit_type)) {
            pic.meta.frame_type = FrameType::I;
            try {
                sh = parse_slice_header_start(strip_emulation_prevention(payload), u.nal_unit_type, store);
            } catch (const Error&) {
                pic.poc_known = false;
            }
        } else {
            sh = parse_slice_header_start(strip_emulation_prevention(payload), u.nal_unit_type, store);
            pic.meta.frame_type = frame_type_of(sh->slice_type);
        }
        if (sh) {
            const SpsInfo* sps = store.sps(store.pps(sh->pps_id)->sps_id);
            pic.poc = next_poc(poc, u.nal_unit_type, u.temporal_id_plus1 - 1, sh->pic_order_cnt_lsb,
                               sps->log2_max_poc_lsb);
        }
        pic.cvs = poc.cvs;
        pic.meta.compressed_size = pending + size;
        pending = 0;
        pictures.push_back(pic);
    }
    if (!pictures.empty()) pictures.back().meta.compressed_size += pending;
    return pictures;
}

std::vector<FrameMeta> classify_pictures(std::span<const NalUnit> nals, std::span<const std::uint8_t> bytes,
                                         ParamSetStore& store) {
    std::vector<FrameMeta> out;
    for (const auto& p : scan_pictures(nals, bytes, store)) out.push_back(p.meta);
    return out;
}

std::vector<FrameMeta> display_order(std::span<const Picture> pictures) {
    std::vector<std::size_t> rank(pictures.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    for (const auto& p : pictures)
        if (!p.poc_known)
            throw Error(ErrorKind::Parse, "no picture order count for picture " + std::to_string(p.meta.index));
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
        return std::pair(pictures[a].cvs, pictures[a].poc) < std::pair(pictures[b].cvs, pictures[b].poc);
    });
    std::vector<FrameMeta> out;
    out.reserve(pictures.size());
    for (std::size_t i = 0; i < rank.size(); ++i) {
        out.push_back(pictures[rank[i]].meta);
        out.back().index = static_cast<std::int64_t>(i);
    }
    return out;
}

std::vector<FrameMeta> parse_stream(std::span<const std::uint8_t> bytes, Order order) {
    const auto nals = scan_nal_units(bytes);
    ParamSetStore store;
    const auto pictures = scan_pictures(nals, bytes, store);
    if (order == Order::Display) return display_order(pictures);
    std::vector<FrameMeta> out;
    for (const auto& p : pictures) out.push_back(p.meta);
    return out;
}

}  // namespace bdf::hevc
