#include "bdf/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "bdf/error.hpp"

namespace bdf {

void RawLayoutConfig::validate() const {
    if (width <= 0 || height <= 0) throw Error(ErrorKind::Config, "raw layout needs positive width and height");
    if (bit_depth < kMinBitDepth || bit_depth > kMaxBitDepth)
        throw Error(ErrorKind::Config, "raw layout bit depth outside [6,16]");
    if (bit_depth > 8 && packing != SamplePacking::TwoByteLE)
        throw Error(ErrorKind::Config, "bit depth above 8 requires two-byte packing");
}

std::vector<std::pair<int, int>> plane_dimensions(int width, int height, ChromaSubsampling chroma) {
    std::vector<std::pair<int, int>> dims{{width, height}};
    switch (chroma) {
        case ChromaSubsampling::Mono: break;
        case ChromaSubsampling::S420: dims.insert(dims.end(), 2, {(width + 1) / 2, (height + 1) / 2}); break;
        case ChromaSubsampling::S422: dims.insert(dims.end(), 2, {(width + 1) / 2, height}); break;
        case ChromaSubsampling::S444: dims.insert(dims.end(), 2, {width, height}); break;
    }
    return dims;
}

std::size_t RawLayoutConfig::frame_bytes() const {
    std::size_t samples = 0;
    for (auto [w, h] : plane_dimensions(width, height, chroma)) samples += static_cast<std::size_t>(w) * h;
    return samples * (packing == SamplePacking::TwoByteLE ? 2 : 1);
}

ChromaSubsampling infer_subsampling(const Frame& frame) {
    if (frame.plane_count() == 1) return ChromaSubsampling::Mono;
    const int w = frame.width(), h = frame.height();
    const auto& c = frame.plane(1);
    if (c.width() == w && c.height() == h) return ChromaSubsampling::S444;
    if (c.width() == (w + 1) / 2 && c.height() == h) return ChromaSubsampling::S422;
    if (c.width() == (w + 1) / 2 && c.height() == (h + 1) / 2) return ChromaSubsampling::S420;
    throw Error(ErrorKind::Shape, "chroma geometry matches no supported subsampling");
}

namespace {

Plane read_plane(std::istream& in, int w, int h, int depth, bool two_byte) {
    const std::size_t count = static_cast<std::size_t>(w) * h;
    std::vector<std::uint16_t> samples(count);
    if (two_byte) {
        std::vector<unsigned char> buf(count * 2);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size())
            throw Error(ErrorKind::TruncatedInput, "frame payload ends early");
        for (std::size_t i = 0; i < count; ++i)
            samples[i] = static_cast<std::uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
    } else {
        std::vector<unsigned char> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size())
            throw Error(ErrorKind::TruncatedInput, "frame payload ends early");
        std::copy(buf.begin(), buf.end(), samples.begin());
    }
    // Plane's constructor reports the first out-of-range sample as RangeError.
    return Plane(w, h, depth, std::move(samples));
}

void write_plane(std::ostream& out, const Plane& p, bool two_byte) {
    auto s = p.samples();
    if (two_byte) {
        std::vector<unsigned char> buf(s.size() * 2);
        for (std::size_t i = 0; i < s.size(); ++i) {
            buf[2 * i] = static_cast<unsigned char>(s[i] & 0xff);
            buf[2 * i + 1] = static_cast<unsigned char>(s[i] >> 8);
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    } else {
        std::vector<unsigned char> buf(s.begin(), s.end());
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
}

int parse_int(std::string_view s, std::string_view what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error(ErrorKind::Parse, std::string("bad ") + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

// Parses the colorspace tag (without the leading 'C').
void parse_colorspace(std::string_view tag, ChromaSubsampling& chroma, int& depth) {
    std::string_view rest;
    if (tag.starts_with("mono")) {
        chroma = ChromaSubsampling::Mono;
        rest = tag.substr(4);
    } else if (tag.starts_with("420")) {
        chroma = ChromaSubsampling::S420;
        rest = tag.substr(3);
    } else if (tag.starts_with("422")) {
        chroma = ChromaSubsampling::S422;
        rest = tag.substr(3);
    } else if (tag.starts_with("444")) {
        chroma = ChromaSubsampling::S444;
        rest = tag.substr(3);
    } else {
        throw Error(ErrorKind::Parse, "unsupported colorspace C" + std::string(tag));
    }
    depth = 8;
    if (rest.empty() || rest == "jpeg" || rest == "paldv" || rest == "mpeg2") return;
    if (rest.starts_with("p")) rest.remove_prefix(1);
    depth = parse_int(rest, "colorspace depth");
    if (depth < 8 || depth > 16) throw Error(ErrorKind::Parse, "unsupported colorspace depth");
}

bool read_line(std::istream& in, std::string& line, std::size_t limit) {
    line.clear();
    char c;
    while (in.get(c)) {
        if (c == '\n') return true;
        line.push_back(c);
        if (line.size() > limit) throw Error(ErrorKind::Parse, "header line too long");
    }
    return !line.empty();
}

}  // namespace

VideoSequence read_y4m(std::istream& in) {
    std::string header;
    if (!read_line(in, header, 4096)) throw Error(ErrorKind::Parse, "empty Y4M stream");
    std::istringstream tokens(header);
    std::string tok;
    tokens >> tok;
    if (tok != "YUV4MPEG2") throw Error(ErrorKind::Parse, "missing YUV4MPEG2 signature");

    int width = 0, height = 0, depth = 8;
    int forced_depth = 0;
    auto chroma = ChromaSubsampling::S420;
    while (tokens >> tok) {
        const char key = tok[0];
        std::string_view val = std::string_view(tok).substr(1);
        switch (key) {
            case 'W': width = parse_int(val, "width"); break;
            case 'H': height = parse_int(val, "height"); break;
            case 'C': parse_colorspace(val, chroma, depth); break;
            case 'X':
                if (val.starts_with("DEPTH=")) forced_depth = parse_int(val.substr(6), "X depth");
                break;
            case 'F':
            case 'I':
            case 'A': break;
            default: throw Error(ErrorKind::Parse, "unknown Y4M header field '" + tok + "'");
        }
    }
    if (width <= 0 || height <= 0) throw Error(ErrorKind::Parse, "Y4M header lacks valid W/H");
    const bool two_byte = depth > 8;
    if (forced_depth != 0) {
        // The container word may carry fewer significant bits than it can hold.
        if (forced_depth > depth || forced_depth < kMinBitDepth)
            throw Error(ErrorKind::Parse, "X DEPTH exceeds container depth");
        depth = forced_depth;
    }
    const auto dims = plane_dimensions(width, height, chroma);

    std::vector<Frame> frames;
    std::string line;
    while (true) {
        if (in.peek() == std::char_traits<char>::eof()) break;
        if (!read_line(in, line, 1024)) break;
        if (!line.starts_with("FRAME")) throw Error(ErrorKind::Parse, "expected FRAME marker");
        std::vector<Plane> planes;
        planes.reserve(dims.size());
        for (auto [w, h] : dims) planes.push_back(read_plane(in, w, h, depth, two_byte));
        frames.emplace_back(std::move(planes));
    }
    return VideoSequence(std::move(frames));
}

VideoSequence read_y4m_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Parse, "cannot open " + path);
    return read_y4m(in);
}

void write_y4m(const VideoSequence& video, std::ostream& out, std::string_view comment) {
    if (video.empty()) throw Error(ErrorKind::EmptyInput, "cannot write an empty video");
    const Frame& first = video.frame(0);
    const int depth = first.bit_depth();
    const int container = depth > 8 ? depth : 8;
    std::string cs;
    switch (infer_subsampling(first)) {
        case ChromaSubsampling::Mono: cs = "mono"; break;
        case ChromaSubsampling::S420: cs = "420"; break;
        case ChromaSubsampling::S422: cs = "422"; break;
        case ChromaSubsampling::S444: cs = "444"; break;
    }
    if (container > 8) cs += (cs == "mono" ? "" : "p") + std::to_string(container);
    out << "YUV4MPEG2 W" << first.width() << " H" << first.height() << " F25:1 Ip A1:1 C" << cs;
    if (depth < 8) out << " XDEPTH=" << depth;
    if (!comment.empty()) {
        std::string c(comment);
        std::replace(c.begin(), c.end(), ' ', '_');
        std::replace(c.begin(), c.end(), '\n', '_');
        out << " X" << c;
    }
    out << '\n';
    for (const auto& f : video.frames()) {
        out << "FRAME\n";
        for (const auto& p : f.planes()) write_plane(out, p, container > 8);
    }
}

void write_y4m_file(const VideoSequence& video, const std::string& path, std::string_view comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Parse, "cannot create " + path);
    write_y4m(video, out, comment);
}

VideoSequence read_raw_planar(const RawLayoutConfig& config, std::istream& in) {
    config.validate();
    const auto dims = plane_dimensions(config.width, config.height, config.chroma);
    const bool two_byte = config.packing == SamplePacking::TwoByteLE;
    std::vector<Frame> frames;
    while (in.peek() != std::char_traits<char>::eof()) {
        std::vector<Plane> planes;
        for (auto [w, h] : dims) planes.push_back(read_plane(in, w, h, config.bit_depth, two_byte));
        frames.emplace_back(std::move(planes));
    }
    return VideoSequence(std::move(frames));
}

std::vector<FrameMeta> read_frame_metadata(std::string_view text) {
    std::vector<FrameMeta> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        if (line.empty() || line.front() == '#') continue;

        std::vector<std::string_view> fields;
        std::size_t pos = 0;
        while (true) {
            auto comma = line.find(',', pos);
            auto f = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
            while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
            while (!f.empty() && f.back() == ' ') f.remove_suffix(1);
            fields.push_back(f);
            if (comma == std::string_view::npos) break;
            pos = comma + 1;
        }
        const auto where = " on line " + std::to_string(line_no);
        if (fields.size() != 3) throw Error(ErrorKind::Parse, "expected 3 fields" + where);
        if (out.empty() && fields[0] == "index") continue;

        FrameMeta m;
        std::int64_t v = 0;
        auto [p0, e0] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), v);
        if (e0 != std::errc() || p0 != fields[0].data() + fields[0].size() || v < 0)
            throw Error(ErrorKind::Parse, "bad index" + where);
        m.index = v;
        if (fields[1].size() != 1 || !frame_type_from_char(fields[1][0]))
            throw Error(ErrorKind::Parse, "unknown frame type '" + std::string(fields[1]) + "'" + where);
        m.frame_type = *frame_type_from_char(fields[1][0]);
        auto [p2, e2] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), v);
        if (e2 != std::errc() || p2 != fields[2].data() + fields[2].size() || v < 0)
            throw Error(ErrorKind::Parse, "bad size" + where);
        m.compressed_size = v;
        out.push_back(m);
    }
    std::stable_sort(out.begin(), out.end(), [](const FrameMeta& a, const FrameMeta& b) { return a.index < b.index; });
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i].index == out[i - 1].index)
            throw Error(ErrorKind::Parse, "duplicate frame index " + std::to_string(out[i].index));
    }
    return out;
}

std::vector<FrameMeta> read_frame_metadata_file(const std::string& path) {
    return read_frame_metadata(read_text_file(path));
}

std::string format_frame_metadata(std::span<const FrameMeta> meta, std::string_view comment) {
    std::ostringstream os;
    if (!comment.empty()) os << "# " << comment << '\n';
    os << "index,type,size\n";
    for (const auto& m : meta) os << m.index << ',' << to_char(m.frame_type) << ',' << m.compressed_size << '\n';
    return os.str();
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Parse, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Parse, "cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Parse, "cannot create " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void write_binary_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Parse, "cannot create " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace bdf
