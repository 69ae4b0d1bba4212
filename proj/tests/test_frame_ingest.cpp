#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "bdf/ingest.hpp"
#include "test_support.hpp"

using namespace bdf;
using bdf::testing::random_frame;

TEST(Plane, RejectsSampleAtOrAboveDepthLimit) {
    EXPECT_BDF_ERROR(Plane(2, 1, 8, {0, 256}), ErrorKind::Range);
    EXPECT_BDF_ERROR(Plane(2, 1, 10, {1023, 1024}), ErrorKind::Range);
    EXPECT_NO_THROW(Plane(2, 1, 10, {0, 1023}));
}

TEST(Plane, RejectsBadGeometryAndDepth) {
    EXPECT_BDF_ERROR(Plane(2, 2, 8, {1, 2, 3}), ErrorKind::Shape);
    EXPECT_BDF_ERROR(Plane(1, 1, 5, {0}), ErrorKind::Range);
    EXPECT_BDF_ERROR(Plane(1, 1, 17, {0}), ErrorKind::Range);
}

TEST(Frame, PlaneCountAndSharedDepth) {
    const Plane a = Plane::filled(4, 4, 8, 1);
    EXPECT_BDF_ERROR(Frame({a, a}), ErrorKind::Shape);
    EXPECT_BDF_ERROR(Frame({a, Plane::filled(2, 2, 10, 1), Plane::filled(2, 2, 10, 1)}), ErrorKind::Shape);
    EXPECT_EQ(Frame({a}).plane_count(), 1u);
}

TEST(VideoSequence, RejectsMismatchedGeometry) {
    const Frame f1({Plane::filled(4, 4, 8, 1)});
    const Frame f2({Plane::filled(4, 2, 8, 1)});
    EXPECT_BDF_ERROR(VideoSequence({f1, f2}), ErrorKind::Shape);
    EXPECT_BDF_ERROR(VideoSequence({f1}, {FrameMeta{}, FrameMeta{}}), ErrorKind::Shape);
    EXPECT_BDF_ERROR(VideoSequence({f1}, {FrameMeta{0, FrameType::I, -1}}), ErrorKind::Range);
}

namespace {

std::string y4m_420_8bit(int frames_declared, int frames_with_payload) {
    std::string s = "YUV4MPEG2 W4 H2 F25:1 C420\n";
    for (int f = 0; f < frames_declared; ++f) {
        s += "FRAME\n";
        if (f < frames_with_payload) s += std::string(4 * 2 + 2 * (2 * 1), static_cast<char>(17 + f));
    }
    return s;
}

}  // namespace

TEST(ReadY4m, Basic420) {
    std::istringstream in(y4m_420_8bit(1, 1));
    const auto v = read_y4m(in);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v.frame(0).plane_count(), 3u);
    EXPECT_EQ(v.frame(0).bit_depth(), 8);
    EXPECT_EQ(v.frame(0).plane(1).width(), 2);
    EXPECT_EQ(v.frame(0).plane(1).height(), 1);
    EXPECT_EQ(v.frame(0).plane(0).at(3, 1), 17);
}

TEST(ReadY4m, TenBitTwoByteSamples) {
    std::string s = "YUV4MPEG2 W2 H2 C420p10\nFRAME\n";
    for (std::uint16_t v : {0, 1, 512, 1023, 300, 301}) {
        s.push_back(static_cast<char>(v & 0xff));
        s.push_back(static_cast<char>(v >> 8));
    }
    std::istringstream in(s);
    const auto v = read_y4m(in);
    EXPECT_EQ(v.frame(0).bit_depth(), 10);
    EXPECT_EQ(v.frame(0).plane(0).at(1, 1), 1023);
    EXPECT_EQ(v.frame(0).plane(2).at(0, 0), 301);

    s[s.size() - 1] = 0x04;  // 301 + 1024 is out of range
    std::istringstream bad(s);
    EXPECT_BDF_ERROR(read_y4m(bad), ErrorKind::Range);
}

TEST(ReadY4m, TruncatedAndMalformed) {
    std::istringstream truncated(y4m_420_8bit(3, 2));
    EXPECT_BDF_ERROR(read_y4m(truncated), ErrorKind::TruncatedInput);
    std::istringstream no_sig("YUV4MPEG W4 H2 C420\n");
    EXPECT_BDF_ERROR(read_y4m(no_sig), ErrorKind::Parse);
    std::istringstream bad_cs("YUV4MPEG2 W4 H2 C411\nFRAME\n");
    EXPECT_BDF_ERROR(read_y4m(bad_cs), ErrorKind::Parse);
    std::istringstream no_w("YUV4MPEG2 H2 C420\n");
    EXPECT_BDF_ERROR(read_y4m(no_w), ErrorKind::Parse);
}

TEST(ReadY4m, RoundTripIsBitExact) {
    Rng rng(11);
    for (int d : {8, 10, 12}) {
        std::vector<Frame> frames;
        for (int i = 0; i < 3; ++i) frames.push_back(random_frame(rng, 8, 6, d));
        const VideoSequence v(frames);
        std::ostringstream out;
        write_y4m(v, out, "round trip");
        std::istringstream in(out.str());
        EXPECT_EQ(read_y4m(in), v) << "d=" << d;
    }
    std::vector<Frame> mono{Frame({bdf::testing::random_plane(rng, 5, 3, 8)})};
    std::ostringstream out;
    write_y4m(VideoSequence(mono), out);
    std::istringstream in(out.str());
    EXPECT_EQ(read_y4m(in), VideoSequence(mono));
}

TEST(ReadY4m, SixBitContentSurvivesInEightBitContainer) {
    Rng rng(3);
    const VideoSequence v({random_frame(rng, 4, 4, 6)});
    std::ostringstream out;
    write_y4m(v, out);
    std::istringstream in(out.str());
    EXPECT_EQ(read_y4m(in).frame(0).bit_depth(), 6);
}

TEST(ReadRawPlanar, FrameCounting) {
    RawLayoutConfig c{4, 4, 8, ChromaSubsampling::S420, SamplePacking::OneByte};
    EXPECT_EQ(c.frame_bytes(), 24u);
    std::istringstream one(std::string(24, '\x05'));
    EXPECT_EQ(read_raw_planar(c, one).size(), 1u);
    std::istringstream two(std::string(48, '\x05'));
    EXPECT_EQ(read_raw_planar(c, two).size(), 2u);
    std::istringstream odd(std::string(30, '\x05'));
    EXPECT_BDF_ERROR(read_raw_planar(c, odd), ErrorKind::TruncatedInput);
}

TEST(ReadRawPlanar, ConfigAndRange) {
    RawLayoutConfig c{4, 4, 10, ChromaSubsampling::S420, SamplePacking::OneByte};
    EXPECT_BDF_ERROR(c.validate(), ErrorKind::Config);
    std::istringstream any(std::string(24, '\0'));
    EXPECT_BDF_ERROR(read_raw_planar(c, any), ErrorKind::Config);

    c.packing = SamplePacking::TwoByteLE;
    c.chroma = ChromaSubsampling::Mono;
    std::string s(32, '\0');
    s[5] = 0x04;  // sample 2: 0x0400 = 1024
    std::istringstream bad(s);
    EXPECT_BDF_ERROR(read_raw_planar(c, bad), ErrorKind::Range);
}

TEST(ReadRawPlanar, SubsamplingGeometry) {
    EXPECT_EQ(plane_dimensions(6, 4, ChromaSubsampling::S422)[1], std::make_pair(3, 4));
    EXPECT_EQ(plane_dimensions(5, 3, ChromaSubsampling::S420)[2], std::make_pair(3, 2));
    EXPECT_EQ(plane_dimensions(5, 3, ChromaSubsampling::Mono).size(), 1u);
}

TEST(FrameMetadata, ParsesRecords) {
    const auto m = read_frame_metadata("0,I,51234\n1,P,9011\n2,B,4403");
    ASSERT_EQ(m.size(), 3u);
    EXPECT_EQ(m[0], (FrameMeta{0, FrameType::I, 51234}));
    EXPECT_EQ(m[1], (FrameMeta{1, FrameType::P, 9011}));
    EXPECT_EQ(m[2], (FrameMeta{2, FrameType::B, 4403}));
}

TEST(FrameMetadata, Errors) {
    EXPECT_BDF_ERROR(read_frame_metadata("0,X,100"), ErrorKind::Parse);
    EXPECT_BDF_ERROR(read_frame_metadata("0,I,1\n0,P,2"), ErrorKind::Parse);
    EXPECT_BDF_ERROR(read_frame_metadata("0,I"), ErrorKind::Parse);
    EXPECT_BDF_ERROR(read_frame_metadata("0,I,-5"), ErrorKind::Parse);
}

TEST(FrameMetadata, SortsHeaderAndComments) {
    const auto m = read_frame_metadata("# produced elsewhere\nindex,type,size\n1,P,9\n0,I,50\n");
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m[0].index, 0);
    EXPECT_EQ(m[0].frame_type, FrameType::I);
    EXPECT_EQ(m[1].frame_type, FrameType::P);
}

TEST(FrameMetadata, OrderInsensitiveAndIdempotent) {
    Rng rng(5);
    std::vector<FrameMeta> meta;
    for (int i = 0; i < 40; ++i)
        meta.push_back({i, kFrameTypes[rng.below(3)], static_cast<std::int64_t>(rng.below(100000))});
    const auto text = format_frame_metadata(meta, "comment");
    const auto parsed = read_frame_metadata(text);
    EXPECT_EQ(parsed, meta);
    EXPECT_EQ(read_frame_metadata(format_frame_metadata(parsed)), parsed);

    std::vector<FrameMeta> shuffled = meta;
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.below(i + 1)]);
    EXPECT_EQ(read_frame_metadata(format_frame_metadata(shuffled)), meta);
}

TEST(Digest, DependsOnContentAndGeometry) {
    const Frame a({Plane::filled(4, 4, 8, 1)});
    const Frame b({Plane::filled(2, 8, 8, 1)});
    const Frame c({Plane::filled(4, 4, 8, 2)});
    EXPECT_NE(digest(a), digest(b));
    EXPECT_NE(digest(a), digest(c));
    EXPECT_EQ(digest(a), digest(Frame({Plane::filled(4, 4, 8, 1)})));
}
