#include "bdf/video_detector.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "bdf/error.hpp"
#include "bdf/stat_tests.hpp"

namespace bdf::detect {

namespace {

constexpr const char* kSeriesNames[3] = {"lsb_mean", "lsb_std", "prob"};
constexpr std::array<std::pair<int, int>, 3> kTypePairs = {{{0, 1}, {0, 2}, {1, 2}}};

int type_slot(FrameType t) { return static_cast<int>(t); }

double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Degenerate or undersized samples become 0.
double sw_statistic(std::span<const double> v) {
    if (v.size() < 3) return 0.0;
    try {
        const double w = shapiro_wilk(v).statistic;
        return std::isfinite(w) ? w : 0.0;
    } catch (const Error&) {
        return 0.0;
    }
}

double t_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) return 0.0;
    try {
        const double t = t_test(a, b).statistic;
        return std::isfinite(t) ? t : 0.0;
    } catch (const Error&) {
        return 0.0;
    }
}

}  // namespace

std::vector<ChannelBasic> per_frame_basic(const Frame& frame) {
    std::vector<ChannelBasic> out;
    out.reserve(frame.plane_count());
    for (const auto& p : frame.planes()) {
        std::array<std::int64_t, 4> hist{};
        for (auto v : p.samples()) ++hist[v & 3u];
        const auto n = static_cast<double>(p.samples().size());
        const double sum = static_cast<double>(hist[1] + 2 * hist[2] + 3 * hist[3]);
        const double sum_sq = static_cast<double>(hist[1] + 4 * hist[2] + 9 * hist[3]);
        const double mean = sum / n;
        const double var = std::max(0.0, sum_sq / n - mean * mean);
        out.push_back({mean, std::sqrt(var)});
    }
    return out;
}

std::size_t video_vector_width(std::size_t planes) { return 3 + planes * 3 * kPerTypeBlock + planes * 3 * kPerPairBlock; }

std::vector<std::string> video_feature_names(std::size_t planes) {
    std::vector<std::string> names;
    for (auto t : kFrameTypes) names.push_back(std::string("avg_size_") + to_char(t));
    for (std::size_t c = 0; c < planes; ++c) {
        const auto ch = channel_name(c, planes);
        for (auto t : kFrameTypes) {
            const std::string pre = ch + "." + to_char(t) + ".";
            for (auto s : kSeriesNames) names.push_back(pre + "mean_" + s);
            for (auto s : kSeriesNames) names.push_back(pre + "sw_" + s);
            names.push_back(pre + "present");
        }
    }
    for (std::size_t c = 0; c < planes; ++c) {
        const auto ch = channel_name(c, planes);
        for (auto [a, b] : kTypePairs) {
            const std::string pre = ch + "." + to_char(kFrameTypes[a]) + to_char(kFrameTypes[b]) + ".t_";
            for (auto s : kSeriesNames) names.push_back(pre + s);
        }
    }
    return names;
}

std::vector<FrameData> extract_frame_data(const VideoSequence& video, std::span<const FrameMeta> meta,
                                          const DetectorConfig& config) {
    if (video.empty()) throw Error(ErrorKind::EmptyInput, "video has no frames");
    if (meta.size() != video.size())
        throw Error(ErrorKind::Shape, "metadata has " + std::to_string(meta.size()) + " records for " +
                                          std::to_string(video.size()) + " frames");
    std::vector<const FrameMeta*> by_index(video.size(), nullptr);
    for (const auto& m : meta) {
        if (m.index < 0 || static_cast<std::size_t>(m.index) >= video.size())
            throw Error(ErrorKind::Shape, "metadata index " + std::to_string(m.index) + " out of range");
        if (by_index[m.index]) throw Error(ErrorKind::Shape, "duplicate metadata index " + std::to_string(m.index));
        by_index[m.index] = &m;
    }

    std::vector<FrameData> out(video.size());
    parallel_for(video.size(), config.threads, [&](std::size_t i) {
        const Frame& f = video.frame(i);
        FrameData& d = out[i];
        d.meta = *by_index[i];
        d.basic = per_frame_basic(f);
        try {
            d.lsb_features = frame_feature_vector(f, config.features);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptyCloud && e.kind() != ErrorKind::DegenerateCloud) throw;
        }
    });
    return out;
}

std::vector<double> assemble_from_frame_data(std::span<const FrameData> frames, std::size_t planes,
                                             std::int64_t luma_pixels, const ml::Model* ensemble,
                                             const DetectorConfig& config) {
    if (frames.empty()) throw Error(ErrorKind::EmptyInput, "video has no frames");

    // Frame-level probabilities, shared by every channel.
    std::vector<std::optional<double>> prob(frames.size());
    if (ensemble) {
        bool any = false;
        for (std::size_t i = 0; i < frames.size(); ++i) {
            if (!frames[i].lsb_features) continue;
            prob[i] = ensemble->predict_proba(*frames[i].lsb_features);
            any = true;
        }
        if (!any) throw Error(ErrorKind::Feature, "no frame of the video is analyzable");
    }

    std::vector<double> v;
    v.reserve(video_vector_width(planes));

    for (auto t : kFrameTypes) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& f : frames) {
            if (f.meta.frame_type != t) continue;
            sum += static_cast<double>(f.meta.compressed_size);
            ++n;
        }
        double avg = n ? sum / static_cast<double>(n) : 0.0;
        if (config.size_per_pixel && luma_pixels > 0) avg /= static_cast<double>(luma_pixels);
        v.push_back(avg);
    }

    // series[c][type][k]: per-frame samples.
    std::vector<std::array<std::array<std::vector<double>, 3>, 3>> series(planes);
    std::array<std::size_t, 3> type_count{};
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        if (f.basic.size() != planes) throw Error(ErrorKind::Shape, "frame plane count mismatch");
        const int ts = type_slot(f.meta.frame_type);
        ++type_count[ts];
        for (std::size_t c = 0; c < planes; ++c) {
            series[c][ts][0].push_back(f.basic[c].lsb_mean);
            series[c][ts][1].push_back(f.basic[c].lsb_std);
            if (prob[i]) series[c][ts][2].push_back(*prob[i]);
        }
    }

    // Sorted so that reordering frames within a type is exactly a no-op.
    for (auto& ch : series)
        for (auto& per_type : ch)
            for (auto& s : per_type) std::sort(s.begin(), s.end());

    for (std::size_t c = 0; c < planes; ++c) {
        for (int ts = 0; ts < 3; ++ts) {
            const auto& s = series[c][ts];
            for (int k = 0; k < 3; ++k) v.push_back(mean_of(s[k]));
            for (int k = 0; k < 3; ++k) v.push_back(sw_statistic(s[k]));
            v.push_back(type_count[ts] > 0 ? 1.0 : 0.0);
        }
    }
    for (std::size_t c = 0; c < planes; ++c) {
        for (auto [a, b] : kTypePairs) {
            for (int k = 0; k < 3; ++k) v.push_back(t_statistic(series[c][a][k], series[c][b][k]));
        }
    }
    return v;
}

std::vector<double> assemble_features(const VideoSequence& video, std::span<const FrameMeta> meta,
                                      const ml::Model* ensemble, const DetectorConfig& config) {
    if (video.empty()) throw Error(ErrorKind::EmptyInput, "video has no frames");
    const std::size_t planes = video.frame(0).plane_count();
    if (ensemble && ensemble->width() != planes * kFeaturesPerChannel)
        throw Error(ErrorKind::Shape, "frame ensemble width does not match the video's plane count");
    const auto frames = extract_frame_data(video, meta, config);
    const std::int64_t luma = static_cast<std::int64_t>(video.frame(0).width()) * video.frame(0).height();
    return assemble_from_frame_data(frames, planes, luma, ensemble, config);
}

Verdict detect(const VideoSequence& video, std::span<const FrameMeta> meta, const Bundle& bundle, double threshold) {
    const ml::Model* ens = bundle.ensemble ? &*bundle.ensemble : nullptr;
    const auto v = assemble_features(video, meta, ens, bundle.detector);
    Verdict out;
    out.probability_upconverted = bundle.forest.predict_proba(v);
    out.threshold = threshold;
    out.decision = out.probability_upconverted >= threshold;
    const auto names = video_feature_names(video.frame(0).plane_count());
    for (std::size_t i = 0; i < v.size(); ++i) out.diagnostics.emplace_back(names[i], v[i]);
    return out;
}

namespace {

constexpr std::uint8_t kBundleMagic[4] = {'B', 'D', 'F', 'B'};
constexpr std::uint32_t kBundleVersion = 1;

[[noreturn]] void bundle_fail(const char* what) { throw Error(ErrorKind::Format, what); }

}  // namespace

std::vector<std::uint8_t> save_bundle(const Bundle& b) {
    ByteWriter out;
    out.raw(kBundleMagic);
    out.u32(kBundleVersion);
    out.str(b.run_config);
    out.i32(b.detector.features.radius);
    out.i32(b.detector.features.bins);
    out.u8(b.detector.size_per_pixel ? 1 : 0);
    out.u8(b.ensemble ? 1 : 0);
    if (b.ensemble) ml::write_model_payload(*b.ensemble, out);
    ml::write_model_payload(b.forest, out);
    out.u64(fnv1a64(out.bytes()));
    return std::move(out.bytes());
}

Bundle load_bundle(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 + 4 + 8) bundle_fail("bundle truncated");
    if (!std::equal(std::begin(kBundleMagic), std::end(kBundleMagic), bytes.begin())) bundle_fail("not a model bundle");
    const auto body = bytes.first(bytes.size() - 8);
    ByteReader tail(bytes.last(8), bundle_fail);
    if (tail.u64() != fnv1a64(body)) bundle_fail("bundle checksum mismatch");
    ByteReader in(body, bundle_fail);
    in.raw(4);
    if (in.u32() != kBundleVersion) bundle_fail("unsupported bundle version");
    Bundle b;
    b.run_config = in.str();
    b.detector.features.radius = in.i32();
    b.detector.features.bins = in.i32();
    if (b.detector.features.radius < 1 || b.detector.features.bins < 1) bundle_fail("bad feature config in bundle");
    b.detector.size_per_pixel = in.u8() != 0;
    if (in.u8() != 0) b.ensemble = ml::read_model_payload(in);
    b.forest = ml::read_model_payload(in);
    if (in.remaining() != 0) bundle_fail("trailing bytes after bundle");
    if (b.ensemble && b.ensemble->width() % kFeaturesPerChannel != 0) bundle_fail("bad ensemble width");
    return b;
}

}  // namespace bdf::detect
