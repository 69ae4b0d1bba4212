#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bdf/frame.hpp"
#include "bdf/lsb_features.hpp"
#include "bdf/ml.hpp"

namespace bdf::detect {

struct ChannelBasic {
    double lsb_mean = 0.0;
    double lsb_std = 0.0;
};

/// Mean and population std of the 2-bit LSB values, per channel.
std::vector<ChannelBasic> per_frame_basic(const Frame& frame);

struct DetectorConfig {
    FeatureConfig features;
    bool size_per_pixel = false;  // divide average sizes by the luma pixel count
    int threads = 1;
};

/// Everything the video vector needs from one frame, independent of any model.
struct FrameData {
    FrameMeta meta;
    std::vector<ChannelBasic> basic;
    std::optional<std::vector<double>> lsb_features;  // empty when un-analyzable
};

inline constexpr int kPerTypeBlock = 7;
inline constexpr int kPerPairBlock = 3;

std::size_t video_vector_width(std::size_t planes);
std::vector<std::string> video_feature_names(std::size_t planes);

/// Per-frame extraction in index order. `meta` may arrive in any order; it is
/// aligned by index and must cover 0..frames-1 exactly once.
std::vector<FrameData> extract_frame_data(const VideoSequence& video, std::span<const FrameMeta> meta,
                                          const DetectorConfig& config);

/// Builds the video vector. A null `ensemble` leaves every probability slot at 0.
std::vector<double> assemble_from_frame_data(std::span<const FrameData> frames, std::size_t planes,
                                             std::int64_t luma_pixels, const ml::Model* ensemble,
                                             const DetectorConfig& config);

std::vector<double> assemble_features(const VideoSequence& video, std::span<const FrameMeta> meta,
                                      const ml::Model* ensemble, const DetectorConfig& config);

struct Verdict {
    double probability_upconverted = 0.0;
    double threshold = 0.5;
    bool decision = false;
    std::vector<std::pair<std::string, double>> diagnostics;
};

struct Bundle {
    DetectorConfig detector;
    std::string run_config;  // echo of the configuration that produced the bundle
    std::optional<ml::Model> ensemble;
    ml::Model forest;
};

std::vector<std::uint8_t> save_bundle(const Bundle& bundle);
Bundle load_bundle(std::span<const std::uint8_t> bytes);

Verdict detect(const VideoSequence& video, std::span<const FrameMeta> meta, const Bundle& bundle, double threshold);

}  // namespace bdf::detect
