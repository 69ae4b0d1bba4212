#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bdf/evalkit.hpp"
#include "bdf/lsb_features.hpp"
#include "bdf/ml.hpp"
#include "bdf/upconvert_sim.hpp"
#include "bdf/video_detector.hpp"

namespace bdf {

inline constexpr const char* kVersion = "1.0.0";

/// Everything that shapes a run. Echoed into every artifact.
struct RunConfig {
    FeatureConfig features;
    ml::TrainConfig classifiers;
    double threshold = 0.5;
    std::uint64_t seed = 20240229;
    int threads = 0;  // 0: all available cores
    bool size_per_pixel = false;
    int stage1_stride = 1;  // use every k-th frame of each clip to train the frame ensemble

    void validate() const;
    detect::DetectorConfig detector() const;
    ml::TrainConfig train_config() const;  // classifiers with seed and threads applied
};

/// Compact JSON with the code version folded in.
std::string to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& text);

/// One compressed clip reduced to the per-frame data the video vector needs.
struct ClipFrames {
    std::string name;
    int label = 0;
    std::string group;
    std::string method;
    std::size_t planes = 0;
    std::int64_t luma_pixels = 0;
    std::vector<detect::FrameData> frames;
};

ClipFrames clip_frames(const sim::Clip& clip, const RunConfig& config);

/// Stage-1 rows: frame feature vectors of uncompressed clips, labeled per clip.
/// Un-analyzable frames are skipped.
void add_frame_rows(ml::Dataset& rows, const sim::Clip& clip, const RunConfig& config);

ml::Model train_frame_ensemble(const ml::Dataset& rows, const RunConfig& config);

ml::Dataset video_dataset(std::span<const ClipFrames> clips, const ml::Model* ensemble, const RunConfig& config);

/// Stage 2 over a frozen ensemble (null: the ablation without frame probabilities).
detect::Bundle train_bundle(const ml::Dataset& frame_rows, std::span<const ClipFrames> clips, const RunConfig& config,
                            bool use_frame_ensemble);

/// Grouped leave-one-source-out over clips; both stages are refit per fold
/// without the held-out group.
eval::CvReport two_stage_cv(const ml::Dataset& frame_rows, std::span<const ClipFrames> clips, const RunConfig& config,
                            bool use_frame_ensemble);

}  // namespace bdf
