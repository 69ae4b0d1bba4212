#include "bdf/pipeline.hpp"

#include <algorithm>
#include <optional>

#include "bdf/error.hpp"
#include "json.hpp"

namespace bdf {

void RunConfig::validate() const {
    if (features.radius < 1) throw Error(ErrorKind::Config, "window radius must be >= 1");
    if (features.bins < 1) throw Error(ErrorKind::Config, "bin count must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorKind::Config, "threshold must be in [0, 1]");
    if (threads < 0) throw Error(ErrorKind::Config, "threads must be >= 0");
    if (stage1_stride < 1) throw Error(ErrorKind::Config, "stage1_stride must be >= 1");
    const auto& c = classifiers;
    if (!(c.svm.c > 0.0) || c.svm.gamma < 0.0 || !(c.svm.tolerance > 0.0) || c.svm.platt_folds < 2)
        throw Error(ErrorKind::Config, "invalid SVM config");
    if (c.gbm.rounds < 1 || c.gbm.max_depth < 1 || !(c.gbm.learning_rate > 0.0) || c.gbm.min_samples_leaf < 1)
        throw Error(ErrorKind::Config, "invalid GBM config");
    if (c.forest.trees < 1 || c.forest.max_depth < 1 || c.forest.min_samples_split < 2 || c.forest.max_features < 0)
        throw Error(ErrorKind::Config, "invalid random forest config");
}

detect::DetectorConfig RunConfig::detector() const {
    detect::DetectorConfig d;
    d.features = features;
    d.size_per_pixel = size_per_pixel;
    d.threads = threads;
    return d;
}

ml::TrainConfig RunConfig::train_config() const {
    ml::TrainConfig t = classifiers;
    t.seed = seed;
    t.threads = threads;
    return t;
}

std::string to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["version"] = kVersion;
    j["radius"] = c.features.radius;
    j["bins"] = c.features.bins;
    j["classifiers"] = nlohmann::ordered_json::parse(ml::to_json(c.classifiers));
    j["classifiers"].erase("seed");
    j["threshold"] = c.threshold;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["size_per_pixel"] = c.size_per_pixel;
    j["stage1_stride"] = c.stage1_stride;
    return j.dump();
}

RunConfig run_config_from_json(const std::string& text) {
    RunConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
        static const char* known[] = {"version", "radius",  "bins",           "classifiers", "threshold",
                                      "seed",    "threads", "size_per_pixel", "stage1_stride"};
        for (const auto& [k, v] : j.items()) {
            if (std::find(std::begin(known), std::end(known), k) == std::end(known))
                throw Error(ErrorKind::Config, "unknown config key '" + k + "'");
        }
        c.features.radius = j.value("radius", c.features.radius);
        c.features.bins = j.value("bins", c.features.bins);
        if (j.contains("classifiers")) c.classifiers = ml::train_config_from_json(j["classifiers"].dump());
        c.threshold = j.value("threshold", c.threshold);
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", c.threads);
        c.size_per_pixel = j.value("size_per_pixel", c.size_per_pixel);
        c.stage1_stride = j.value("stage1_stride", c.stage1_stride);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("bad config: ") + e.what());
    }
    c.validate();
    return c;
}

ClipFrames clip_frames(const sim::Clip& clip, const RunConfig& config) {
    ClipFrames out;
    out.name = clip.name;
    out.label = clip.label;
    out.group = clip.group;
    out.method = clip.method;
    if (clip.video.empty()) throw Error(ErrorKind::EmptyInput, "clip '" + clip.name + "' has no frames");
    if (clip.meta.empty()) throw Error(ErrorKind::Shape, "clip '" + clip.name + "' has no frame metadata");
    out.planes = clip.video.frame(0).plane_count();
    out.luma_pixels = static_cast<std::int64_t>(clip.video.frame(0).width()) * clip.video.frame(0).height();
    out.frames = detect::extract_frame_data(clip.video, clip.meta, config.detector());
    return out;
}

void add_frame_rows(ml::Dataset& rows, const sim::Clip& clip, const RunConfig& config) {
    const auto& frames = clip.video.frames();
    std::vector<std::optional<std::vector<double>>> feats(frames.size());
    parallel_for(frames.size(), config.threads, [&](std::size_t i) {
        if (i % static_cast<std::size_t>(config.stage1_stride) != 0) return;
        try {
            feats[i] = frame_feature_vector(frames[i], config.features);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptyCloud && e.kind() != ErrorKind::DegenerateCloud) throw;
        }
    });
    for (const auto& f : feats) {
        if (f) rows.add(*f, clip.label, clip.group);
    }
}

ml::Model train_frame_ensemble(const ml::Dataset& rows, const RunConfig& config) {
    return ml::train(ml::ModelKind::Ensemble, config.train_config(), rows);
}

ml::Dataset video_dataset(std::span<const ClipFrames> clips, const ml::Model* ensemble, const RunConfig& config) {
    if (clips.empty()) throw Error(ErrorKind::EmptyInput, "no clips");
    ml::Dataset data(detect::video_vector_width(clips.front().planes));
    std::vector<std::vector<double>> rows(clips.size());
    const auto det = config.detector();
    parallel_for(clips.size(), config.threads, [&](std::size_t i) {
        const auto& c = clips[i];
        rows[i] = detect::assemble_from_frame_data(c.frames, c.planes, c.luma_pixels, ensemble, det);
    });
    for (std::size_t i = 0; i < clips.size(); ++i) data.add(rows[i], clips[i].label, clips[i].group);
    return data;
}

detect::Bundle train_bundle(const ml::Dataset& frame_rows, std::span<const ClipFrames> clips, const RunConfig& config,
                            bool use_frame_ensemble) {
    config.validate();
    detect::Bundle b;
    b.detector = config.detector();
    b.run_config = to_json(config);
    if (use_frame_ensemble) b.ensemble = train_frame_ensemble(frame_rows, config);
    const auto videos = video_dataset(clips, b.ensemble ? &*b.ensemble : nullptr, config);
    b.forest = ml::train(ml::ModelKind::RandomForest, config.train_config(), videos);
    return b;
}

eval::CvReport two_stage_cv(const ml::Dataset& frame_rows, std::span<const ClipFrames> clips, const RunConfig& config,
                            bool use_frame_ensemble) {
    config.validate();
    std::vector<int> labels;
    std::vector<std::string> groups;
    for (const auto& c : clips) {
        labels.push_back(c.label);
        groups.push_back(c.group);
    }
    // Folds run one at a time; training inside each fold uses the thread budget.
    eval::FoldFn fold = [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
        const std::string& held_out = clips[test.front()].group;
        std::optional<ml::Model> ensemble;
        if (use_frame_ensemble) {
            std::vector<std::size_t> keep;
            for (std::size_t i = 0; i < frame_rows.rows(); ++i) {
                if (frame_rows.group(i) != held_out) keep.push_back(i);
            }
            ensemble = train_frame_ensemble(frame_rows.subset(keep), config);
        }
        const ml::Model* ens = ensemble ? &*ensemble : nullptr;
        std::vector<ClipFrames> train_clips;
        for (auto i : train) train_clips.push_back(clips[i]);
        const auto forest =
            ml::train(ml::ModelKind::RandomForest, config.train_config(), video_dataset(train_clips, ens, config));
        std::vector<int> out;
        const auto det = config.detector();
        for (auto i : test) {
            const auto v = detect::assemble_from_frame_data(clips[i].frames, clips[i].planes, clips[i].luma_pixels, ens, det);
            out.push_back(forest.predict_proba(v) >= config.threshold ? 1 : 0);
        }
        return out;
    };
    return eval::grouped_loo_cv(labels, groups, fold, eval::f1_score, 1);
}

}  // namespace bdf
