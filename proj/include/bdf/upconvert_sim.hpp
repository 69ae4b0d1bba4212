#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdf/frame.hpp"

namespace bdf::sim {

enum class RefillKind : std::uint8_t { Zeros, UniformNoise, BitReplicate, Dither, GaussianSmooth };

struct RefillMethod {
    RefillKind kind = RefillKind::Zeros;
    std::uint64_t seed = 0;  // uniform_noise only
    double sigma = 1.0;      // gaussian_smooth only, in (0, 5]

    void validate() const;
    /// "zeros", "uniform_noise[:seed]", "bit_replicate", "dither", "gaussian_smooth[:sigma]".
    /// Short forms "noise", "replicate", "smooth" are accepted too.
    static RefillMethod parse(const std::string& text);
    std::string to_string() const;
};

/// Keeps the MSBs and replaces the two LSBs. The frame index feeds the noise seed.
Plane refill_plane(const Plane& plane, const RefillMethod& method, std::uint64_t stream);
Frame refill(const Frame& frame, const RefillMethod& method, std::uint64_t frame_index);
VideoSequence refill(const VideoSequence& video, const RefillMethod& method, int threads = 1);

struct CompressionProfile {
    int q_i = 0;
    int q_p = 0;
    int q_b = 0;
    std::string gop = "IBBP";
    std::uint64_t seed = 0;  // recorded for provenance; the surrogate itself is deterministic

    void validate() const;
    /// Sweep profile for strength q: (max(q-1, 0), q, q+1).
    static CompressionProfile from_strength(int q, std::string gop = "IBBP");
    /// "qI,qP,qB/GOP"
    static CompressionProfile parse(const std::string& text);
    std::string to_string() const;
    FrameType type_at(std::size_t frame_index) const;
    int strength(FrameType t) const;
};

/// 8x8 orthonormal DCT quantization with step 2^q per frame type. Sizes are the
/// count of nonzero quantized coefficients over all planes.
struct Compressed {
    VideoSequence video;
    std::vector<FrameMeta> meta;
};
Compressed simulate_compression(const VideoSequence& video, const CompressionProfile& profile, int threads = 1);

/// Quantizes one plane; returns the nonzero coefficient count. q == 0 leaves samples untouched.
std::int64_t quantize_plane(std::vector<std::uint16_t>& samples, int width, int height, int bit_depth, int q);

enum class SceneKind : std::uint8_t { Gradient, Vignette, Texture };

std::string to_string(SceneKind kind);
SceneKind scene_kind_from_string(const std::string& name);

struct SceneSpec {
    SceneKind kind = SceneKind::Gradient;
    int width = 64;
    int height = 64;
    int frames = 10;
    int bit_depth = 10;
    double grain = 0.8;   // sensor noise std in code values at full depth
    double detail = 0.0;  // amplitude of medium-frequency structure, code values
    double grain_correlation = 0.0;  // blur radius of the grain in pixels; 0 is white
    bool chroma = true;  // 4:2:0 with three planes, otherwise luma only
    std::uint64_t seed = 1;
    std::uint64_t variant = 0;  // per-shot jitter of a scene sharing `seed`
};

VideoSequence synth_scene(const SceneSpec& spec);

struct Clip {
    std::string name;
    VideoSequence video;
    std::vector<FrameMeta> meta;  // empty when uncompressed
    int label = 0;
    std::string group;
    std::string method;   // "native" or a refill method
    std::string profile;  // "none" or a compression profile
};

struct CorpusSpec {
    int scenes = 12;
    int natives_per_scene = 5;
    int refills_per_scene = 5;
    std::vector<RefillMethod> methods;  // cycled over refilled clips; empty means all five kinds
    int frames = 30;
    int width = 256;
    int height = 256;
    int bit_depth = 10;
    bool chroma = true;
    double grain_min = 0.8;
    double grain_max = 1.6;
    double detail_min = 0.0;
    double detail_max = 0.0;
    double correlation_min = 0.0;
    double correlation_max = 0.0;
    std::optional<CompressionProfile> profile;
    std::uint64_t seed = 7;
};

std::vector<RefillMethod> default_methods(std::uint64_t seed);
void validate(const CorpusSpec& spec);
std::size_t corpus_size(const CorpusSpec& spec);
/// Clip k of the corpus; clips are independent so callers may stream them.
Clip make_clip(const CorpusSpec& spec, std::size_t k);
std::vector<Clip> make_corpus(const CorpusSpec& spec, int threads = 1);

struct ManifestRecord {
    std::string path;
    int label = 0;
    std::string group;
    std::string method;
    std::string profile;
};

std::string format_manifest(std::span<const ManifestRecord> records, std::string_view comment = {});
std::vector<ManifestRecord> read_manifest(std::string_view text);

/// Writes <name>.y4m and <name>.meta.csv per clip plus manifest.csv under `dir`.
std::vector<ManifestRecord> write_corpus(std::span<const Clip> clips, const std::string& dir,
                                         std::string_view comment = {});

}  // namespace bdf::sim
