#include "bdf/upconvert_sim.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "bdf/error.hpp"
#include "bdf/ingest.hpp"
#include "bdf/util.hpp"

namespace bdf::sim {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + r];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Separable blur with clamped borders.
std::vector<double> blur(const std::vector<double>& src, int w, int h, double sigma) {
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    std::vector<double> tmp(src.size()), out(src.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[i + r] * src[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
            tmp[static_cast<std::size_t>(y) * w + x] = s;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = s;
        }
    }
    return out;
}

// MSB plane at full-depth scale, centered in its 4-code bucket.
std::vector<double> msb_midpoints(const Plane& p) {
    std::vector<double> v(p.samples().size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 4.0 * (p.samples()[i] >> 2) + 1.5;
    return v;
}

bool parse_u64(std::string_view s, std::uint64_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_int(std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

void RefillMethod::validate() const {
    if (kind == RefillKind::GaussianSmooth && !(sigma > 0.0 && sigma <= 5.0))
        throw Error(ErrorKind::Config, "gaussian_smooth sigma must be in (0, 5]");
}

RefillMethod RefillMethod::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? std::string() : text.substr(colon + 1);
    RefillMethod m;
    if (name == "zeros") {
        m.kind = RefillKind::Zeros;
    } else if (name == "uniform_noise" || name == "noise") {
        m.kind = RefillKind::UniformNoise;
        if (!arg.empty() && !parse_u64(arg, m.seed)) throw Error(ErrorKind::Config, "bad noise seed '" + arg + "'");
    } else if (name == "bit_replicate" || name == "replicate") {
        m.kind = RefillKind::BitReplicate;
    } else if (name == "dither" || name == "dither_floyd_steinberg") {
        m.kind = RefillKind::Dither;
    } else if (name == "gaussian_smooth" || name == "smooth") {
        m.kind = RefillKind::GaussianSmooth;
        if (!arg.empty()) {
            std::size_t used = 0;
            try {
                m.sigma = std::stod(arg, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != arg.size()) throw Error(ErrorKind::Config, "bad smoothing sigma '" + arg + "'");
        }
    } else {
        throw Error(ErrorKind::Config, "unknown refill method '" + text + "'");
    }
    if (!arg.empty() && (m.kind == RefillKind::Zeros || m.kind == RefillKind::BitReplicate || m.kind == RefillKind::Dither))
        throw Error(ErrorKind::Config, "refill method '" + name + "' takes no parameter");
    m.validate();
    return m;
}

std::string RefillMethod::to_string() const {
    switch (kind) {
        case RefillKind::Zeros: return "zeros";
        case RefillKind::UniformNoise: return "uniform_noise:" + std::to_string(seed);
        case RefillKind::BitReplicate: return "bit_replicate";
        case RefillKind::Dither: return "dither";
        case RefillKind::GaussianSmooth: {
            std::ostringstream os;
            os << "gaussian_smooth:" << sigma;
            return os.str();
        }
    }
    return "unknown";
}

Plane refill_plane(const Plane& plane, const RefillMethod& method, std::uint64_t stream) {
    method.validate();
    if (plane.bit_depth() < 3) throw Error(ErrorKind::Domain, "refill needs at least 3 bits");
    const int w = plane.width(), h = plane.height(), d = plane.bit_depth();
    const auto src = plane.samples();
    std::vector<std::uint16_t> out(src.size());
    switch (method.kind) {
        case RefillKind::Zeros:
            for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i] & ~std::uint16_t{3};
            break;
        case RefillKind::UniformNoise: {
            Rng rng(derive_seed(method.seed, stream, 0x6e6f697365));
            for (std::size_t i = 0; i < src.size(); ++i)
                out[i] = static_cast<std::uint16_t>((src[i] & ~3u) | rng.below(4));
            break;
        }
        case RefillKind::BitReplicate:
            for (std::size_t i = 0; i < src.size(); ++i) {
                const unsigned hi = src[i] >> 2;
                out[i] = static_cast<std::uint16_t>((hi << 2) | (hi >> (d - 4)));
            }
            break;
        case RefillKind::Dither: {
            // Floyd-Steinberg from the bucket centers of the MSB signal.
            const auto target = msb_midpoints(plane);
            std::vector<double> err(target.size(), 0.0);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    const double base = 4.0 * (src[i] >> 2);
                    const double want = target[i] + err[i];
                    const int l = std::clamp(static_cast<int>(std::lround(want - base)), 0, 3);
                    out[i] = static_cast<std::uint16_t>(base + l);
                    const double e = want - (base + l);
                    if (x + 1 < w) err[i + 1] += e * 7.0 / 16.0;
                    if (y + 1 < h) {
                        if (x > 0) err[i + w - 1] += e * 3.0 / 16.0;
                        err[i + w] += e * 5.0 / 16.0;
                        if (x + 1 < w) err[i + w + 1] += e * 1.0 / 16.0;
                    }
                }
            }
            break;
        }
        case RefillKind::GaussianSmooth: {
            const auto smooth = blur(msb_midpoints(plane), w, h, method.sigma);
            for (std::size_t i = 0; i < src.size(); ++i) {
                const auto low = static_cast<unsigned>(std::max(0L, std::lround(smooth[i]))) & 3u;
                out[i] = static_cast<std::uint16_t>((src[i] & ~3u) | low);
            }
            break;
        }
    }
    return Plane(w, h, d, std::move(out));
}

Frame refill(const Frame& frame, const RefillMethod& method, std::uint64_t frame_index) {
    std::vector<Plane> planes;
    for (std::size_t c = 0; c < frame.plane_count(); ++c)
        planes.push_back(refill_plane(frame.plane(c), method, frame_index * 4 + c));
    return Frame(std::move(planes));
}

VideoSequence refill(const VideoSequence& video, const RefillMethod& method, int threads) {
    method.validate();
    std::vector<Frame> frames(video.size());
    parallel_for(video.size(), threads, [&](std::size_t i) { frames[i] = refill(video.frame(i), method, i); });
    return VideoSequence(std::move(frames), std::vector<FrameMeta>(video.meta().begin(), video.meta().end()));
}

void CompressionProfile::validate() const {
    if (q_i < 0 || q_p < 0 || q_b < 0) throw Error(ErrorKind::Config, "quantization strengths must be >= 0");
    if (q_i > 12 || q_p > 12 || q_b > 12) throw Error(ErrorKind::Config, "quantization strengths must be <= 12");
    if (!(q_i <= q_p && q_p <= q_b)) throw Error(ErrorKind::Config, "strengths must satisfy q_I <= q_P <= q_B");
    if (gop.empty()) throw Error(ErrorKind::Config, "empty GOP pattern");
    int intra = 0;
    for (char c : gop) {
        if (c == 'I') ++intra;
        else if (c != 'P' && c != 'B') throw Error(ErrorKind::Config, "GOP pattern may only contain I, P, B");
    }
    if (intra != 1) throw Error(ErrorKind::Config, "GOP pattern must contain exactly one I");
    if (gop.front() != 'I') throw Error(ErrorKind::Config, "GOP pattern must start with I");
}

CompressionProfile CompressionProfile::from_strength(int q, std::string gop) {
    CompressionProfile p;
    p.q_i = std::max(q - 1, 0);
    p.q_p = q;
    p.q_b = q + 1;
    p.gop = std::move(gop);
    return p;
}

CompressionProfile CompressionProfile::parse(const std::string& text) {
    CompressionProfile p;
    const auto slash = text.find('/');
    const std::string qs = text.substr(0, slash);
    if (slash != std::string::npos) p.gop = text.substr(slash + 1);
    std::array<int, 3> q{};
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
        const auto comma = qs.find(',', pos);
        if ((k < 2) != (comma != std::string::npos)) throw Error(ErrorKind::Config, "profile must be 'qI,qP,qB/GOP'");
        const auto field = qs.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!parse_int(field, q[k])) throw Error(ErrorKind::Config, "bad quantization strength '" + field + "'");
        pos = comma + 1;
    }
    p.q_i = q[0];
    p.q_p = q[1];
    p.q_b = q[2];
    p.validate();
    return p;
}

std::string CompressionProfile::to_string() const {
    return std::to_string(q_i) + "," + std::to_string(q_p) + "," + std::to_string(q_b) + "/" + gop;
}

FrameType CompressionProfile::type_at(std::size_t frame_index) const {
    return *frame_type_from_char(gop[frame_index % gop.size()]);
}

int CompressionProfile::strength(FrameType t) const {
    switch (t) {
        case FrameType::I: return q_i;
        case FrameType::P: return q_p;
        case FrameType::B: return q_b;
    }
    return q_b;
}

namespace {

struct Dct8 {
    double m[8][8];
    Dct8() {
        for (int k = 0; k < 8; ++k) {
            const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int n = 0; n < 8; ++n) m[k][n] = a * std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
        }
    }
};

const Dct8& dct() {
    static const Dct8 table;
    return table;
}

}  // namespace

std::int64_t quantize_plane(std::vector<std::uint16_t>& samples, int width, int height, int bit_depth, int q) {
    const auto& t = dct().m;
    const double step = std::ldexp(1.0, q);
    const int max_v = (1 << bit_depth) - 1;
    std::int64_t nonzero = 0;
    double block[8][8], tmp[8][8];
    for (int by = 0; by < height; by += 8) {
        for (int bx = 0; bx < width; bx += 8) {
            // Edge blocks are padded by replication and cropped on the way back.
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    block[y][x] = samples[static_cast<std::size_t>(std::min(by + y, height - 1)) * width +
                                          std::min(bx + x, width - 1)];
            for (int y = 0; y < 8; ++y)
                for (int k = 0; k < 8; ++k) {
                    double s = 0.0;
                    for (int x = 0; x < 8; ++x) s += t[k][x] * block[y][x];
                    tmp[y][k] = s;
                }
            for (int k = 0; k < 8; ++k)
                for (int l = 0; l < 8; ++l) {
                    double s = 0.0;
                    for (int y = 0; y < 8; ++y) s += t[k][y] * tmp[y][l];
                    const double level = std::nearbyint(s / step);
                    if (level != 0.0) ++nonzero;
                    block[k][l] = level * step;
                }
            if (q == 0) continue;
            for (int k = 0; k < 8; ++k)
                for (int x = 0; x < 8; ++x) {
                    double s = 0.0;
                    for (int l = 0; l < 8; ++l) s += block[k][l] * t[l][x];
                    tmp[k][x] = s;
                }
            for (int y = 0; y < 8 && by + y < height; ++y)
                for (int x = 0; x < 8 && bx + x < width; ++x) {
                    double s = 0.0;
                    for (int k = 0; k < 8; ++k) s += t[k][y] * tmp[k][x];
                    samples[static_cast<std::size_t>(by + y) * width + bx + x] =
                        static_cast<std::uint16_t>(std::clamp(static_cast<int>(std::lround(s)), 0, max_v));
                }
        }
    }
    return nonzero;
}

Compressed simulate_compression(const VideoSequence& video, const CompressionProfile& profile, int threads) {
    profile.validate();
    std::vector<Frame> frames(video.size());
    std::vector<FrameMeta> meta(video.size());
    parallel_for(video.size(), threads, [&](std::size_t i) {
        const Frame& f = video.frame(i);
        const FrameType type = profile.type_at(i);
        const int q = profile.strength(type);
        std::int64_t size = 0;
        std::vector<Plane> planes;
        for (const auto& p : f.planes()) {
            std::vector<std::uint16_t> s(p.samples().begin(), p.samples().end());
            size += quantize_plane(s, p.width(), p.height(), p.bit_depth(), q);
            planes.emplace_back(p.width(), p.height(), p.bit_depth(), std::move(s));
        }
        frames[i] = Frame(std::move(planes));
        meta[i] = FrameMeta{static_cast<std::int64_t>(i), type, size};
    });
    Compressed out;
    out.video = VideoSequence(std::move(frames), meta);
    out.meta = std::move(meta);
    return out;
}

std::string to_string(SceneKind kind) {
    switch (kind) {
        case SceneKind::Gradient: return "gradient";
        case SceneKind::Vignette: return "vignette";
        case SceneKind::Texture: return "texture";
    }
    return "unknown";
}

SceneKind scene_kind_from_string(const std::string& name) {
    if (name == "gradient") return SceneKind::Gradient;
    if (name == "vignette") return SceneKind::Vignette;
    if (name == "texture") return SceneKind::Texture;
    throw Error(ErrorKind::Config, "unknown scene kind '" + name + "'");
}

namespace {

// Smooth field in code values, with parameters drawn once per scene.
struct Field {
    SceneKind kind;
    double level, amplitude, angle, cx, cy, drift_x, drift_y, brightness_drift;
    std::array<double, 3> fx{}, fy{}, phase{}, weight{};
    std::array<double, 6> dfx{}, dfy{}, dphase{};

    Field(SceneKind k, Rng& rng, double max_value) : kind(k) {
        level = rng.uniform(0.25, 0.65) * max_value;
        amplitude = rng.uniform(10.0, 28.0);
        angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        cx = rng.uniform(0.3, 0.7);
        cy = rng.uniform(0.3, 0.7);
        drift_x = rng.uniform(-0.004, 0.004);
        drift_y = rng.uniform(-0.004, 0.004);
        brightness_drift = rng.uniform(-0.15, 0.15);
        for (int i = 0; i < 3; ++i) {
            fx[i] = rng.uniform(-1.5, 1.5);
            fy[i] = rng.uniform(-1.5, 1.5);
            phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
            weight[i] = rng.uniform(0.5, 1.0);
        }
        for (int i = 0; i < 6; ++i) {
            dfx[i] = rng.uniform(-12.0, 12.0);
            dfy[i] = rng.uniform(-12.0, 12.0);
            dphase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
    }

    // Medium-frequency structure in [-1, 1], scaled per shot.
    double detail_at(double u, double v) const {
        double s = 0.0;
        for (int i = 0; i < 6; ++i) s += std::sin(2.0 * std::numbers::pi * (dfx[i] * u + dfy[i] * v) + dphase[i]);
        return s / 6.0;
    }

    // u, v in [0, 1) across the frame; t in frames.
    double at(double u, double v, double t) const {
        u += drift_x * t;
        v += drift_y * t;
        double shape = 0.0;
        switch (kind) {
            case SceneKind::Gradient: shape = (std::cos(angle) * (u - 0.5) + std::sin(angle) * (v - 0.5)); break;
            case SceneKind::Vignette: {
                const double r2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
                shape = 0.5 - 1.6 * r2;
                break;
            }
            case SceneKind::Texture: {
                double s = 0.0, wsum = 0.0;
                for (int i = 0; i < 3; ++i) {
                    s += weight[i] * std::sin(2.0 * std::numbers::pi * (fx[i] * u + fy[i] * v) + phase[i]);
                    wsum += weight[i];
                }
                shape = 0.5 * s / wsum;
                break;
            }
        }
        return level + amplitude * shape + brightness_drift * t;
    }
};

// Unit-variance Gaussian field, low-passed when `correlation` > 0 (pixels).
std::vector<double> grain_field(int w, int h, double correlation, Rng& noise) {
    std::vector<double> n(static_cast<std::size_t>(w) * h);
    for (auto& v : n) v = noise.normal();
    if (correlation <= 0.0) return n;
    const auto k = gaussian_kernel(correlation);
    double k2 = 0.0;
    for (double v : k) k2 += v * v;
    auto out = blur(n, w, h, correlation);
    for (auto& v : out) v /= k2;  // separable: variance shrinks by (sum k^2)^2
    return out;
}

Plane render(const Field& field, int w, int h, int d, double grain, double correlation, double detail, double t,
             Rng& noise, double scale) {
    const double max_v = static_cast<double>((1 << d) - 1);
    const auto n = grain > 0.0 ? grain_field(w, h, correlation, noise) : std::vector<double>();
    std::vector<std::uint16_t> s(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = (x + 0.5) / w, v = (y + 0.5) / h;
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            double clean = field.level + scale * (field.at(u, v, t) - field.level);
            if (detail > 0.0) {
                const double du = u + field.drift_x * t, dv = v + field.drift_y * t;
                clean += scale * detail * field.detail_at(du, dv);
            }
            // Shot-noise-like: grain grows with brightness.
            const double sigma = grain * std::sqrt(0.5 + clean / max_v);
            const double value = clean + (grain > 0.0 ? sigma * n[i] : 0.0);
            s[i] = static_cast<std::uint16_t>(std::clamp(std::lround(value), 0L, static_cast<long>(max_v)));
        }
    }
    return Plane(w, h, d, std::move(s));
}

}  // namespace

VideoSequence synth_scene(const SceneSpec& spec) {
    if (spec.width < 8 || spec.height < 8) throw Error(ErrorKind::Config, "scene must be at least 8x8");
    if (spec.chroma && (spec.width % 2 || spec.height % 2))
        throw Error(ErrorKind::Config, "4:2:0 scenes need even dimensions");
    if (spec.frames < 1) throw Error(ErrorKind::Config, "scene needs at least one frame");
    if (spec.bit_depth < kMinBitDepth || spec.bit_depth > kMaxBitDepth) throw Error(ErrorKind::Config, "bad bit depth");
    if (!(spec.grain >= 0.0)) throw Error(ErrorKind::Config, "grain must be >= 0");
    if (!(spec.detail >= 0.0)) throw Error(ErrorKind::Config, "detail must be >= 0");
    if (!(spec.grain_correlation >= 0.0 && spec.grain_correlation <= 5.0))
        throw Error(ErrorKind::Config, "grain correlation must be in [0, 5]");

    const double max_v = static_cast<double>((1 << spec.bit_depth) - 1);
    Rng scene_rng(derive_seed(spec.seed, 0x7363656e65));
    const Field luma(spec.kind, scene_rng, max_v);
    const Field cb(spec.kind, scene_rng, max_v);
    const Field cr(spec.kind, scene_rng, max_v);
    // Shots of one scene differ in framing offset and noise.
    Rng shot_rng(derive_seed(spec.seed, 0x73686f74, spec.variant));
    const double t0 = spec.variant == 0 ? 0.0 : shot_rng.uniform(0.0, 200.0);

    std::vector<Frame> frames;
    frames.reserve(spec.frames);
    for (int f = 0; f < spec.frames; ++f) {
        Rng noise(derive_seed(spec.seed, spec.variant * 1000003ull + 1, static_cast<std::uint64_t>(f)));
        const double t = t0 + f;
        std::vector<Plane> planes;
        planes.push_back(render(luma, spec.width, spec.height, spec.bit_depth, spec.grain, spec.grain_correlation, spec.detail, t, noise, 1.0));
        if (spec.chroma) {
            const int cw = spec.width / 2, ch = spec.height / 2;
            planes.push_back(render(cb, cw, ch, spec.bit_depth, spec.grain * 0.7, spec.grain_correlation, spec.detail, t, noise, 0.8));
            planes.push_back(render(cr, cw, ch, spec.bit_depth, spec.grain * 0.7, spec.grain_correlation, spec.detail, t, noise, 0.8));
        }
        frames.emplace_back(std::move(planes));
    }
    return VideoSequence(std::move(frames));
}

std::vector<RefillMethod> default_methods(std::uint64_t seed) {
    return {RefillMethod{RefillKind::Zeros, 0, 1.0}, RefillMethod{RefillKind::UniformNoise, seed, 1.0},
            RefillMethod{RefillKind::BitReplicate, 0, 1.0}, RefillMethod{RefillKind::Dither, 0, 1.0},
            RefillMethod{RefillKind::GaussianSmooth, 0, 1.5}};
}

void validate(const CorpusSpec& spec) {
    if (spec.scenes < 1 || spec.natives_per_scene < 0 || spec.refills_per_scene < 0 ||
        spec.natives_per_scene + spec.refills_per_scene < 1)
        throw Error(ErrorKind::Config, "corpus needs scenes and clips per scene");
    if (!(spec.grain_min >= 0.0 && spec.grain_max >= spec.grain_min)) throw Error(ErrorKind::Config, "bad grain range");
    if (!(spec.detail_min >= 0.0 && spec.detail_max >= spec.detail_min)) throw Error(ErrorKind::Config, "bad detail range");
    if (!(spec.correlation_min >= 0.0 && spec.correlation_max >= spec.correlation_min && spec.correlation_max <= 5.0))
        throw Error(ErrorKind::Config, "bad grain correlation range");
    if (spec.profile) spec.profile->validate();
    for (const auto& m : spec.methods) m.validate();
}

std::size_t corpus_size(const CorpusSpec& spec) {
    return static_cast<std::size_t>(spec.scenes) * (spec.natives_per_scene + spec.refills_per_scene);
}

Clip make_clip(const CorpusSpec& spec, std::size_t k) {
    validate(spec);
    if (k >= corpus_size(spec)) throw Error(ErrorKind::Range, "clip index out of range");
    const auto methods = spec.methods.empty() ? default_methods(spec.seed) : spec.methods;
    const int per_scene = spec.natives_per_scene + spec.refills_per_scene;
    const int g = static_cast<int>(k / per_scene);
    const int j = static_cast<int>(k % per_scene);
    Rng rng(derive_seed(spec.seed, 0x636c6970, k));
    SceneSpec s;
    s.kind = static_cast<SceneKind>(g % 3);
    s.width = spec.width;
    s.height = spec.height;
    s.frames = spec.frames;
    s.bit_depth = spec.bit_depth;
    s.chroma = spec.chroma;
    s.grain = rng.uniform(spec.grain_min, spec.grain_max);
    s.detail = rng.uniform(spec.detail_min, spec.detail_max);
    s.grain_correlation = rng.uniform(spec.correlation_min, spec.correlation_max);
    s.seed = derive_seed(spec.seed, 0x7363, static_cast<std::uint64_t>(g));
    s.variant = static_cast<std::uint64_t>(j) + 1;
    VideoSequence video = synth_scene(s);

    Clip c;
    char name[64];
    std::snprintf(name, sizeof name, "scene%02d", g);
    c.group = name;
    std::snprintf(name, sizeof name, "scene%02d_clip%02d", g, j);
    c.name = name;
    if (j < spec.natives_per_scene) {
        c.label = 0;
        c.method = "native";
    } else {
        const int r = (j - spec.natives_per_scene) + g * spec.refills_per_scene;
        RefillMethod m = methods[static_cast<std::size_t>(r) % methods.size()];
        if (m.kind == RefillKind::UniformNoise) m.seed = derive_seed(m.seed, k);
        video = refill(video, m);
        c.label = 1;
        c.method = m.to_string();
    }
    if (spec.profile) {
        auto comp = simulate_compression(video, *spec.profile);
        c.video = std::move(comp.video);
        c.meta = std::move(comp.meta);
        c.profile = spec.profile->to_string();
    } else {
        c.video = std::move(video);
        c.profile = "none";
    }
    return c;
}

std::vector<Clip> make_corpus(const CorpusSpec& spec, int threads) {
    validate(spec);
    std::vector<Clip> clips(corpus_size(spec));
    parallel_for(clips.size(), threads, [&](std::size_t k) { clips[k] = make_clip(spec, k); });
    return clips;
}

namespace {

// Profiles such as "1,2,3/IBBP" contain commas, so fields are quoted when needed.
std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"") == std::string::npos) return v;
    std::string q = "\"";
    for (char c : v) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
    std::vector<std::string> f(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c != '"') f.back() += c;
            else if (i + 1 < line.size() && line[i + 1] == '"') f.back() += '"', ++i;
            else quoted = false;
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            f.emplace_back();
        } else {
            f.back() += c;
        }
    }
    if (quoted) throw Error(ErrorKind::Parse, "unterminated quote" + where);
    return f;
}

}  // namespace

std::string format_manifest(std::span<const ManifestRecord> records, std::string_view comment) {
    std::ostringstream os;
    if (!comment.empty()) os << "# " << comment << "\n";
    os << "path,label,group,method,profile\n";
    for (const auto& r : records)
        os << csv_field(r.path) << ',' << r.label << ',' << csv_field(r.group) << ',' << csv_field(r.method) << ','
           << csv_field(r.profile) << '\n';
    return os.str();
}

std::vector<ManifestRecord> read_manifest(std::string_view text) {
    std::vector<ManifestRecord> out;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto where = " on manifest line " + std::to_string(line_no);
        const auto f = split_csv_line(line, where);
        if (!header_seen && !f.empty() && f[0] == "path") {
            header_seen = true;
            continue;
        }
        if (f.size() != 5) throw Error(ErrorKind::Parse, "expected 5 fields" + where);
        ManifestRecord r;
        r.path = f[0];
        if (f[1] != "0" && f[1] != "1") throw Error(ErrorKind::Parse, "label must be 0 or 1" + where);
        r.label = f[1] == "1" ? 1 : 0;
        r.group = f[2];
        if (r.path.empty() || r.group.empty()) throw Error(ErrorKind::Parse, "empty path or group" + where);
        r.method = f[3];
        r.profile = f[4];
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ManifestRecord> write_corpus(std::span<const Clip> clips, const std::string& dir, std::string_view comment) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<ManifestRecord> records;
    for (const auto& c : clips) {
        const std::string base = c.name;
        write_y4m_file(c.video, (fs::path(dir) / (base + ".y4m")).string(), comment);
        if (!c.meta.empty())
            write_text_file((fs::path(dir) / (base + ".meta.csv")).string(), format_frame_metadata(c.meta, comment));
        records.push_back({base + ".y4m", c.label, c.group, c.method, c.profile});
    }
    write_text_file((fs::path(dir) / "manifest.csv").string(), format_manifest(records, comment));
    return records;
}

}  // namespace bdf::sim
