#include "bdf/lsb_features.hpp"

#include <algorithm>
#include <cmath>

#include "bdf/error.hpp"

namespace bdf {

BitSplit split_bits(std::span<const std::uint16_t> samples, int width, int height, int bit_depth) {
    if (bit_depth < 3) throw Error(ErrorKind::Domain, "bit depth must be at least 3 to split off two LSBs");
    if (samples.size() != static_cast<std::size_t>(width) * height)
        throw Error(ErrorKind::Shape, "sample count does not match geometry");
    BitSplit s{width, height, bit_depth, std::vector<std::uint16_t>(samples.size()),
               std::vector<std::uint8_t>(samples.size())};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        s.msb[i] = static_cast<std::uint16_t>(samples[i] >> 2);
        s.lsb[i] = static_cast<std::uint8_t>(samples[i] & 3u);
    }
    return s;
}

BitSplit split_bits(const Plane& plane) {
    return split_bits(plane.samples(), plane.width(), plane.height(), plane.bit_depth());
}

Plane merge_bits(const BitSplit& split) {
    std::vector<std::uint16_t> samples(split.msb.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = static_cast<std::uint16_t>((split.msb[i] << 2) | split.lsb[i]);
    return Plane(split.width, split.height, split.bit_depth, std::move(samples));
}

namespace {

template <typename T, typename Src>
std::vector<T> integral(std::span<const Src> src, int w, int h, bool squared) {
    const std::size_t stride = static_cast<std::size_t>(w) + 1;
    std::vector<T> ii(stride * (static_cast<std::size_t>(h) + 1), T{0});
    for (int y = 0; y < h; ++y) {
        T row = 0;
        const Src* s = src.data() + static_cast<std::size_t>(y) * w;
        T* above = ii.data() + static_cast<std::size_t>(y) * stride;
        T* cur = above + stride;
        for (int x = 0; x < w; ++x) {
            const T v = static_cast<T>(s[x]);
            row += squared ? v * v : v;
            cur[x + 1] = above[x + 1] + row;
        }
    }
    return ii;
}

template <typename T>
inline T box(const std::vector<T>& ii, std::size_t stride, int x0, int y0, int x1, int y1) {
    // Inclusive-exclusive box [x0, x1) x [y0, y1).
    return ii[static_cast<std::size_t>(y1) * stride + x1] - ii[static_cast<std::size_t>(y0) * stride + x1] -
           ii[static_cast<std::size_t>(y1) * stride + x0] + ii[static_cast<std::size_t>(y0) * stride + x0];
}

}  // namespace

FeatureMaps window_stats(const BitSplit& split, int radius) {
    if (radius < 1) throw Error(ErrorKind::Domain, "window radius must be at least 1");
    const int side = 2 * radius + 1;
    if (split.width <= 2 * radius || split.height <= 2 * radius)
        throw Error(ErrorKind::Domain, "plane " + std::to_string(split.width) + "x" + std::to_string(split.height) +
                                           " too small for window radius " + std::to_string(radius));
    const int w = split.width, h = split.height;
    const auto msb_sum = integral<std::int64_t, std::uint16_t>(split.msb, w, h, false);
    const auto msb_sq = integral<std::int64_t, std::uint16_t>(split.msb, w, h, true);
    const auto lsb_sum = integral<std::int64_t, std::uint8_t>(split.lsb, w, h, false);
    const auto lsb_sq = integral<std::int64_t, std::uint8_t>(split.lsb, w, h, true);
    const std::size_t stride = static_cast<std::size_t>(w) + 1;

    FeatureMaps maps;
    maps.radius = radius;
    maps.width = w - 2 * radius;
    maps.height = h - 2 * radius;
    const std::size_t count = static_cast<std::size_t>(maps.width) * maps.height;
    maps.intensity.resize(count);
    maps.lsb_std.resize(count);
    maps.msb_std.resize(count);

    const std::int64_t n = static_cast<std::int64_t>(side) * side;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int y = 0; y < maps.height; ++y) {
        for (int x = 0; x < maps.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * maps.width + x;
            const std::int64_t sh = box(msb_sum, stride, x, y, x + side, y + side);
            const std::int64_t sh2 = box(msb_sq, stride, x, y, x + side, y + side);
            const std::int64_t sl = box(lsb_sum, stride, x, y, x + side, y + side);
            const std::int64_t sl2 = box(lsb_sq, stride, x, y, x + side, y + side);
            // n^2 * variance, exact in integers.
            const std::int64_t var_h = n * sh2 - sh * sh;
            const std::int64_t var_l = n * sl2 - sl * sl;
            maps.intensity[i] = static_cast<double>(sh) * inv_n;
            maps.msb_std[i] = std::sqrt(static_cast<double>(var_h)) * inv_n;
            maps.lsb_std[i] = std::sqrt(static_cast<double>(var_l)) * inv_n;
        }
    }
    return maps;
}

namespace {

void normalize_axis(PointCloud& cloud, double CloudPoint::*axis) {
    long double sum = 0.0L;
    for (const auto& p : cloud) sum += p.*axis;
    const double mean = static_cast<double>(sum / static_cast<long double>(cloud.size()));
    double dev = 0.0;
    for (auto& p : cloud) {
        p.*axis -= mean;
        dev = std::max(dev, std::abs(p.*axis));
    }
    if (dev > 0.0) {
        const double inv = 1.0 / dev;
        for (auto& p : cloud) p.*axis *= inv;
    }
}

}  // namespace

void normalize(PointCloud& cloud) {
    if (cloud.empty()) return;
    normalize_axis(cloud, &CloudPoint::x);
    normalize_axis(cloud, &CloudPoint::y);
}

PointCloud build_point_set(const FeatureMaps& maps) {
    if (maps.size() == 0) throw Error(ErrorKind::EmptyCloud, "feature maps are empty");
    PointCloud cloud;
    cloud.reserve(maps.size());
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (maps.msb_std[i] > 0.0) cloud.push_back({maps.intensity[i], maps.lsb_std[i]});
    }
    if (cloud.empty()) throw Error(ErrorKind::EmptyCloud, "every window has flat MSBs");
    normalize(cloud);
    return cloud;
}

BinnedCloud bin_cloud(const PointCloud& cloud, int n) {
    if (n < 1) throw Error(ErrorKind::Domain, "bin count must be at least 1");
    if (cloud.size() < 2) throw Error(ErrorKind::DegenerateCloud, "need at least two points to bin");
    double lo = cloud.front().x, hi = cloud.front().x;
    for (const auto& p : cloud) {
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
    }
    const double range = hi - lo;
    if (!(range > 0.0)) throw Error(ErrorKind::DegenerateCloud, "all points share one intensity");

    BinnedCloud out;
    out.bins.resize(static_cast<std::size_t>(n));
    out.membership.resize(cloud.size());
    std::vector<double> sum(out.bins.size(), 0.0), sum_sq(out.bins.size(), 0.0);
    const double scale = static_cast<double>(n) / range;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud[i];
        auto m = static_cast<int>(std::floor((p.x - lo) * scale));
        m = std::clamp(m, 0, n - 1);
        out.membership[i] = m;
        auto& bin = out.bins[static_cast<std::size_t>(m)];
        if (bin.count == 0) {
            bin.min_y = bin.max_y = p.y;
        } else {
            bin.min_y = std::min(bin.min_y, p.y);
            bin.max_y = std::max(bin.max_y, p.y);
        }
        ++bin.count;
        sum[static_cast<std::size_t>(m)] += p.y;
    }
    for (std::size_t m = 0; m < out.bins.size(); ++m) {
        auto& bin = out.bins[m];
        if (bin.count) bin.mean_y = sum[m] / static_cast<double>(bin.count);
    }
    // Second pass for a numerically stable population variance.
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto m = static_cast<std::size_t>(out.membership[i]);
        const double d = cloud[i].y - out.bins[m].mean_y;
        sum_sq[m] += d * d;
    }
    for (std::size_t m = 0; m < out.bins.size(); ++m) {
        auto& bin = out.bins[m];
        if (bin.count) bin.std_y = std::sqrt(sum_sq[m] / static_cast<double>(bin.count));
    }
    return out;
}

int three_sigma_outliers(std::span<const double> values) {
    if (values.empty()) return 0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sigma = std::sqrt(var / static_cast<double>(values.size()));
    if (!(sigma > 0.0)) return 0;
    int count = 0;
    for (double v : values) count += std::abs(v - mean) > 3.0 * sigma ? 1 : 0;
    return count;
}

ChannelFeatures channel_features(const BinnedCloud& binned) {
    ChannelFeatures f;
    std::vector<double> means, stds;
    for (const auto& bin : binned.bins) {
        if (bin.empty()) continue;
        const double delta = bin.spread();
        if (delta > 0.0) f.entropy -= delta * std::log(delta);
        means.push_back(bin.mean_y);
        stds.push_back(bin.std_y);
    }
    if (means.empty()) throw Error(ErrorKind::DegenerateCloud, "no nonempty bins");
    f.outliers_of_means = three_sigma_outliers(means);
    f.outliers_of_stds = three_sigma_outliers(stds);
    return f;
}

std::string channel_name(std::size_t plane_index, std::size_t plane_count) {
    if (plane_count == 3) {
        static const char* names[] = {"Y", "Cb", "Cr"};
        return names[plane_index];
    }
    return plane_index == 0 ? "Y" : "plane" + std::to_string(plane_index);
}

ChannelFeatures plane_features(const Plane& plane, const FeatureConfig& config) {
    const auto maps = window_stats(split_bits(plane), config.radius);
    const auto cloud = build_point_set(maps);
    return channel_features(bin_cloud(cloud, config.bins));
}

std::vector<double> frame_feature_vector(const Frame& frame, const FeatureConfig& config) {
    std::vector<double> out;
    out.reserve(frame.plane_count() * kFeaturesPerChannel);
    for (std::size_t c = 0; c < frame.plane_count(); ++c) {
        ChannelFeatures f;
        try {
            f = plane_features(frame.plane(c), config);
        } catch (const Error& e) {
            throw Error(e.kind(), "channel " + channel_name(c, frame.plane_count()) + " un-analyzable: " + e.what());
        }
        out.push_back(f.entropy);
        out.push_back(f.outliers_of_means);
        out.push_back(f.outliers_of_stds);
    }
    return out;
}

}  // namespace bdf
