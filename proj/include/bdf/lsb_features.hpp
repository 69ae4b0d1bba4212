#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bdf/frame.hpp"

namespace bdf {

/// A plane split into its d-2 most significant bits and 2 least significant bits.
struct BitSplit {
    int width = 0;
    int height = 0;
    int bit_depth = 0;
    std::vector<std::uint16_t> msb;  // < 2^(d-2)
    std::vector<std::uint8_t> lsb;   // < 4
};

BitSplit split_bits(const Plane& plane);
BitSplit split_bits(std::span<const std::uint16_t> samples, int width, int height, int bit_depth);
/// Inverse of split_bits: 4*msb + lsb.
Plane merge_bits(const BitSplit& split);

/// Windowed statistics at every pixel whose (2s+1)^2 window lies inside the
/// plane. Map index (x, y) corresponds to plane pixel (x + s, y + s).
struct FeatureMaps {
    int radius = 0;
    int width = 0;   // interior width, plane width - 2s
    int height = 0;  // interior height
    std::vector<double> intensity;  // mean of MSBs
    std::vector<double> lsb_std;    // population std of LSBs
    std::vector<double> msb_std;    // population std of MSBs

    std::size_t size() const { return intensity.size(); }
};

/// O(1)-per-pixel window statistics from integral images.
FeatureMaps window_stats(const BitSplit& split, int radius);

struct CloudPoint {
    double x = 0.0;  // normalized intensity
    double y = 0.0;  // normalized LSB std
};

using PointCloud = std::vector<CloudPoint>;

/// Centers each coordinate at zero and scales it so the largest absolute
/// deviation is 1 (a coordinate with zero spread is only centered).
void normalize(PointCloud& cloud);

/// Points (intensity, lsb_std) of windows whose MSBs are not flat, normalized.
/// Throws EmptyCloud when no window survives.
PointCloud build_point_set(const FeatureMaps& maps);

struct CloudBin {
    std::size_t count = 0;
    double min_y = 0.0;
    double max_y = 0.0;
    double mean_y = 0.0;
    double std_y = 0.0;

    bool empty() const { return count == 0; }
    double spread() const { return empty() ? 0.0 : max_y - min_y; }
};

struct BinnedCloud {
    std::vector<CloudBin> bins;
    std::vector<int> membership;  // 0-based bin of each point

    std::size_t bin_count() const { return bins.size(); }
};

/// Partitions the cloud into `n` equal-width x intervals; the last interval is closed.
BinnedCloud bin_cloud(const PointCloud& cloud, int n);

struct ChannelFeatures {
    double entropy = 0.0;
    int outliers_of_means = 0;
    int outliers_of_stds = 0;
};

ChannelFeatures channel_features(const BinnedCloud& binned);

/// Count of values farther than three standard deviations from their mean.
int three_sigma_outliers(std::span<const double> values);

struct FeatureConfig {
    int radius = 2;
    int bins = 100;
};

inline constexpr int kFeaturesPerChannel = 3;

std::string channel_name(std::size_t plane_index, std::size_t plane_count);

ChannelFeatures plane_features(const Plane& plane, const FeatureConfig& config);

/// [entropy, outliers_of_means, outliers_of_stds] per plane, planes in order.
/// A plane that cannot be analyzed raises its EmptyCloud/DegenerateCloud error
/// with the channel name in the message.
std::vector<double> frame_feature_vector(const Frame& frame, const FeatureConfig& config);

}  // namespace bdf
