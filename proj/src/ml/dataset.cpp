#include <algorithm>
#include <numeric>

#include "bdf/error.hpp"
#include "bdf/ml.hpp"

namespace bdf::ml {

void Dataset::add(std::span<const double> row, int label, std::string group) {
    if (width_ == 0 && labels_.empty()) width_ = row.size();
    if (row.size() != width_)
        throw Error(ErrorKind::Shape, "row width " + std::to_string(row.size()) + " != dataset width " +
                                          std::to_string(width_));
    if (label != kNative && label != kUpconverted) throw Error(ErrorKind::Domain, "labels must be 0 or 1");
    if (group.empty()) throw Error(ErrorKind::Domain, "group id must be nonempty");
    values_.insert(values_.end(), row.begin(), row.end());
    labels_.push_back(label);
    groups_.push_back(std::move(group));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out(width_);
    for (auto i : indices) out.add(row(i), labels_[i], groups_[i]);
    return out;
}

std::vector<std::size_t> Dataset::canonical_order() const {
    std::vector<std::size_t> order(rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (labels_[a] != labels_[b]) return labels_[a] < labels_[b];
        const auto ra = row(a), rb = row(b);
        for (std::size_t k = 0; k < width_; ++k) {
            if (ra[k] != rb[k]) return ra[k] < rb[k];
        }
        return groups_[a] < groups_[b];
    });
    return order;
}

std::size_t Dataset::positives() const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), kUpconverted));
}

}  // namespace bdf::ml
