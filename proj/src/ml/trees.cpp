#include <algorithm>
#include <cmath>
#include <numeric>

#include "bdf/error.hpp"
#include "bdf/ml.hpp"

namespace bdf::ml {

double Tree::predict(std::span<const double> x) const {
    std::int32_t at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(at)];
        at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
}

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Rows in canonical order, stored row-major.
struct Matrix {
    std::size_t n = 0;
    std::size_t width = 0;
    std::vector<double> values;
    std::vector<int> labels;

    double at(std::size_t i, std::size_t f) const { return values[i * width + f]; }
    std::span<const double> row(std::size_t i) const { return std::span<const double>(values).subspan(i * width, width); }
};

Matrix canonical_matrix(const Dataset& data) {
    Matrix m;
    m.width = data.width();
    for (auto i : data.canonical_order()) {
        const auto r = data.row(i);
        m.values.insert(m.values.end(), r.begin(), r.end());
        m.labels.push_back(data.label(i));
        ++m.n;
    }
    return m;
}

enum class Criterion { SquaredError, Gini };

struct BuildParams {
    Criterion criterion = Criterion::SquaredError;
    int max_depth = 1;
    int min_samples_leaf = 1;
    int min_samples_split = 2;
    std::size_t features_per_split = 0;  // 0: all
};

// Per-row targets. SquaredError: target = residual, aux = hessian.
// Gini: target = label (0/1), aux = bootstrap weight.
struct Targets {
    std::vector<double> target;
    std::vector<double> aux;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& m, const Targets& t, const BuildParams& p, Rng* rng)
        : m_(m), t_(t), p_(p), rng_(rng) {}

    Tree build(std::vector<std::size_t> rows) {
        Tree tree;
        tree.nodes.reserve(64);
        grow(tree, rows, 0);
        return tree;
    }

private:
    double weight(std::size_t i) const { return p_.criterion == Criterion::Gini ? t_.aux[i] : 1.0; }

    double leaf_value(std::span<const std::size_t> rows) const {
        if (p_.criterion == Criterion::SquaredError) {
            double num = 0.0, den = 0.0;
            for (auto i : rows) {
                num += t_.target[i];
                den += t_.aux[i];
            }
            return num / std::max(den, 1e-12);
        }
        double pos = 0.0, total = 0.0;
        for (auto i : rows) {
            pos += t_.aux[i] * t_.target[i];
            total += t_.aux[i];
        }
        const double frac = total > 0.0 ? pos / total : 0.5;
        return frac > 0.5 ? 1.0 : (frac < 0.5 ? 0.0 : 0.5);
    }

    bool pure(std::span<const std::size_t> rows) const {
        if (p_.criterion != Criterion::Gini) return false;
        for (auto i : rows) {
            if (t_.target[i] != t_.target[rows.front()]) return false;
        }
        return true;
    }

    // Score to maximize; parent score is subtracted by the caller.
    double side_score(double w, double s, double s1) const {
        if (w <= 0.0) return 0.0;
        if (p_.criterion == Criterion::SquaredError) return s * s / w;
        const double s0 = w - s1;
        return (s1 * s1 + s0 * s0) / w;
    }

    std::int32_t grow(Tree& tree, std::vector<std::size_t>& rows, int depth) {
        const auto id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        tree.nodes.back().value = leaf_value(rows);
        if (depth >= p_.max_depth || rows.size() < static_cast<std::size_t>(p_.min_samples_split) || pure(rows))
            return id;

        double total_w = 0.0, total_s = 0.0, total_s1 = 0.0;
        for (auto i : rows) {
            const double w = weight(i);
            total_w += w;
            total_s += w * t_.target[i];
            total_s1 += w * t_.target[i];
        }
        const double parent = side_score(total_w, total_s, total_s1);

        std::vector<std::size_t> features(m_.width);
        std::iota(features.begin(), features.end(), std::size_t{0});
        if (p_.features_per_split > 0 && p_.features_per_split < m_.width && rng_) {
            for (std::size_t k = 0; k < p_.features_per_split; ++k) {
                const auto pick = k + static_cast<std::size_t>(rng_->below(m_.width - k));
                std::swap(features[k], features[pick]);
            }
            features.resize(p_.features_per_split);
        }

        double best_gain = 1e-12;
        std::int32_t best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::size_t> sorted = rows;
        for (auto f : features) {
            std::stable_sort(sorted.begin(), sorted.end(),
                             [&](std::size_t a, std::size_t b) { return m_.at(a, f) < m_.at(b, f); });
            double lw = 0.0, ls = 0.0, ls1 = 0.0;
            std::size_t lcount = 0;
            for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
                const auto i = sorted[k];
                const double w = weight(i);
                lw += w;
                ls += w * t_.target[i];
                ls1 += w * t_.target[i];
                ++lcount;
                const double v = m_.at(i, f), next = m_.at(sorted[k + 1], f);
                if (!(v < next)) continue;
                if (lcount < static_cast<std::size_t>(p_.min_samples_leaf) ||
                    sorted.size() - lcount < static_cast<std::size_t>(p_.min_samples_leaf))
                    continue;
                const double gain =
                    side_score(lw, ls, ls1) + side_score(total_w - lw, total_s - ls, total_s1 - ls1) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<std::int32_t>(f);
                    double mid = v + (next - v) / 2.0;
                    if (!(mid < next)) mid = v;
                    best_threshold = mid;
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (auto i : rows) {
            (m_.at(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(i);
        }
        rows.clear();
        rows.shrink_to_fit();
        const auto l = grow(tree, left, depth + 1);
        const auto r = grow(tree, right, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    const Matrix& m_;
    const Targets& t_;
    BuildParams p_;
    Rng* rng_;
};

void require_both_classes(const Dataset& data) {
    if (data.empty()) throw Error(ErrorKind::EmptyInput, "empty training set");
    const auto pos = data.positives();
    if (pos == 0 || pos == data.rows()) throw Error(ErrorKind::DegenerateLabels, "training data has a single class");
}

double log_loss(double y, double score) {
    // log(1 + exp(-s)) for y=1, log(1 + exp(s)) for y=0, stably.
    const double z = y > 0.5 ? -score : score;
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

double GbmModel::raw_score(std::span<const double> x, std::size_t rounds) const {
    double s = base_score;
    const std::size_t n = std::min(rounds, trees.size());
    for (std::size_t t = 0; t < n; ++t) s += learning_rate * trees[t].predict(x);
    return s;
}

GbmModel train_gbm(const GbmConfig& cfg, const Dataset& data) {
    require_both_classes(data);
    if (cfg.rounds < 0 || cfg.max_depth < 1 || cfg.learning_rate <= 0.0 || cfg.min_samples_leaf < 1)
        throw Error(ErrorKind::Config, "invalid GBM configuration");
    const Matrix m = canonical_matrix(data);
    const double rate = static_cast<double>(data.positives()) / static_cast<double>(m.n);
    GbmModel model;
    model.base_score = std::log(rate / (1.0 - rate));
    model.learning_rate = cfg.learning_rate;

    std::vector<double> score(m.n, model.base_score);
    Targets t;
    t.target.resize(m.n);
    t.aux.resize(m.n);
    BuildParams params;
    params.criterion = Criterion::SquaredError;
    params.max_depth = cfg.max_depth;
    params.min_samples_leaf = cfg.min_samples_leaf;
    params.min_samples_split = 2 * cfg.min_samples_leaf;
    std::vector<std::size_t> all(m.n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (int round = 0; round < cfg.rounds; ++round) {
        for (std::size_t i = 0; i < m.n; ++i) {
            const double p = sigmoid(score[i]);
            t.target[i] = static_cast<double>(m.labels[i]) - p;
            t.aux[i] = p * (1.0 - p);
        }
        TreeBuilder builder(m, t, params, nullptr);
        Tree tree = builder.build(all);
        for (std::size_t i = 0; i < m.n; ++i) score[i] += model.learning_rate * tree.predict(m.row(i));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

std::vector<double> gbm_loss_curve(const GbmModel& model, const Dataset& data) {
    std::vector<double> curve;
    std::vector<double> score(data.rows(), model.base_score);
    for (std::size_t r = 0; r <= model.trees.size(); ++r) {
        if (r > 0) {
            for (std::size_t i = 0; i < data.rows(); ++i)
                score[i] += model.learning_rate * model.trees[r - 1].predict(data.row(i));
        }
        double loss = 0.0;
        for (std::size_t i = 0; i < data.rows(); ++i) loss += log_loss(data.label(i), score[i]);
        curve.push_back(loss / static_cast<double>(data.rows()));
    }
    return curve;
}

ForestModel train_forest(const ForestConfig& cfg, std::uint64_t seed, int threads, const Dataset& data) {
    require_both_classes(data);
    if (cfg.trees < 1 || cfg.max_depth < 1 || cfg.min_samples_split < 2 || cfg.max_features < 0)
        throw Error(ErrorKind::Config, "invalid random forest configuration");
    const Matrix m = canonical_matrix(data);
    BuildParams params;
    params.criterion = Criterion::Gini;
    params.max_depth = cfg.max_depth;
    params.min_samples_split = cfg.min_samples_split;
    params.features_per_split =
        cfg.max_features > 0 ? static_cast<std::size_t>(cfg.max_features)
                             : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(m.width))));

    ForestModel forest;
    forest.trees.resize(static_cast<std::size_t>(cfg.trees));
    parallel_for(forest.trees.size(), threads, [&](std::size_t t) {
        Rng rng(derive_seed(seed, t, 0x7265657274ull));
        Targets targets;
        targets.target.resize(m.n);
        targets.aux.assign(m.n, 0.0);
        for (std::size_t i = 0; i < m.n; ++i) targets.target[i] = m.labels[i];
        for (std::size_t k = 0; k < m.n; ++k) targets.aux[static_cast<std::size_t>(rng.below(m.n))] += 1.0;
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < m.n; ++i) {
            if (targets.aux[i] > 0.0) rows.push_back(i);
        }
        TreeBuilder builder(m, targets, params, &rng);
        forest.trees[t] = builder.build(std::move(rows));
    });
    return forest;
}

}  // namespace bdf::ml
