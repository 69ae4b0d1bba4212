#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bdf/util.hpp"

namespace bdf::ml {

inline constexpr int kNative = 0;
inline constexpr int kUpconverted = 1;

/// Fixed-width feature rows with binary labels and a source-group id per row.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::size_t width) : width_(width) {}

    void add(std::span<const double> row, int label, std::string group);

    std::size_t width() const { return width_; }
    std::size_t rows() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values_).subspan(i * width_, width_);
    }
    int label(std::size_t i) const { return labels_[i]; }
    const std::string& group(std::size_t i) const { return groups_[i]; }
    std::span<const int> labels() const { return labels_; }
    std::span<const std::string> groups() const { return groups_; }

    Dataset subset(std::span<const std::size_t> indices) const;
    /// Row order used by every trainer: by label, then features, then group.
    std::vector<std::size_t> canonical_order() const;
    std::size_t positives() const;

private:
    std::size_t width_ = 0;
    std::vector<double> values_;
    std::vector<int> labels_;
    std::vector<std::string> groups_;
};

struct SvmConfig {
    double c = 1.0;
    double gamma = 0.0;  // 0: 1 / (width * variance of standardized features)
    double tolerance = 1e-3;
    int platt_folds = 5;
    std::int64_t max_iterations = 10'000'000;
};

struct GbmConfig {
    int rounds = 200;
    int max_depth = 4;
    double learning_rate = 0.1;
    int min_samples_leaf = 1;
};

struct ForestConfig {
    int trees = 300;
    int max_depth = 12;
    int min_samples_split = 2;
    int max_features = 0;  // 0: floor(sqrt(width)), at least 1
};

struct TrainConfig {
    SvmConfig svm;
    GbmConfig gbm;
    ForestConfig forest;
    std::uint64_t seed = 20240229;
    int threads = 1;
};

std::string to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(std::span<const double> x) const;
};

struct SvmModel {
    std::vector<double> feature_mean;
    std::vector<double> feature_scale;
    std::vector<double> support;  // standardized support vectors, row-major
    std::vector<double> coef;     // y_i * alpha_i
    double rho = 0.0;
    double gamma = 1.0;
    double platt_a = 0.0;
    double platt_b = 0.0;

    double decision(std::span<const double> x) const;
    double probability_from_decision(double f) const;
};

struct GbmModel {
    double base_score = 0.0;  // initial log-odds
    double learning_rate = 0.1;
    std::vector<Tree> trees;

    double raw_score(std::span<const double> x, std::size_t rounds) const;
};

struct ForestModel {
    std::vector<Tree> trees;  // leaf values are votes in {0, 0.5, 1}
};

enum class ModelKind : std::uint8_t { Svm = 1, Gbm = 2, RandomForest = 3, Ensemble = 4 };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

class Model {
public:
    Model() = default;
    static Model svm(SvmModel m, std::size_t width, std::string config = {});
    static Model gbm(GbmModel m, std::size_t width, std::string config = {});
    static Model forest(ForestModel m, std::size_t width, std::string config = {});
    /// Members must share one width.
    static Model ensemble(std::vector<Model> members, std::string config = {});

    ModelKind kind() const { return kind_; }
    std::size_t width() const { return width_; }
    const std::string& config() const { return config_; }

    /// Probability of the upconverted class. Ensembles average their members.
    double predict_proba(std::span<const double> x) const;

    const SvmModel& as_svm() const { return std::get<SvmModel>(impl_); }
    const GbmModel& as_gbm() const { return std::get<GbmModel>(impl_); }
    const ForestModel& as_forest() const { return std::get<ForestModel>(impl_); }
    const std::vector<Model>& members() const { return members_; }

private:
    ModelKind kind_ = ModelKind::Gbm;
    std::size_t width_ = 0;
    std::string config_;
    std::variant<std::monostate, SvmModel, GbmModel, ForestModel> impl_;
    std::vector<Model> members_;
};

/// Trains one classifier kind; `Ensemble` trains an SVM and a GBM. The data
/// is consumed in canonical row order, so row permutations do not matter.
Model train(ModelKind kind, const TrainConfig& config, const Dataset& data);

SvmModel train_svm(const SvmConfig& config, const Dataset& data);
GbmModel train_gbm(const GbmConfig& config, const Dataset& data);
ForestModel train_forest(const ForestConfig& config, std::uint64_t seed, int threads, const Dataset& data);

/// Mean log loss of a GBM on `data` after each boosting round (index 0: prior only).
std::vector<double> gbm_loss_curve(const GbmModel& model, const Dataset& data);

/// Fits P(y=1|f) = 1 / (1 + exp(a f + b)) to decision values (Platt, with
/// the Lin-Lin-Weng Newton iteration). Returns {a, b}.
std::pair<double, double> fit_platt(std::span<const double> decisions, std::span<const int> labels);

std::vector<std::uint8_t> save_model(const Model& model);
Model load_model(std::span<const std::uint8_t> bytes);

/// Model payload without the file envelope, for embedding in other formats.
void write_model_payload(const Model& model, ByteWriter& out);
Model read_model_payload(ByteReader& in);

}  // namespace bdf::ml
