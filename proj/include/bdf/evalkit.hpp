#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bdf/ml.hpp"

namespace bdf::eval {

/// 2TP / (2TP + FP + FN).
double f1_score(std::span<const int> predictions, std::span<const int> labels);

struct FoldResult {
    std::string group;  // held-out group
    double score = 0.0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
};

struct CvReport {
    std::vector<FoldResult> folds;  // sorted by group name
    double mean = 0.0;
    double std = 0.0;  // population std over folds

    /// "0.9564 ± 0.0080 (mean ± population std over 9 folds)"
    std::string summary() const;
    /// CSV: group,train_rows,test_rows,score
    std::string table() const;
};

using Scorer = std::function<double(std::span<const int> predictions, std::span<const int> labels)>;

/// Trains on `train` row indices and returns 0/1 predictions for `test`, in order.
using FoldFn = std::function<std::vector<int>(std::span<const std::size_t> train, std::span<const std::size_t> test)>;

/// Leave-one-group-out over row indices. Folds run through parallel_for.
CvReport grouped_loo_cv(std::span<const int> labels, std::span<const std::string> groups, const FoldFn& fold,
                        const Scorer& scorer = f1_score, int threads = 1);

using Predictor = std::function<int(std::span<const double>)>;
using Trainer = std::function<Predictor(const ml::Dataset& train)>;

CvReport grouped_loo_cv(const ml::Dataset& data, const Trainer& trainer, const Scorer& scorer = f1_score,
                        int threads = 1);

/// Thresholded classifier for use as a Trainer result.
Predictor threshold_predictor(ml::Model model, double threshold = 0.5);

}  // namespace bdf::eval
