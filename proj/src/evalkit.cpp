#include "bdf/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "bdf/error.hpp"

namespace bdf::eval {

double f1_score(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) throw Error(ErrorKind::Shape, "predictions and labels differ in length");
    if (labels.empty()) throw Error(ErrorKind::EmptyInput, "nothing to score");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool p = predictions[i] != 0, l = labels[i] != 0;
        tp += p && l;
        fp += p && !l;
        fn += !p && l;
    }
    if (tp + fp + fn == 0) throw Error(ErrorKind::DegenerateScore, "F1 undefined without positives");
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

std::string CvReport::summary() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.4f \xC2\xB1 %.4f (mean \xC2\xB1 population std over %zu folds)", mean, std,
                  folds.size());
    return buf;
}

std::string CvReport::table() const {
    std::ostringstream os;
    os << "group,train_rows,test_rows,score\n";
    char buf[64];
    for (const auto& f : folds) {
        std::snprintf(buf, sizeof buf, "%.6f", f.score);
        os << f.group << ',' << f.train_rows << ',' << f.test_rows << ',' << buf << '\n';
    }
    return os.str();
}

CvReport grouped_loo_cv(std::span<const int> labels, std::span<const std::string> groups, const FoldFn& fold,
                        const Scorer& scorer, int threads) {
    if (labels.size() != groups.size()) throw Error(ErrorKind::Shape, "labels and groups differ in length");
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
    if (members.size() < 2) throw Error(ErrorKind::Fold, "grouped cross-validation needs at least two groups");

    struct Split {
        std::string group;
        std::vector<std::size_t> train, test;
    };
    std::vector<Split> splits;
    for (const auto& [g, rows] : members) {
        Split s{g, {}, rows};
        std::size_t pos = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (groups[i] != g) {
                s.train.push_back(i);
                pos += labels[i] != 0;
            }
        }
        if (pos == 0 || pos == s.train.size())
            throw Error(ErrorKind::Fold, "training split without group '" + g + "' has a single class");
        splits.push_back(std::move(s));
    }

    CvReport report;
    report.folds.resize(splits.size());
    parallel_for(splits.size(), threads, [&](std::size_t k) {
        const auto& s = splits[k];
        const auto pred = fold(s.train, s.test);
        if (pred.size() != s.test.size()) throw Error(ErrorKind::Shape, "fold returned wrong prediction count");
        std::vector<int> truth;
        for (auto i : s.test) truth.push_back(labels[i]);
        double score = 0.0;
        try {
            score = scorer(pred, truth);
        } catch (const Error& e) {
            throw Error(e.kind(), "fold '" + s.group + "': " + e.what());
        }
        report.folds[k] = FoldResult{s.group, score, s.train.size(), s.test.size()};
    });

    double sum = 0.0;
    for (const auto& f : report.folds) sum += f.score;
    report.mean = sum / static_cast<double>(report.folds.size());
    double ss = 0.0;
    for (const auto& f : report.folds) ss += (f.score - report.mean) * (f.score - report.mean);
    report.std = std::sqrt(ss / static_cast<double>(report.folds.size()));
    return report;
}

CvReport grouped_loo_cv(const ml::Dataset& data, const Trainer& trainer, const Scorer& scorer, int threads) {
    FoldFn fold = [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
        const auto predict = trainer(data.subset(train));
        std::vector<int> out;
        out.reserve(test.size());
        for (auto i : test) out.push_back(predict(data.row(i)));
        return out;
    };
    return grouped_loo_cv(data.labels(), data.groups(), fold, scorer, threads);
}

Predictor threshold_predictor(ml::Model model, double threshold) {
    return [m = std::move(model), threshold](std::span<const double> x) { return m.predict_proba(x) >= threshold ? 1 : 0; };
}

}  // namespace bdf::eval
