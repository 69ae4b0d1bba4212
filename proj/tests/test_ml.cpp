#include <gtest/gtest.h>

#include <cmath>

#include "bdf/ml.hpp"
#include "test_support.hpp"

using namespace bdf;
using namespace bdf::ml;

namespace {

Dataset blobs(std::uint64_t seed, std::size_t n = 100) {
    Rng rng(seed);
    Dataset d(2);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        const double c = y ? 3.0 : -3.0;
        const double row[2] = {c + rng.normal(), c + rng.normal()};
        d.add(row, y, "g" + std::to_string(i % 5));
    }
    return d;
}

// Two interleaved classes that need a nonlinear boundary.
Dataset rings(std::uint64_t seed, std::size_t n = 160) {
    Rng rng(seed);
    Dataset d(3);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        const double r = (y ? 2.0 : 1.0) + 0.25 * rng.normal();
        const double a = rng.uniform(0.0, 6.283185307179586);
        const double row[3] = {r * std::cos(a), r * std::sin(a), rng.normal()};
        d.add(row, y, "g" + std::to_string(i % 4));
    }
    return d;
}

TrainConfig small_config() {
    TrainConfig c;
    c.gbm.rounds = 50;
    c.forest.trees = 40;
    return c;
}

double accuracy(const Model& m, const Dataset& d) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) ok += (m.predict_proba(d.row(i)) >= 0.5) == (d.label(i) == 1);
    return static_cast<double>(ok) / d.rows();
}

Model constant_gbm(double p, std::size_t width) {
    GbmModel g;
    g.base_score = std::log(p / (1 - p));
    return Model::gbm(g, width);
}

}  // namespace

TEST(Dataset, Validation) {
    Dataset d(2);
    const double ok[2] = {1, 2};
    const double bad[3] = {1, 2, 3};
    EXPECT_BDF_ERROR(d.add(bad, 1, "g"), ErrorKind::Shape);
    EXPECT_BDF_ERROR(d.add(ok, 2, "g"), ErrorKind::Domain);
    EXPECT_BDF_ERROR(d.add(ok, 1, ""), ErrorKind::Domain);
    d.add(ok, 1, "g");
    EXPECT_EQ(d.rows(), 1u);
    EXPECT_EQ(d.positives(), 1u);
}

TEST(Train, SeparableBlobsAreFitPerfectly) {
    const auto d = blobs(1);
    for (auto kind : {ModelKind::Svm, ModelKind::Gbm, ModelKind::RandomForest, ModelKind::Ensemble}) {
        const auto m = train(kind, TrainConfig{}, d);
        EXPECT_EQ(accuracy(m, d), 1.0) << to_string(kind);
        EXPECT_EQ(m.kind(), kind);
        EXPECT_EQ(m.width(), 2u);
        const double deep[2] = {5.0, 5.0};
        EXPECT_GT(m.predict_proba(deep), 0.9) << to_string(kind);
        const double far_neg[2] = {-5.0, -5.0};
        EXPECT_LT(m.predict_proba(far_neg), 0.1) << to_string(kind);
    }
}

TEST(Train, NonlinearBoundary) {
    const auto d = rings(2);
    for (auto kind : {ModelKind::Svm, ModelKind::Gbm, ModelKind::RandomForest})
        EXPECT_GE(accuracy(train(kind, small_config(), d), d), 0.9) << to_string(kind);
}

TEST(Train, Errors) {
    Dataset ones(2);
    const double row[2] = {0, 1};
    ones.add(row, 1, "a");
    ones.add(row, 1, "b");
    for (auto kind : {ModelKind::Svm, ModelKind::Gbm, ModelKind::RandomForest, ModelKind::Ensemble})
        EXPECT_BDF_ERROR(train(kind, TrainConfig{}, ones), ErrorKind::DegenerateLabels);
    EXPECT_BDF_ERROR(train(ModelKind::Gbm, TrainConfig{}, Dataset(2)), ErrorKind::EmptyInput);
    TrainConfig bad;
    bad.forest.max_depth = 0;
    EXPECT_BDF_ERROR(train(ModelKind::RandomForest, bad, blobs(3)), ErrorKind::Config);
}

TEST(Gbm, ZeroRoundsPredictsPrior) {
    Dataset d = blobs(4, 40);
    const double extra[2] = {3, 3};
    for (int i = 0; i < 20; ++i) d.add(extra, 1, "x");
    GbmConfig c;
    c.rounds = 0;
    const auto m = Model::gbm(train_gbm(c, d), 2);
    const double prior = static_cast<double>(d.positives()) / d.rows();
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const double x[2] = {rng.normal() * 5, rng.normal() * 5};
        EXPECT_NEAR(m.predict_proba(x), prior, 1e-12);
    }
}

TEST(Gbm, TrainingLossNeverIncreases) {
    for (std::uint64_t seed : {6, 7, 8}) {
        const auto d = rings(seed);
        const auto m = train_gbm(GbmConfig{}, d);
        const auto curve = gbm_loss_curve(m, d);
        ASSERT_EQ(curve.size(), m.trees.size() + 1);
        for (std::size_t r = 1; r < curve.size(); ++r) ASSERT_LE(curve[r], curve[r - 1] + 1e-12) << "round " << r;
        EXPECT_LT(curve.back(), 0.5 * curve.front());
    }
}

TEST(Svm, PlattSigmoidIsMonotone) {
    const auto s = train_svm(SvmConfig{}, rings(9));
    EXPECT_LT(s.platt_a, 0.0);
    double prev = -1.0;
    for (double f = -20.0; f <= 20.0; f += 0.01) {
        const double p = s.probability_from_decision(f);
        ASSERT_GE(p, prev);
        ASSERT_GE(p, 0.0);
        ASSERT_LE(p, 1.0);
        prev = p;
    }
}

TEST(Svm, FitPlattOnSeparatedDecisions) {
    std::vector<double> f;
    std::vector<int> y;
    Rng rng(10);
    for (int i = 0; i < 200; ++i) {
        y.push_back(i % 2);
        f.push_back((i % 2 ? 1.0 : -1.0) + rng.normal());
    }
    const auto [a, b] = fit_platt(f, y);
    EXPECT_LT(a, 0.0);
    EXPECT_NEAR(b, 0.0, 0.5);
}

TEST(PredictProba, EnsembleAveragesMembers) {
    const auto e = Model::ensemble({constant_gbm(0.2, 3), constant_gbm(0.6, 3)});
    const double x[3] = {1, 2, 3};
    EXPECT_NEAR(e.predict_proba(x), 0.4, 1e-12);
    EXPECT_BDF_ERROR(Model::ensemble({constant_gbm(0.2, 3), constant_gbm(0.6, 4)}), ErrorKind::Shape);
}

TEST(PredictProba, ForestOfPositiveVotes) {
    ForestModel f;
    for (int t = 0; t < 7; ++t) f.trees.push_back(Tree{{TreeNode{-1, 0.0, -1, -1, 1.0}}});
    const auto m = Model::forest(f, 2);
    const double x[2] = {0, 0};
    EXPECT_EQ(m.predict_proba(x), 1.0);
}

TEST(PredictProba, WidthMismatch) {
    const auto m = train(ModelKind::Gbm, small_config(), blobs(11));
    const double x[3] = {0, 0, 0};
    EXPECT_BDF_ERROR(m.predict_proba(x), ErrorKind::Shape);
    EXPECT_BDF_ERROR(m.predict_proba(std::span<const double>(x, 1)), ErrorKind::Shape);
}

TEST(Determinism, SameSeedSameBytes) {
    const auto d = rings(12);
    for (auto kind : {ModelKind::Svm, ModelKind::Gbm, ModelKind::RandomForest, ModelKind::Ensemble}) {
        auto c = small_config();
        const auto a = save_model(train(kind, c, d));
        c.threads = 4;
        const auto b = save_model(train(kind, c, d));
        EXPECT_EQ(a, b) << to_string(kind);
    }
    auto c = small_config();
    const auto f1 = save_model(train(ModelKind::RandomForest, c, d));
    c.seed += 1;
    EXPECT_NE(f1, save_model(train(ModelKind::RandomForest, c, d)));
}

TEST(Determinism, RowPermutationDoesNotMatter) {
    const auto d = rings(13);
    std::vector<std::size_t> order(d.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(14);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    const auto shuffled = d.subset(order);
    for (auto kind : {ModelKind::Svm, ModelKind::Gbm, ModelKind::RandomForest}) {
        const auto a = train(kind, small_config(), d);
        const auto b = train(kind, small_config(), shuffled);
        EXPECT_EQ(save_model(a), save_model(b)) << to_string(kind);
        for (std::size_t i = 0; i < d.rows(); ++i) ASSERT_EQ(a.predict_proba(d.row(i)), b.predict_proba(d.row(i)));
    }
}

TEST(Serialization, RoundTripPredictsBitExactly) {
    const auto d = rings(15);
    Rng rng(16);
    for (auto kind : {ModelKind::Svm, ModelKind::Gbm, ModelKind::RandomForest, ModelKind::Ensemble}) {
        const auto m = train(kind, small_config(), d);
        const auto bytes = save_model(m);
        const auto back = load_model(bytes);
        EXPECT_EQ(back.kind(), m.kind());
        EXPECT_EQ(back.width(), m.width());
        EXPECT_EQ(back.config(), m.config());
        EXPECT_EQ(save_model(back), bytes);
        for (int i = 0; i < 100; ++i) {
            const double x[3] = {rng.normal() * 2, rng.normal() * 2, rng.normal()};
            ASSERT_EQ(m.predict_proba(x), back.predict_proba(x));
        }
    }
}

TEST(Serialization, CorruptionIsFormatError) {
    const auto bytes = save_model(train(ModelKind::Gbm, small_config(), blobs(17)));
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{8}, bytes.size() / 2, bytes.size() - 1}) {
        const std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        EXPECT_BDF_ERROR(load_model(t), ErrorKind::Format);
    }
    auto flipped = bytes;
    flipped.back() ^= 0x01;
    EXPECT_BDF_ERROR(load_model(flipped), ErrorKind::Format);
    auto body = bytes;
    body[body.size() / 2] ^= 0x40;
    EXPECT_BDF_ERROR(load_model(body), ErrorKind::Format);
    auto version = bytes;
    version[4] = 9;
    EXPECT_BDF_ERROR(load_model(version), ErrorKind::Format);
    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_BDF_ERROR(load_model(magic), ErrorKind::Format);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_BDF_ERROR(load_model(trailing), ErrorKind::Format);
}

TEST(Serialization, RandomBytesNeverCrash) {
    Rng rng(18);
    const auto good = save_model(train(ModelKind::RandomForest, small_config(), blobs(19)));
    for (int it = 0; it < 2000; ++it) {
        auto b = good;
        for (int k = 0; k < 4; ++k) b[rng.below(b.size())] = static_cast<std::uint8_t>(rng.below(256));
        try {
            load_model(b);
        } catch (const Error& e) {
            ASSERT_EQ(e.kind(), ErrorKind::Format);
        }
    }
}

TEST(Config, JsonRoundTripAndKinds) {
    TrainConfig c;
    c.svm.c = 2.5;
    c.gbm.rounds = 17;
    c.forest.trees = 9;
    c.seed = 99;
    const auto back = train_config_from_json(to_json(c));
    EXPECT_EQ(back.svm.c, 2.5);
    EXPECT_EQ(back.gbm.rounds, 17);
    EXPECT_EQ(back.forest.trees, 9);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_BDF_ERROR(train_config_from_json("{not json"), ErrorKind::Config);
    EXPECT_EQ(model_kind_from_string("rf"), ModelKind::RandomForest);
    EXPECT_EQ(model_kind_from_string("ensemble"), ModelKind::Ensemble);
    EXPECT_BDF_ERROR(model_kind_from_string("knn"), ErrorKind::Config);
}
