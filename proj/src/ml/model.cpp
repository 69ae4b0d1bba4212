#include <cmath>

#include "bdf/error.hpp"
#include "bdf/frame.hpp"
#include "bdf/ml.hpp"
#include "json.hpp"

namespace bdf::ml {

namespace {

constexpr std::uint8_t kMagic[4] = {'B', 'D', 'F', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

[[noreturn]] void format_fail(const char* what) { throw Error(ErrorKind::Format, what); }

}  // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Svm: return "svm";
        case ModelKind::Gbm: return "gbm";
        case ModelKind::RandomForest: return "random_forest";
        case ModelKind::Ensemble: return "ensemble";
    }
    return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "svm") return ModelKind::Svm;
    if (name == "gbm") return ModelKind::Gbm;
    if (name == "random_forest" || name == "rf") return ModelKind::RandomForest;
    if (name == "ensemble") return ModelKind::Ensemble;
    throw Error(ErrorKind::Config, "unknown model kind '" + name + "'");
}

std::string to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["svm"] = {{"c", c.svm.c}, {"gamma", c.svm.gamma}, {"tolerance", c.svm.tolerance},
                {"platt_folds", c.svm.platt_folds}, {"max_iterations", c.svm.max_iterations}};
    j["gbm"] = {{"rounds", c.gbm.rounds}, {"max_depth", c.gbm.max_depth}, {"learning_rate", c.gbm.learning_rate},
                {"min_samples_leaf", c.gbm.min_samples_leaf}};
    j["forest"] = {{"trees", c.forest.trees}, {"max_depth", c.forest.max_depth},
                   {"min_samples_split", c.forest.min_samples_split}, {"max_features", c.forest.max_features}};
    j["seed"] = c.seed;
    return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
    TrainConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.contains("svm")) {
            const auto& s = j["svm"];
            c.svm.c = s.value("c", c.svm.c);
            c.svm.gamma = s.value("gamma", c.svm.gamma);
            c.svm.tolerance = s.value("tolerance", c.svm.tolerance);
            c.svm.platt_folds = s.value("platt_folds", c.svm.platt_folds);
            c.svm.max_iterations = s.value("max_iterations", c.svm.max_iterations);
        }
        if (j.contains("gbm")) {
            const auto& g = j["gbm"];
            c.gbm.rounds = g.value("rounds", c.gbm.rounds);
            c.gbm.max_depth = g.value("max_depth", c.gbm.max_depth);
            c.gbm.learning_rate = g.value("learning_rate", c.gbm.learning_rate);
            c.gbm.min_samples_leaf = g.value("min_samples_leaf", c.gbm.min_samples_leaf);
        }
        if (j.contains("forest")) {
            const auto& f = j["forest"];
            c.forest.trees = f.value("trees", c.forest.trees);
            c.forest.max_depth = f.value("max_depth", c.forest.max_depth);
            c.forest.min_samples_split = f.value("min_samples_split", c.forest.min_samples_split);
            c.forest.max_features = f.value("max_features", c.forest.max_features);
        }
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("bad classifier config: ") + e.what());
    }
    return c;
}

Model Model::svm(SvmModel m, std::size_t width, std::string config) {
    Model out;
    out.kind_ = ModelKind::Svm;
    out.width_ = width;
    out.config_ = std::move(config);
    out.impl_ = std::move(m);
    return out;
}

Model Model::gbm(GbmModel m, std::size_t width, std::string config) {
    Model out;
    out.kind_ = ModelKind::Gbm;
    out.width_ = width;
    out.config_ = std::move(config);
    out.impl_ = std::move(m);
    return out;
}

Model Model::forest(ForestModel m, std::size_t width, std::string config) {
    Model out;
    out.kind_ = ModelKind::RandomForest;
    out.width_ = width;
    out.config_ = std::move(config);
    out.impl_ = std::move(m);
    return out;
}

Model Model::ensemble(std::vector<Model> members, std::string config) {
    if (members.empty()) throw Error(ErrorKind::Shape, "ensemble needs at least one member");
    for (const auto& m : members) {
        if (m.width() != members.front().width()) throw Error(ErrorKind::Shape, "ensemble members differ in width");
    }
    Model out;
    out.kind_ = ModelKind::Ensemble;
    out.width_ = members.front().width();
    out.config_ = std::move(config);
    out.members_ = std::move(members);
    return out;
}

double Model::predict_proba(std::span<const double> x) const {
    if (x.size() != width_)
        throw Error(ErrorKind::Shape, "feature width " + std::to_string(x.size()) + " != model width " +
                                          std::to_string(width_));
    switch (kind_) {
        case ModelKind::Svm: {
            const auto& m = as_svm();
            return m.probability_from_decision(m.decision(x));
        }
        case ModelKind::Gbm: {
            const auto& m = as_gbm();
            const double s = m.raw_score(x, m.trees.size());
            return s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
        }
        case ModelKind::RandomForest: {
            const auto& m = as_forest();
            double votes = 0.0;
            for (const auto& t : m.trees) votes += t.predict(x);
            return votes / static_cast<double>(m.trees.size());
        }
        case ModelKind::Ensemble: {
            double sum = 0.0;
            for (const auto& m : members_) sum += m.predict_proba(x);
            return sum / static_cast<double>(members_.size());
        }
    }
    return 0.0;
}

Model train(ModelKind kind, const TrainConfig& config, const Dataset& data) {
    if (data.empty()) throw Error(ErrorKind::EmptyInput, "empty training set");
    const auto pos = data.positives();
    if (pos == 0 || pos == data.rows()) throw Error(ErrorKind::DegenerateLabels, "training data has a single class");
    const std::string echo = to_json(config);
    switch (kind) {
        case ModelKind::Svm: return Model::svm(train_svm(config.svm, data), data.width(), echo);
        case ModelKind::Gbm: return Model::gbm(train_gbm(config.gbm, data), data.width(), echo);
        case ModelKind::RandomForest:
            return Model::forest(train_forest(config.forest, config.seed, config.threads, data), data.width(), echo);
        case ModelKind::Ensemble: {
            std::vector<Model> members;
            members.push_back(Model::svm(train_svm(config.svm, data), data.width(), echo));
            members.push_back(Model::gbm(train_gbm(config.gbm, data), data.width(), echo));
            return Model::ensemble(std::move(members), echo);
        }
    }
    throw Error(ErrorKind::Config, "unknown model kind");
}

namespace {

void write_tree(const Tree& t, ByteWriter& out) {
    out.u32(static_cast<std::uint32_t>(t.nodes.size()));
    for (const auto& n : t.nodes) {
        out.i32(n.feature);
        out.f64(n.threshold);
        out.i32(n.left);
        out.i32(n.right);
        out.f64(n.value);
    }
}

Tree read_tree(ByteReader& in, std::size_t width) {
    Tree t;
    const std::uint32_t count = in.u32();
    if (count == 0 || count > in.remaining() / 28) format_fail("bad tree node count");
    t.nodes.resize(count);
    for (auto& n : t.nodes) {
        n.feature = in.i32();
        n.threshold = in.f64();
        n.left = in.i32();
        n.right = in.i32();
        n.value = in.f64();
    }
    // Children must point forward so prediction terminates.
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const auto& n = t.nodes[i];
        if (n.feature < 0) continue;
        if (static_cast<std::size_t>(n.feature) >= width || n.left <= static_cast<std::int32_t>(i) ||
            n.right <= static_cast<std::int32_t>(i) || static_cast<std::size_t>(n.left) >= count ||
            static_cast<std::size_t>(n.right) >= count)
            format_fail("malformed tree");
    }
    return t;
}

}  // namespace

void write_model_payload(const Model& model, ByteWriter& out) {
    out.u8(static_cast<std::uint8_t>(model.kind()));
    out.u64(model.width());
    out.str(model.config());
    switch (model.kind()) {
        case ModelKind::Svm: {
            const auto& m = model.as_svm();
            out.f64s(m.feature_mean);
            out.f64s(m.feature_scale);
            out.f64s(m.support);
            out.f64s(m.coef);
            out.f64(m.rho);
            out.f64(m.gamma);
            out.f64(m.platt_a);
            out.f64(m.platt_b);
            break;
        }
        case ModelKind::Gbm: {
            const auto& m = model.as_gbm();
            out.f64(m.base_score);
            out.f64(m.learning_rate);
            out.u32(static_cast<std::uint32_t>(m.trees.size()));
            for (const auto& t : m.trees) write_tree(t, out);
            break;
        }
        case ModelKind::RandomForest: {
            const auto& m = model.as_forest();
            out.u32(static_cast<std::uint32_t>(m.trees.size()));
            for (const auto& t : m.trees) write_tree(t, out);
            break;
        }
        case ModelKind::Ensemble: {
            out.u32(static_cast<std::uint32_t>(model.members().size()));
            for (const auto& m : model.members()) write_model_payload(m, out);
            break;
        }
    }
}

namespace {

Model read_payload(ByteReader& in, int depth) {
    if (depth > 4) format_fail("ensemble nesting too deep");
    const auto kind_byte = in.u8();
    if (kind_byte < 1 || kind_byte > 4) format_fail("unknown model kind");
    const auto kind = static_cast<ModelKind>(kind_byte);
    const std::uint64_t width = in.u64();
    if (width == 0 || width > 1'000'000) format_fail("implausible model width");
    std::string config = in.str();
    switch (kind) {
        case ModelKind::Svm: {
            SvmModel m;
            m.feature_mean = in.f64s();
            m.feature_scale = in.f64s();
            m.support = in.f64s();
            m.coef = in.f64s();
            m.rho = in.f64();
            m.gamma = in.f64();
            m.platt_a = in.f64();
            m.platt_b = in.f64();
            if (m.feature_mean.size() != width || m.feature_scale.size() != width ||
                m.support.size() != m.coef.size() * width)
                format_fail("inconsistent SVM parameter sizes");
            return Model::svm(std::move(m), width, std::move(config));
        }
        case ModelKind::Gbm: {
            GbmModel m;
            m.base_score = in.f64();
            m.learning_rate = in.f64();
            const std::uint32_t n = in.u32();
            if (n > in.remaining()) format_fail("bad tree count");
            for (std::uint32_t t = 0; t < n; ++t) m.trees.push_back(read_tree(in, width));
            return Model::gbm(std::move(m), width, std::move(config));
        }
        case ModelKind::RandomForest: {
            ForestModel m;
            const std::uint32_t n = in.u32();
            if (n == 0 || n > in.remaining()) format_fail("bad tree count");
            for (std::uint32_t t = 0; t < n; ++t) m.trees.push_back(read_tree(in, width));
            return Model::forest(std::move(m), width, std::move(config));
        }
        case ModelKind::Ensemble: {
            const std::uint32_t n = in.u32();
            if (n == 0 || n > in.remaining()) format_fail("bad member count");
            std::vector<Model> members;
            for (std::uint32_t k = 0; k < n; ++k) members.push_back(read_payload(in, depth + 1));
            for (const auto& m : members) {
                if (m.width() != width) format_fail("ensemble member width mismatch");
            }
            return Model::ensemble(std::move(members), std::move(config));
        }
    }
    format_fail("unknown model kind");
}

}  // namespace

Model read_model_payload(ByteReader& in) { return read_payload(in, 0); }

std::vector<std::uint8_t> save_model(const Model& model) {
    ByteWriter out;
    out.raw(kMagic);
    out.u32(kFormatVersion);
    write_model_payload(model, out);
    const std::uint64_t sum = fnv1a64(out.bytes());
    out.u64(sum);
    return std::move(out.bytes());
}

Model load_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 + 4 + 8) format_fail("model file truncated");
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) format_fail("not a model file");
    const auto body = bytes.first(bytes.size() - 8);
    ByteReader tail(bytes.last(8), format_fail);
    if (tail.u64() != fnv1a64(body)) format_fail("model checksum mismatch");
    ByteReader in(body, format_fail);
    in.raw(4);
    const std::uint32_t version = in.u32();
    if (version != kFormatVersion) format_fail("unsupported model format version");
    Model m = read_model_payload(in);
    if (in.remaining() != 0) format_fail("trailing bytes after model");
    return m;
}

}  // namespace bdf::ml
