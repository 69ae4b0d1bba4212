#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "bdf/ingest.hpp"
#include "bdf/pipeline.hpp"
#include "cli_app.hpp"
#include "json.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace bdf;
using bdf::cli::run_cli;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "bdf");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("bdf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    // Small uncompressed and compressed corpora plus a trained bundle.
    void simulate_and_train(const std::string& tag, const std::string& threads = "2") {
        const std::vector<std::string> shape{"--scenes", "3", "--natives", "2", "--refills", "2", "--frames", "4",
                                             "--width", "32", "--height", "32", "--methods", "zeros",
                                             "--threads", threads, "--seed", "5"};
        auto a = shape;
        a.insert(a.begin(), {"simulate", "--out", path(tag + "_frames")});
        ASSERT_EQ(run(a).code, 0);
        auto b = shape;
        b.insert(b.begin(), {"simulate", "--out", path(tag + "_videos"), "--strength", "1"});
        ASSERT_EQ(run(b).code, 0);
        const auto r = run({"train", "--frames-manifest", path(tag + "_frames/manifest.csv"), "--videos-manifest",
                            path(tag + "_videos/manifest.csv"), "--out", path(tag + ".bdfm"), "--threads", threads,
                            "--seed", "5"});
        ASSERT_EQ(r.code, 0) << r.err;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, ParseStreamMicroStream) {
    write_binary_file(path("ipb.hevc"), bdf::testing::hevc_build::ipb_stream());
    const auto decode = run({"parse-stream", path("ipb.hevc"), "--decode-order"});
    ASSERT_EQ(decode.code, 0) << decode.err;
    const auto meta = read_frame_metadata(decode.out);
    ASSERT_EQ(meta.size(), 3u);
    EXPECT_EQ(meta[0].frame_type, FrameType::I);
    EXPECT_EQ(meta[1].frame_type, FrameType::P);
    EXPECT_EQ(meta[2].frame_type, FrameType::B);

    const auto display = run({"parse-stream", path("ipb.hevc"), "--out", path("ipb.meta.csv")});
    ASSERT_EQ(display.code, 0) << display.err;
    const auto shown = read_frame_metadata_file(path("ipb.meta.csv"));
    ASSERT_EQ(shown.size(), 3u);
    EXPECT_EQ(shown[1].frame_type, FrameType::B);
    EXPECT_EQ(shown[2].frame_type, FrameType::P);
    EXPECT_EQ(shown[1].compressed_size, meta[2].compressed_size);
    EXPECT_NE(read_text_file(path("ipb.meta.csv")).find("# bdf "), std::string::npos);
}

TEST_F(CliTest, ParseStreamRejectsGarbage) {
    write_binary_file(path("junk.hevc"), std::vector<std::uint8_t>{1, 2, 3, 4, 5});
    const auto r = run({"parse-stream", path("junk.hevc")});
    EXPECT_EQ(r.code, cli::kExitData);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, UsageErrors) {
    EXPECT_EQ(run({}).code, cli::kExitUsage);
    EXPECT_EQ(run({"detect", "--bogus"}).code, cli::kExitUsage);
    const auto no_model = run({"detect", path("missing.y4m")});
    EXPECT_EQ(no_model.code, cli::kExitUsage);
    EXPECT_NE(no_model.err.find("usage error"), std::string::npos);
    EXPECT_EQ(run({"simulate", "--out", path("x"), "--threads", "-1"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"simulate", "--out", path("x"), "--profile", "1,2,3/IBBP", "--strength", "2"}).code,
              cli::kExitUsage);
    EXPECT_EQ(run({"simulate", "--out", path("x"), "--methods", "gaussian_smooth:9"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"train", "--videos-manifest", path("m.csv"), "--out", path("m.bdfm")}).code, cli::kExitUsage);
}

TEST_F(CliTest, HelpAndVersion) {
    const auto v = run({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_EQ(v.out, std::string(kVersion) + "\n");
    const auto h = run({"--help"});
    EXPECT_EQ(h.code, 0);
    EXPECT_NE(h.out.find("parse-stream"), std::string::npos);
}

TEST_F(CliTest, ConfigFileIsAppliedAndEchoed) {
    RunConfig c;
    c.threshold = 0.25;
    c.classifiers.forest.trees = 17;
    write_text_file(path("run.json"), to_json(c));
    write_text_file(path("bad.json"), "{\"threshold\": 3}");
    const auto r = run({"bench", "--config", path("run.json"), "--frames", "2", "--width", "32", "--height", "32"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["frames"], 2);
    EXPECT_DOUBLE_EQ(j["config"]["threshold"].get<double>(), 0.25);
    EXPECT_EQ(j["config"]["classifiers"]["forest"]["trees"], 17);
    EXPECT_EQ(run({"bench", "--config", path("bad.json")}).code, cli::kExitUsage);
}

TEST_F(CliTest, ExtractWritesOneRowPerFrame) {
    sim::SceneSpec s;
    s.width = s.height = 32;
    s.frames = 3;
    write_y4m_file(sim::synth_scene(s), path("clip.y4m"));
    const auto r = run({"extract", path("clip.y4m"), "--dump-cloud", path("cloud.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_TRUE(lines[0].starts_with("# bdf "));
    EXPECT_TRUE(lines[1].starts_with("frame,analyzable,Y.entropy"));
    EXPECT_TRUE(lines[2].starts_with("0,1,"));
    EXPECT_TRUE(fs::exists(path("cloud.csv")));
    EXPECT_EQ(run({"extract", path("clip.y4m"), "--dump-cloud", path("c2.csv"), "--cloud-frame", "9"}).code,
              cli::kExitData);
}

TEST_F(CliTest, SimulateTrainDetectRoundTrip) {
    simulate_and_train("a");
    const auto manifest = sim::read_manifest(read_text_file(path("a_videos/manifest.csv")));
    ASSERT_EQ(manifest.size(), 12u);
    EXPECT_NE(read_text_file(path("a_videos/manifest.csv")).find("\"seed\":5"), std::string::npos);

    std::vector<std::string> args{"detect", "--model", path("a.bdfm")};
    for (const auto& m : manifest) args.push_back(path("a_videos/" + m.path));
    const auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::size_t n = 0, correct = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        const double p = j["probability_upconverted"];
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        EXPECT_EQ(j["decision"], p >= 0.5 ? "upconverted" : "native");
        EXPECT_EQ(j["model_config"]["seed"], 5);
        EXPECT_EQ(j["version"], kVersion);
        correct += (j["decision"] == "upconverted") == (manifest[n].label == 1);
        ++n;
    }
    EXPECT_EQ(n, manifest.size());
    EXPECT_GE(correct, 10u);  // training clips, zeros refill

    const auto one = path("a_videos/" + manifest[0].path);
    auto side = fs::path(one);
    side.replace_extension(".meta.csv");
    const auto with_meta = run({"detect", "--model", path("a.bdfm"), one, "--meta", side.string(), "--table"});
    ASSERT_EQ(with_meta.code, 0) << with_meta.err;
    EXPECT_NE(with_meta.out.find("feature,value"), std::string::npos);
    EXPECT_EQ(run({"detect", "--model", path("a.bdfm"), one, "--threshold", "2"}).code, cli::kExitUsage);

    const auto frames = run({"eval", "--frame-level", "--frames-manifest", path("a_frames/manifest.csv")});
    ASSERT_EQ(frames.code, 0) << frames.err;
    EXPECT_NE(frames.out.find("over 3 folds"), std::string::npos);
}

TEST_F(CliTest, TrainingIsDeterministicAcrossThreadCounts) {
    simulate_and_train("x", "1");
    simulate_and_train("y", "4");
    // The echoed config records the thread count; the trained models must not depend on it.
    auto x = detect::load_bundle(read_binary_file(path("x.bdfm")));
    auto y = detect::load_bundle(read_binary_file(path("y.bdfm")));
    EXPECT_NE(x.run_config, y.run_config);
    x.run_config = y.run_config;
    x.detector.threads = y.detector.threads;
    EXPECT_EQ(detect::save_bundle(x), detect::save_bundle(y));
    EXPECT_EQ(read_text_file(path("x_videos/manifest.csv")).size(), read_text_file(path("y_videos/manifest.csv")).size());
}

TEST_F(CliTest, DetectWithoutMetadataFails) {
    simulate_and_train("m");
    sim::SceneSpec s;
    s.width = s.height = 32;
    s.frames = 4;
    write_y4m_file(sim::synth_scene(s), path("bare.y4m"));
    const auto r = run({"detect", "--model", path("m.bdfm"), path("bare.y4m")});
    EXPECT_EQ(r.code, cli::kExitData);
    EXPECT_NE(r.err.find("metadata"), std::string::npos);
}
