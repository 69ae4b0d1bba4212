#include "cli_app.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "bdf/error.hpp"
#include "bdf/hevc.hpp"
#include "bdf/ingest.hpp"
#include "bdf/pipeline.hpp"
#include "json.hpp"

namespace bdf::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config_path;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;

    RunConfig load() const {
        RunConfig c = config_path.empty() ? RunConfig{} : run_config_from_json(read_text_file(config_path));
        if (threads) c.threads = *threads;
        if (seed) c.seed = *seed;
        c.validate();
        return c;
    }
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("--config", common.config_path, "RunConfig JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--threads", common.threads, "Worker threads, 0 for all cores (default: from config)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", common.seed, "Seed override");
}

std::string fmt(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string echo(const RunConfig& c) { return to_json(c); }

// Clip loaded from a manifest record; sidecars sit next to the Y4M as <stem>.meta.csv.
sim::Clip load_clip(const sim::ManifestRecord& r, const fs::path& base) {
    sim::Clip c;
    const fs::path video = base / r.path;
    c.name = fs::path(r.path).stem().string();
    c.video = read_y4m_file(video.string());
    fs::path meta = video;
    meta.replace_extension(".meta.csv");
    if (fs::exists(meta)) c.meta = read_frame_metadata_file(meta.string());
    c.label = r.label;
    c.group = r.group;
    c.method = r.method;
    c.profile = r.profile;
    return c;
}

std::vector<sim::ManifestRecord> load_manifest(const std::string& path) {
    return sim::read_manifest(read_text_file(path));
}

ml::Dataset stage1_rows(const std::string& manifest, const RunConfig& config) {
    ml::Dataset rows(0);
    bool first = true;
    const auto base = fs::path(manifest).parent_path();
    for (const auto& r : load_manifest(manifest)) {
        const auto clip = load_clip(r, base);
        if (first) {
            rows = ml::Dataset(clip.video.frame(0).plane_count() * kFeaturesPerChannel);
            first = false;
        }
        add_frame_rows(rows, clip, config);
    }
    if (rows.empty()) throw Error(ErrorKind::EmptyInput, "stage-1 manifest yielded no analyzable frames");
    return rows;
}

std::vector<ClipFrames> stage2_clips(const std::string& manifest, const RunConfig& config) {
    std::vector<ClipFrames> clips;
    const auto base = fs::path(manifest).parent_path();
    for (const auto& r : load_manifest(manifest)) {
        const auto clip = load_clip(r, base);
        if (clip.meta.empty()) throw Error(ErrorKind::Shape, "clip '" + r.path + "' has no frame metadata sidecar");
        clips.push_back(clip_frames(clip, config));
    }
    if (clips.empty()) throw Error(ErrorKind::EmptyInput, "stage-2 manifest is empty");
    return clips;
}

std::vector<FrameMeta> metadata_for(const std::string& meta_path, const std::string& stream_path) {
    if (!meta_path.empty()) return read_frame_metadata_file(meta_path);
    if (!stream_path.empty()) {
        return hevc::parse_stream(read_binary_file(stream_path), hevc::Order::Display);
    }
    return {};
}

int cmd_simulate(const Common& common, const sim::CorpusSpec& base, const std::string& out_dir,
                 const std::string& methods, const std::string& profile, std::optional<int> strength, std::ostream& out) {
    const RunConfig config = common.load();
    sim::CorpusSpec spec = base;
    spec.seed = config.seed;
    if (!methods.empty()) {
        std::stringstream ss(methods);
        std::string m;
        while (std::getline(ss, m, ',')) spec.methods.push_back(sim::RefillMethod::parse(m));
    }
    if (!profile.empty() && strength) throw CLI::ValidationError("--profile and --strength are exclusive");
    if (!profile.empty()) spec.profile = sim::CompressionProfile::parse(profile);
    if (strength) spec.profile = sim::CompressionProfile::from_strength(*strength);
    sim::validate(spec);

    const std::string comment = "bdf " + std::string(kVersion) + " " + echo(config);
    fs::create_directories(out_dir);
    std::vector<sim::ManifestRecord> records;
    // Clips are generated one at a time to bound memory.
    for (std::size_t k = 0; k < sim::corpus_size(spec); ++k) {
        const auto clip = sim::make_clip(spec, k);
        const auto rec = sim::write_corpus(std::span(&clip, 1), out_dir, comment);
        records.push_back(rec.front());
    }
    write_text_file((fs::path(out_dir) / "manifest.csv").string(), sim::format_manifest(records, comment));
    out << "wrote " << records.size() << " clips to " << out_dir << "\n";
    return kExitOk;
}

int cmd_extract(const Common& common, const std::string& input, const std::string& dump_cloud, int cloud_frame,
                int cloud_plane, const std::string& out_path, std::ostream& out) {
    const RunConfig config = common.load();
    const auto video = read_y4m_file(input);
    std::ostringstream os;
    os << "# bdf " << kVersion << " " << echo(config) << "\n";
    const std::size_t planes = video.frame(0).plane_count();
    os << "frame,analyzable";
    for (std::size_t c = 0; c < planes; ++c) {
        const auto ch = channel_name(c, planes);
        os << ',' << ch << ".entropy," << ch << ".outliers_of_means," << ch << ".outliers_of_stds";
    }
    for (std::size_t c = 0; c < planes; ++c) {
        const auto ch = channel_name(c, planes);
        os << ',' << ch << ".lsb_mean," << ch << ".lsb_std";
    }
    os << "\n";
    std::vector<std::string> lines(video.size());
    parallel_for(video.size(), config.threads, [&](std::size_t i) {
        std::ostringstream line;
        const auto& f = video.frame(i);
        line << i;
        try {
            const auto v = frame_feature_vector(f, config.features);
            line << ",1";
            for (double x : v) line << ',' << fmt(x);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptyCloud && e.kind() != ErrorKind::DegenerateCloud) throw;
            line << ",0";
            for (std::size_t k = 0; k < planes * kFeaturesPerChannel; ++k) line << ",";
        }
        for (const auto& b : detect::per_frame_basic(f)) line << ',' << fmt(b.lsb_mean) << ',' << fmt(b.lsb_std);
        lines[i] = line.str();
    });
    for (const auto& l : lines) os << l << "\n";
    if (out_path.empty()) out << os.str();
    else write_text_file(out_path, os.str());

    if (!dump_cloud.empty()) {
        if (cloud_frame < 0 || static_cast<std::size_t>(cloud_frame) >= video.size())
            throw Error(ErrorKind::Range, "--cloud-frame out of range");
        if (cloud_plane < 0 || static_cast<std::size_t>(cloud_plane) >= planes)
            throw Error(ErrorKind::Range, "--cloud-plane out of range");
        const auto maps = window_stats(split_bits(video.frame(cloud_frame).plane(cloud_plane)), config.features.radius);
        const auto cloud = build_point_set(maps);
        std::ostringstream cs;
        cs << "# bdf " << kVersion << " " << echo(config) << "\n";
        cs << "x,y\n";
        for (const auto& p : cloud) cs << fmt(p.x, 9) << ',' << fmt(p.y, 9) << "\n";
        write_text_file(dump_cloud, cs.str());
    }
    return kExitOk;
}

int cmd_train(const Common& common, const std::string& stage1, const std::string& stage2, const std::string& out_path,
              bool no_ensemble, std::ostream& out) {
    const RunConfig config = common.load();
    ml::Dataset rows;
    if (!no_ensemble) rows = stage1_rows(stage1, config);
    const auto clips = stage2_clips(stage2, config);
    const auto bundle = train_bundle(rows, clips, config, !no_ensemble);
    write_binary_file(out_path, detect::save_bundle(bundle));
    out << "# bdf " << kVersion << " " << echo(config) << "\n";
    out << "trained bundle " << out_path << " (frame rows " << rows.rows() << ", clips " << clips.size()
        << ", frame ensemble " << (no_ensemble ? "off" : "on") << ")\n";
    return kExitOk;
}

int cmd_detect(const Common& common, const std::string& model, const std::vector<std::string>& inputs,
               const std::string& meta_path, const std::string& stream_path, std::optional<double> threshold,
               bool table, std::ostream& out) {
    const auto bundle = detect::load_bundle(read_binary_file(model));
    RunConfig config = common.load();
    const double thr = threshold ? *threshold : config.threshold;
    if (!(thr >= 0.0 && thr <= 1.0)) throw CLI::ValidationError("--threshold must be in [0, 1]");
    if (inputs.size() > 1 && (!meta_path.empty() || !stream_path.empty()))
        throw CLI::ValidationError("--meta/--stream apply to a single input");
    for (const auto& input : inputs) {
        const auto video = read_y4m_file(input);
        auto meta = metadata_for(meta_path, stream_path);
        if (meta.empty()) {
            fs::path side(input);
            side.replace_extension(".meta.csv");
            if (!fs::exists(side)) throw Error(ErrorKind::Shape, "no frame metadata for '" + input + "'");
            meta = read_frame_metadata_file(side.string());
        }
        auto det = bundle.detector;
        det.threads = config.threads;
        detect::Bundle b = bundle;
        b.detector = det;
        const auto verdict = detect::detect(video, meta, b, thr);
        nlohmann::ordered_json rec;
        rec["input"] = fs::path(input).filename().string();
        rec["probability_upconverted"] = verdict.probability_upconverted;
        rec["threshold"] = verdict.threshold;
        rec["decision"] = verdict.decision ? "upconverted" : "native";
        rec["version"] = kVersion;
        rec["model_config"] = nlohmann::ordered_json::parse(bundle.run_config);
        out << rec.dump() << "\n";
        if (table) {
            out << "feature,value\n";
            for (const auto& [name, value] : verdict.diagnostics) out << name << ',' << fmt(value) << "\n";
        }
    }
    return kExitOk;
}

int cmd_eval(const Common& common, const std::string& stage1, const std::string& stage2, bool no_ensemble,
             bool frame_level, const std::vector<int>& grid_trees, std::ostream& out) {
    const RunConfig config = common.load();
    out << "# bdf " << kVersion << " " << echo(config) << "\n";
    if (frame_level) {
        const auto rows = stage1_rows(stage1, config);
        const auto report = eval::grouped_loo_cv(rows, [&](const ml::Dataset& train) {
            return eval::threshold_predictor(train_frame_ensemble(train, config), config.threshold);
        });
        out << report.table() << "F1 " << report.summary() << "\n";
        return kExitOk;
    }
    ml::Dataset rows;
    if (!no_ensemble) rows = stage1_rows(stage1, config);
    const auto clips = stage2_clips(stage2, config);
    std::vector<int> sizes = grid_trees.empty() ? std::vector<int>{config.classifiers.forest.trees} : grid_trees;
    for (int trees : sizes) {
        RunConfig c = config;
        c.classifiers.forest.trees = trees;
        c.validate();
        const auto report = two_stage_cv(rows, clips, c, !no_ensemble);
        if (sizes.size() > 1) out << "# forest.trees=" << trees << "\n";
        out << report.table() << "F1 " << report.summary() << "\n";
    }
    return kExitOk;
}

int cmd_parse_stream(const Common& common, const std::string& input, const std::string& out_path, bool decode_order,
                     std::ostream& out) {
    const RunConfig config = common.load();
    const auto meta =
        hevc::parse_stream(read_binary_file(input), decode_order ? hevc::Order::Decode : hevc::Order::Display);
    const auto text = format_frame_metadata(meta, "bdf " + std::string(kVersion) + " " + echo(config));
    if (out_path.empty()) out << text;
    else write_text_file(out_path, text);
    return kExitOk;
}

int cmd_bench(const Common& common, int width, int height, int depth, int frames, std::ostream& out) {
    RunConfig config = common.load();
    sim::SceneSpec s;
    s.kind = sim::SceneKind::Texture;
    s.width = width;
    s.height = height;
    s.bit_depth = depth;
    s.frames = frames;
    s.grain = 1.0;
    s.detail = 10.0;
    s.seed = config.seed;
    const auto video = sim::synth_scene(s);
    std::size_t analyzable = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& f : video.frames()) {
        try {
            frame_feature_vector(f, config.features);
            ++analyzable;
        } catch (const Error&) {
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double fps = static_cast<double>(frames) / secs;
    nlohmann::ordered_json rec;
    rec["width"] = width;
    rec["height"] = height;
    rec["bit_depth"] = depth;
    rec["frames"] = frames;
    rec["analyzable"] = analyzable;
    rec["seconds"] = secs;
    rec["fps_single_thread"] = fps;
    rec["version"] = kVersion;
    rec["config"] = nlohmann::ordered_json::parse(echo(config));
    out << rec.dump() << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bit-depth up-conversion detector"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Common common;

    auto* simulate = app.add_subcommand("simulate", "Generate a labeled synthetic corpus");
    add_common(simulate, common);
    sim::CorpusSpec corpus;
    std::string sim_out, sim_methods, sim_profile;
    std::optional<int> sim_strength;
    bool sim_mono = false;
    simulate->add_option("--out", sim_out, "Output directory")->required();
    simulate->add_option("--scenes", corpus.scenes, "Scenes (source groups)")->check(CLI::PositiveNumber);
    simulate->add_option("--natives", corpus.natives_per_scene, "Native clips per scene")->check(CLI::NonNegativeNumber);
    simulate->add_option("--refills", corpus.refills_per_scene, "Refilled clips per scene")->check(CLI::NonNegativeNumber);
    simulate->add_option("--frames", corpus.frames, "Frames per clip")->check(CLI::PositiveNumber);
    simulate->add_option("--width", corpus.width, "Frame width")->check(CLI::PositiveNumber);
    simulate->add_option("--height", corpus.height, "Frame height")->check(CLI::PositiveNumber);
    simulate->add_option("--depth", corpus.bit_depth, "Bit depth")->check(CLI::Range(kMinBitDepth, kMaxBitDepth));
    simulate->add_option("--grain-min", corpus.grain_min, "Minimum sensor grain");
    simulate->add_option("--grain-max", corpus.grain_max, "Maximum sensor grain");
    simulate->add_option("--detail-min", corpus.detail_min, "Minimum detail amplitude");
    simulate->add_option("--detail-max", corpus.detail_max, "Maximum detail amplitude");
    simulate->add_option("--correlation-min", corpus.correlation_min, "Minimum grain correlation radius in pixels (0..5)");
    simulate->add_option("--correlation-max", corpus.correlation_max, "Maximum grain correlation radius in pixels (0..5)");
    simulate->add_option("--methods", sim_methods, "Comma-separated refill methods (default: all five)");
    simulate->add_option("--profile", sim_profile, "Compression profile qI,qP,qB/GOP");
    simulate->add_option("--strength", sim_strength, "Compression sweep strength q")->check(CLI::Range(0, 11));
    simulate->add_flag("--mono", sim_mono, "Luma only");

    auto* extract = app.add_subcommand("extract", "Per-frame feature vectors of a Y4M video");
    add_common(extract, common);
    std::string ex_input, ex_cloud, ex_out;
    int ex_frame = 0, ex_plane = 0;
    extract->add_option("input", ex_input, "Input Y4M")->required()->check(CLI::ExistingFile);
    extract->add_option("--out", ex_out, "Output CSV (default: stdout)");
    extract->add_option("--dump-cloud", ex_cloud, "Write the point cloud of one plane as x,y");
    extract->add_option("--cloud-frame", ex_frame, "Frame for --dump-cloud");
    extract->add_option("--cloud-plane", ex_plane, "Plane for --dump-cloud");

    auto* train = app.add_subcommand("train", "Two-stage training: frame ensemble, then video forest");
    add_common(train, common);
    std::string tr_stage1, tr_stage2, tr_out;
    bool tr_no_ens = false;
    train->add_option("--frames-manifest", tr_stage1, "Manifest of uncompressed clips (stage 1)");
    train->add_option("--videos-manifest", tr_stage2, "Manifest of compressed clips with sidecars (stage 2)")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--out", tr_out, "Output model bundle")->required();
    train->add_flag("--no-frame-ensemble", tr_no_ens, "Train the forest without frame-level probabilities");

    auto* detect = app.add_subcommand("detect", "Verdict per input video");
    add_common(detect, common);
    std::string de_model, de_meta, de_stream;
    std::vector<std::string> de_inputs;
    std::optional<double> de_threshold;
    bool de_table = false;
    detect->add_option("--model", de_model, "Model bundle")->required()->check(CLI::ExistingFile);
    detect->add_option("inputs", de_inputs, "Input Y4M files")->required()->check(CLI::ExistingFile);
    detect->add_option("--meta", de_meta, "Frame metadata sidecar")->check(CLI::ExistingFile);
    detect->add_option("--stream", de_stream, "Annex-B HEVC stream for frame metadata")->check(CLI::ExistingFile);
    detect->add_option("--threshold", de_threshold, "Decision threshold");
    detect->add_flag("--table", de_table, "Print the per-feature diagnostic table");

    auto* evaluate = app.add_subcommand("eval", "Grouped leave-one-source-out cross-validation");
    add_common(evaluate, common);
    std::string ev_stage1, ev_stage2;
    bool ev_no_ens = false, ev_frame = false;
    std::vector<int> ev_grid;
    evaluate->add_option("--frames-manifest", ev_stage1, "Manifest of uncompressed clips (stage 1)");
    evaluate->add_option("--videos-manifest", ev_stage2, "Manifest of compressed clips (stage 2)");
    evaluate->add_flag("--no-frame-ensemble", ev_no_ens, "Ablation without frame-level probabilities");
    evaluate->add_flag("--frame-level", ev_frame, "Cross-validate the frame ensemble on the stage-1 manifest");
    evaluate->add_option("--grid-trees", ev_grid, "Forest sizes to compare")->delimiter(',');

    auto* parse = app.add_subcommand("parse-stream", "Annex-B HEVC stream to frame metadata sidecar");
    add_common(parse, common);
    std::string ps_input, ps_out;
    bool ps_decode_order = false;
    parse->add_option("input", ps_input, "Annex-B stream")->required()->check(CLI::ExistingFile);
    parse->add_option("--out", ps_out, "Output sidecar (default: stdout)");
    parse->add_flag("--decode-order", ps_decode_order, "Keep decode order instead of display order");

    auto* bench = app.add_subcommand("bench", "Single-thread feature extraction throughput");
    add_common(bench, common);
    int be_w = 1920, be_h = 1080, be_d = 10, be_frames = 5;
    bench->add_option("--width", be_w, "Frame width")->check(CLI::PositiveNumber);
    bench->add_option("--height", be_h, "Frame height")->check(CLI::PositiveNumber);
    bench->add_option("--depth", be_d, "Bit depth")->check(CLI::Range(kMinBitDepth, kMaxBitDepth));
    bench->add_option("--frames", be_frames, "Frames to time")->check(CLI::PositiveNumber);

    std::vector<std::string> rev(argv.rbegin(), argv.rend());
    if (!rev.empty()) rev.pop_back();
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*simulate) {
            corpus.chroma = !sim_mono;
            return cmd_simulate(common, corpus, sim_out, sim_methods, sim_profile, sim_strength, out);
        }
        if (*extract) return cmd_extract(common, ex_input, ex_cloud, ex_frame, ex_plane, ex_out, out);
        if (*train) {
            if (!tr_no_ens && tr_stage1.empty()) throw CLI::ValidationError("--frames-manifest is required unless --no-frame-ensemble");
            return cmd_train(common, tr_stage1, tr_stage2, tr_out, tr_no_ens, out);
        }
        if (*detect) {
            if (!de_meta.empty() && !de_stream.empty()) throw CLI::ValidationError("--meta and --stream are exclusive");
            return cmd_detect(common, de_model, de_inputs, de_meta, de_stream, de_threshold, de_table, out);
        }
        if (*evaluate) {
            if ((ev_frame || !ev_no_ens) && ev_stage1.empty()) throw CLI::ValidationError("--frames-manifest is required");
            if (!ev_frame && ev_stage2.empty()) throw CLI::ValidationError("--videos-manifest is required");
            return cmd_eval(common, ev_stage1, ev_stage2, ev_no_ens, ev_frame, ev_grid, out);
        }
        if (*parse) return cmd_parse_stream(common, ps_input, ps_out, ps_decode_order, out);
        if (*bench) return cmd_bench(common, be_w, be_h, be_d, be_frames, out);
    } catch (const CLI::ValidationError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Config ? kExitUsage : kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace bdf::cli
