/********************************************************************************
* Copyright 2026 The DFPN Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*    http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
********************************************************************************/

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dfpn/benchmark.hpp"
#include "dfpn/checkpoint.hpp"
#include "dfpn/eval.hpp"
#include "dfpn/image_io.hpp"
#include "dfpn/manifest.hpp"

namespace dfpn::cli {

namespace fs = std::filesystem;

const std::vector<OptionSpec>& option_specs() {
    static const std::vector<OptionSpec> specs{
        {"config", "", "key = value file; flags override it"},
        {"manifest", "", "model manifest file (default: built-in, or manifest.txt next to the checkpoint)"},
        {"data", "", "dataset directory with images/ and annotations/ (default: synthetic)"},
        {"synthetic-count", "200", "number of synthetic images"},
        {"synthetic-first", "0", "index of the first synthetic image"},
        {"synthetic-seed", "7", "synthetic dataset seed"},
        {"synthetic-classes", "disc,square", "comma-separated shapes: disc, square, triangle"},
        {"synthetic-image-size", "64", "synthetic image side in pixels"},
        {"synthetic-min-objects", "1", "fewest objects per synthetic image"},
        {"synthetic-max-objects", "2", "most objects per synthetic image"},
        {"synthetic-min-size", "24", "smallest synthetic object side in pixels"},
        {"synthetic-max-size", "36", "largest synthetic object side in pixels"},
        {"seed", "1", "model initialisation and training seed"},
        {"epochs", "30", "total training epochs (including resumed ones)"},
        {"lr", "0.02", "SGD learning rate"},
        {"max-grad-norm", "8", "clip the global gradient norm to this; 0 disables"},
        {"flip", "0.5", "horizontal flip probability during training"},
        {"alpha", "0.25", "focal loss alpha"},
        {"gamma", "2", "focal loss gamma"},
        {"score-threshold", "0.05", "minimum detection score"},
        {"nms-iou", "0.5", "NMS overlap threshold"},
        {"topk", "1000", "candidates kept per pyramid level before NMS"},
        {"max-det", "100", "detections kept per image"},
        {"checkpoint", "", "model checkpoint for eval, infer and bench"},
        {"resume", "", "training checkpoint to resume from"},
        {"detections", "", "eval: score this JSON-lines dump instead of running the model"},
        {"anchors-csv", "", "infer: also write the anchor table for the first image"},
        {"warmup", "2", "bench: untimed frames"},
        {"frames", "10", "bench: timed frames"},
        {"out", "out", "output directory"},
    };
    return specs;
}

std::string to_string(Source source) {
    switch (source) {
        case Source::Default: return "default";
        case Source::File: return "file";
        case Source::Flag: return "flag";
    }
    return "?";
}

namespace {

std::string normalise_key(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

const std::string& lookup(const Settings& settings, const std::string& key) {
    for (const auto& [k, s] : settings)
        if (k == key) return s.value;
    throw std::logic_error("no setting named " + key);
}

double parse_double(const Settings& settings, const std::string& key) {
    const auto& text = lookup(settings, key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw std::invalid_argument("invalid number '" + text + "' for " + key);
    }
    return v;
}

std::uint64_t parse_unsigned(const Settings& settings, const std::string& key) {
    const auto& text = lookup(settings, key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw std::invalid_argument("invalid non-negative integer '" + text + "' for " + key);
    }
    return v;
}

fs::path existing_path(const Settings& settings, const std::string& key) {
    const fs::path p = lookup(settings, key);
    if (!p.empty() && !fs::exists(p)) throw std::invalid_argument(key + ": " + p.string() + " does not exist");
    return p;
}

std::vector<ShapeKind> parse_classes(const std::string& text) {
    std::vector<ShapeKind> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (!item.empty()) out.push_back(parse_shape_kind(item));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<Sample> load_samples(const RunConfig& cfg) {
    if (!cfg.data.empty()) return load_visdrone_annotations(cfg.data / "images", cfg.data / "annotations");
    return generate_synthetic(cfg.synthetic, cfg.synthetic_count, cfg.synthetic_first);
}

int data_num_classes(const RunConfig& cfg, const std::vector<Sample>& samples) {
    if (cfg.data.empty()) return cfg.synthetic.num_classes();
    int top = 1;
    for (const auto& s : samples)
        for (const auto& a : s.annotations) top = std::max(top, a.class_id);
    return top + 1;
}

ModelManifest resolve_manifest(const RunConfig& cfg, const std::vector<Sample>& samples) {
    if (!cfg.manifest.empty()) return ModelManifest::load(cfg.manifest);
    const fs::path& ckpt = !cfg.checkpoint.empty() ? cfg.checkpoint : cfg.resume;
    if (!ckpt.empty() && fs::exists(ckpt.parent_path() / "manifest.txt")) {
        return ModelManifest::load(ckpt.parent_path() / "manifest.txt");
    }
    ModelManifest m;
    m.head.num_classes = data_num_classes(cfg, samples);
    return m;
}

Checkpoint read_matching_checkpoint(const fs::path& path, const ModelManifest& manifest) {
    Checkpoint ckpt = read_checkpoint(path);
    if (ckpt.tag != manifest.hash()) {
        std::ostringstream os;
        os << "checkpoint " << path.string() << " was written for a different model manifest (hash " << std::hex
           << ckpt.tag << ", expected " << manifest.hash() << "); refusing to run";
        throw CheckpointError(os.str());
    }
    return ckpt;
}

Detector load_detector(const RunConfig& cfg, const ModelManifest& manifest) {
    Detector det(manifest, cfg.seed);
    if (!cfg.checkpoint.empty()) det.load_checkpoint(read_matching_checkpoint(cfg.checkpoint, manifest));
    return det;
}

std::vector<DetectionRecord> run_detector(const Detector& det, const std::vector<Sample>& samples,
                                          const InferenceConfig& config,
                                          std::vector<std::vector<Detection>>* per_image = nullptr) {
    std::vector<DetectionRecord> records;
    for (const auto& s : samples) {
        auto dets = detect(s.image, det, config);
        for (const auto& d : dets) records.push_back({s.image_id, d.class_id, d.score, d.box});
        if (per_image) per_image->push_back(std::move(dets));
    }
    return records;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

// ---------------------------------------------------------------------------

int cmd_make_data(const RunConfig& cfg, std::ostream& out) {
    const auto samples = generate_synthetic(cfg.synthetic, cfg.synthetic_count, cfg.synthetic_first);
    write_dataset(cfg.out, samples);
    std::size_t objects = 0;
    for (const auto& s : samples) objects += s.annotations.size();
    out << "wrote " << samples.size() << " images with " << objects << " objects to " << cfg.out.string() << '\n';
    return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto samples = load_samples(cfg);
    if (samples.empty()) throw std::invalid_argument("no training images");
    const ModelManifest manifest = resolve_manifest(cfg, samples);
    manifest.save(cfg.out / "manifest.txt");

    Detector det(manifest, cfg.seed);
    Trainer trainer(det, cfg.train);
    if (!cfg.resume.empty()) {
        trainer.resume(read_matching_checkpoint(cfg.resume, manifest));
        out << "resumed from " << cfg.resume.string() << " at epoch " << trainer.completed_epochs() << '\n';
    }

    std::ofstream log(cfg.out / "loss.csv");
    if (!log) throw std::runtime_error("cannot write " + (cfg.out / "loss.csv").string());
    log << loss_csv_header() << '\n';

    fs::path last_good = cfg.resume;
    for (std::size_t epoch = trainer.completed_epochs(); epoch < cfg.train.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::vector<LossRecord> records;
        try {
            records = trainer.run_epoch(samples);
        } catch (const TrainingError& e) {
            err << "error: " << e.what() << "\n";
            err << "training aborted; last good checkpoint: "
                << (last_good.empty() ? std::string("none") : last_good.string()) << '\n';
            return 2;
        }
        double cls = 0.0, reg = 0.0;
        for (const auto& r : records) {
            log << to_csv_row(r) << '\n';
            cls += r.class_loss;
            reg += r.reg_loss;
        }
        log.flush();

        const fs::path ckpt = cfg.out / ("checkpoint_epoch" + std::to_string(epoch + 1) + ".ckpt");
        write_checkpoint(ckpt, trainer.checkpoint());
        last_good = ckpt;
        const double n = static_cast<double>(records.size());
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out << "epoch " << epoch + 1 << '/' << cfg.train.epochs << std::fixed << std::setprecision(5)
            << "  class " << cls / n << "  reg " << reg / n << std::setprecision(1) << "  " << seconds << "s  -> "
            << ckpt.filename().string() << '\n';
        out.unsetf(std::ios::floatfield);
    }
    if (!last_good.empty()) fs::copy_file(last_good, cfg.out / "last.ckpt", fs::copy_options::overwrite_existing);
    out << "loss log: " << (cfg.out / "loss.csv").string() << '\n';
    return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    const auto samples = load_samples(cfg);
    std::vector<DetectionRecord> detections;
    if (!cfg.detections.empty()) {
        detections = read_detection_dump(cfg.detections);
    } else {
        const Detector det = load_detector(cfg, resolve_manifest(cfg, samples));
        detections = run_detector(det, samples, cfg.inference);
        write_detection_dump(cfg.out / "detections.jsonl", detections);
    }
    std::vector<Annotation> gts;
    for (const auto& s : samples) gts.insert(gts.end(), s.annotations.begin(), s.annotations.end());
    const EvalReport report = mean_average_precision(detections, gts);
    write_text(cfg.out / "eval.json", report.to_json() + "\n");
    write_text(cfg.out / "eval.txt", report.to_table());
    out << report.to_table();
    return 0;
}

int cmd_infer(const RunConfig& cfg, std::ostream& out) {
    const auto samples = load_samples(cfg);
    const Detector det = load_detector(cfg, resolve_manifest(cfg, samples));
    std::vector<std::vector<Detection>> per_image;
    const auto records = run_detector(det, samples, cfg.inference, &per_image);
    fs::create_directories(cfg.out / "annotated");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        write_annotated_png(cfg.out / "annotated" / (samples[i].image_id + ".png"), samples[i].image, per_image[i]);
    }
    write_detection_dump(cfg.out / "detections.jsonl", records);
    if (!cfg.anchors_csv.empty() && !samples.empty()) {
        std::ofstream csv(cfg.anchors_csv);
        if (!csv) throw std::runtime_error("cannot write " + cfg.anchors_csv.string());
        write_anchor_csv(csv, det.anchors(samples[0].height(), samples[0].width()), det.anchor_config());
    }
    out << records.size() << " detections on " << samples.size() << " images -> "
        << (cfg.out / "detections.jsonl").string() << '\n';
    return 0;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
    const auto samples = load_samples(cfg);
    if (samples.empty()) throw std::invalid_argument("no images to benchmark");
    const Detector det = load_detector(cfg, resolve_manifest(cfg, samples));
    std::vector<Tensor> images;
    for (const auto& s : samples) images.push_back(s.image);
    const BenchReport r = benchmark_detector(det, images, cfg.warmup, cfg.frames, cfg.inference);
    std::ostringstream json;
    json << std::setprecision(17) << "{\"warmup\": " << r.warmup << ", \"measured\": " << r.measured
         << ", \"seconds\": " << r.seconds << ", \"fps\": " << r.fps << ", \"p50_ms\": " << r.p50_ms
         << ", \"p95_ms\": " << r.p95_ms << "}\n";
    write_text(cfg.out / "bench.json", json.str());
    out << std::fixed << std::setprecision(2) << "fps " << r.fps << "  (" << r.measured << " frames in "
        << std::setprecision(3) << r.seconds << "s, p50 " << r.p50_ms << " ms, p95 " << r.p95_ms << " ms)\n";
    out.unsetf(std::ios::floatfield);
    return 0;
}

}  // namespace

Settings resolve_settings(const std::map<std::string, std::string>& file_values,
                          const std::map<std::string, std::string>& flag_values) {
    Settings settings;
    for (const auto& spec : option_specs()) settings.push_back({spec.key, {spec.default_value, Source::Default}});
    auto apply = [&](const std::map<std::string, std::string>& values, Source source) {
        for (const auto& [raw, value] : values) {
            const std::string key = normalise_key(raw);
            auto it = std::find_if(settings.begin(), settings.end(), [&](const auto& kv) { return kv.first == key; });
            if (it == settings.end()) throw std::invalid_argument("unknown setting '" + raw + "'");
            it->second = {value, source};
        }
    };
    apply(file_values, Source::File);
    apply(flag_values, Source::Flag);
    return settings;
}

RunConfig to_run_config(const std::string& command, const Settings& settings) {
    if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
        throw std::invalid_argument("unknown command '" + command + "'");
    }
    RunConfig cfg;
    cfg.command = command;
    cfg.manifest = existing_path(settings, "manifest");
    cfg.data = existing_path(settings, "data");
    cfg.checkpoint = existing_path(settings, "checkpoint");
    cfg.resume = existing_path(settings, "resume");
    cfg.detections = existing_path(settings, "detections");
    cfg.anchors_csv = lookup(settings, "anchors-csv");
    cfg.out = lookup(settings, "out");
    if (cfg.out.empty()) throw std::invalid_argument("out: output directory must not be empty");
    if (!cfg.data.empty() && !fs::is_directory(cfg.data / "images")) {
        throw std::invalid_argument("data: " + cfg.data.string() + " has no images/ directory");
    }

    cfg.synthetic.seed = parse_unsigned(settings, "synthetic-seed");
    cfg.synthetic.classes = parse_classes(lookup(settings, "synthetic-classes"));
    cfg.synthetic.image_size = parse_unsigned(settings, "synthetic-image-size");
    cfg.synthetic.min_objects = parse_unsigned(settings, "synthetic-min-objects");
    cfg.synthetic.max_objects = parse_unsigned(settings, "synthetic-max-objects");
    cfg.synthetic.min_object_size = parse_unsigned(settings, "synthetic-min-size");
    cfg.synthetic.max_object_size = parse_unsigned(settings, "synthetic-max-size");
    cfg.synthetic.validate();
    cfg.synthetic_count = parse_unsigned(settings, "synthetic-count");
    cfg.synthetic_first = parse_unsigned(settings, "synthetic-first");
    if (cfg.synthetic_count == 0) throw std::invalid_argument("synthetic-count must be at least 1");

    cfg.seed = parse_unsigned(settings, "seed");
    cfg.train.epochs = parse_unsigned(settings, "epochs");
    cfg.train.sgd.learning_rate = parse_double(settings, "lr");
    cfg.train.sgd.seed = cfg.seed;
    cfg.train.max_grad_norm = parse_double(settings, "max-grad-norm");
    cfg.train.flip_probability = parse_double(settings, "flip");
    cfg.train.focal.alpha = parse_double(settings, "alpha");
    cfg.train.focal.gamma = parse_double(settings, "gamma");
    cfg.train.validate();

    cfg.inference.score_threshold = parse_double(settings, "score-threshold");
    cfg.inference.nms_iou = parse_double(settings, "nms-iou");
    cfg.inference.per_level_topk = parse_unsigned(settings, "topk");
    cfg.inference.max_detections = parse_unsigned(settings, "max-det");
    cfg.inference.validate();

    cfg.warmup = parse_unsigned(settings, "warmup");
    cfg.frames = parse_unsigned(settings, "frames");
    if (command == "bench" && cfg.frames == 0) throw std::invalid_argument("frames must be at least 1");

    if ((command == "infer" || (command == "eval" && cfg.detections.empty())) && cfg.checkpoint.empty()) {
        throw std::invalid_argument(command + " needs --checkpoint" +
                                    (command == "eval" ? std::string(" or --detections") : std::string()));
    }
    return cfg;
}

std::string banner(const std::string& command, const Settings& settings) {
    std::size_t width = 0;
    for (const auto& [key, s] : settings) width = std::max(width, key.size());
    std::ostringstream os;
    os << "dfpn " << command << " - resolved configuration\n";
    for (const auto& [key, s] : settings) {
        os << "  " << std::left << std::setw(static_cast<int>(width)) << key << " = "
           << (s.value.empty() ? std::string("(unset)") : s.value) << "  [" << to_string(s.source) << "]\n";
    }
    return os.str();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Deep feature pyramid single-shot detector"};
    app.require_subcommand(1);
    app.fallthrough();
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> flags;
    for (const auto& spec : option_specs()) {
        const std::string help =
            spec.default_value.empty() ? spec.help : spec.help + " [default: " + spec.default_value + "]";
        flags[spec.key] = app.add_option("--" + spec.key, raw[spec.key], help);
    }
    std::vector<CLI::App*> subcommands;
    for (const auto& name : kCommands) subcommands.push_back(app.add_subcommand(name));
    subcommands[0]->description("train on a dataset; writes per-epoch checkpoints and loss.csv");
    subcommands[1]->description("mAP report for a checkpoint or a detection dump");
    subcommands[2]->description("detections as JSON lines plus annotated PNGs");
    subcommands[3]->description("frames per second of the full detector");
    subcommands[4]->description("write a synthetic dataset in the annotation-file layout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }
    const auto chosen = app.get_subcommands();
    const std::string command = chosen.front()->get_name();

    try {
        std::map<std::string, std::string> flag_values;
        for (const auto& [key, opt] : flags)
            if (opt->count() > 0 && key != "config") flag_values[key] = raw[key];
        std::map<std::string, std::string> file_values;
        if (flags["config"]->count() > 0) {
            std::ifstream in(raw["config"]);
            if (!in) throw std::invalid_argument("config: cannot read " + raw["config"]);
            file_values = parse_key_values(in);
            file_values.erase("config");
            flag_values["config"] = raw["config"];
        }
        const Settings settings = resolve_settings(file_values, flag_values);
        const RunConfig cfg = to_run_config(command, settings);
        out << banner(command, settings);
        fs::create_directories(cfg.out);

        if (command == "make-data") return cmd_make_data(cfg, out);
        if (command == "train") return cmd_train(cfg, out, err);
        if (command == "eval") return cmd_eval(cfg, out);
        if (command == "infer") return cmd_infer(cfg, out);
        return cmd_bench(cfg, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace dfpn::cli
