#include "recon/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "recon/dataset.hpp"
#include "recon/detector.hpp"
#include "recon/errors.hpp"
#include "recon/gradcheck_suite.hpp"
#include "recon/io_util.hpp"
#include "recon/model_io.hpp"
#include "recon/pgm.hpp"
#include "recon/synth.hpp"
#include "recon/trainer.hpp"

namespace recon {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;
    std::string experiment; // reproduce target

    std::uint64_t seed = 42;
    int threads = 1;

    std::string out;
    std::string in;
    std::string data;
    std::string model_file;
    std::string labels;
    std::string loss_csv;
    std::string pgm_dir;

    // generator
    std::string gen = "karman"; // karman | droplet
    int sims = 20;
    int steps = 0; // 0 = per-generator default (40 karman, 200 droplet)
    int frame_h = 64;
    int frame_w = 48;
    int side = 32;
    int droplets = 2;
    double droplet_radius = 2.5;
    double droplet_dispersal = 0.004;
    int inject = 0;

    // prepare
    std::string pipeline = "karman2d"; // karman2d | karman3d | droplet
    int select_sims = 0;               // 0 = all
    std::string normalize = "default"; // default | minmax | byte

    // train
    std::string model = "auto"; // auto | karman2d | karman3d | droplet3d
    int epochs = 0;             // 0 = config default (70 Karman, 100 droplet)
    int batch_size = 16;
    double learning_rate = 1e-3;
    int patience = 10;
    int filters = 64;
    int dense_hidden = 256;
    int latent_units = 128;
    int droplet_f1 = 32;
    int droplet_f2 = 64;

    // score / report
    std::string split = "test";
    double threshold = 0; // 0 = scale default (3e-4 normalized, 115 byte)
    int bucket_width = 10;
    bool dumps = true;

    // check-gradients
    double epsilon = 1e-5;
    double tolerance = 1e-4;
};

struct KeyEntry {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
    std::istringstream ss(text);
    T v;
    if (!(ss >> v) || !(ss >> std::ws).eof())
        throw UsageError("invalid value '" + text + "' for key '" + key + "'");
    return v;
}

template <>
std::string parse_value<std::string>(const std::string&, const std::string& text) {
    return text;
}

template <>
bool parse_value<bool>(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true" || text == "on") return true;
    if (text == "0" || text == "false" || text == "off") return false;
    throw UsageError("invalid value '" + text + "' for key '" + key + "' (use true/false)");
}

const std::vector<std::pair<std::string, KeyEntry>>& key_registry() {
    static const auto* registry = [] {
        auto* r = new std::vector<std::pair<std::string, KeyEntry>>;
        auto add = [&](const std::string& name, auto member) {
            using Member = std::decay_t<decltype(std::declval<RunConfig>().*member)>;
            r->push_back({name,
                          {[name, member](RunConfig& c, const std::string& v) {
                               c.*member = parse_value<Member>(name, v);
                           },
                           [member](const RunConfig& c) {
                               if constexpr (std::is_same_v<Member, std::string>) {
                                   return c.*member;
                               } else if constexpr (std::is_same_v<Member, bool>) {
                                   return std::string(c.*member ? "true" : "false");
                               } else if constexpr (std::is_same_v<Member, double>) {
                                   return format_g17(c.*member);
                               } else {
                                   return std::to_string(c.*member);
                               }
                           }}});
        };
        add("command", &RunConfig::command);
        add("experiment", &RunConfig::experiment);
        add("seed", &RunConfig::seed);
        add("threads", &RunConfig::threads);
        add("out", &RunConfig::out);
        add("in", &RunConfig::in);
        add("data", &RunConfig::data);
        add("model_file", &RunConfig::model_file);
        add("labels", &RunConfig::labels);
        add("loss_csv", &RunConfig::loss_csv);
        add("pgm_dir", &RunConfig::pgm_dir);
        add("gen", &RunConfig::gen);
        add("sims", &RunConfig::sims);
        add("steps", &RunConfig::steps);
        add("frame_h", &RunConfig::frame_h);
        add("frame_w", &RunConfig::frame_w);
        add("side", &RunConfig::side);
        add("droplets", &RunConfig::droplets);
        add("droplet_radius", &RunConfig::droplet_radius);
        add("droplet_dispersal", &RunConfig::droplet_dispersal);
        add("inject", &RunConfig::inject);
        add("pipeline", &RunConfig::pipeline);
        add("select_sims", &RunConfig::select_sims);
        add("normalize", &RunConfig::normalize);
        add("model", &RunConfig::model);
        add("epochs", &RunConfig::epochs);
        add("batch_size", &RunConfig::batch_size);
        add("learning_rate", &RunConfig::learning_rate);
        add("patience", &RunConfig::patience);
        add("filters", &RunConfig::filters);
        add("dense_hidden", &RunConfig::dense_hidden);
        add("latent_units", &RunConfig::latent_units);
        add("droplet_f1", &RunConfig::droplet_f1);
        add("droplet_f2", &RunConfig::droplet_f2);
        add("split", &RunConfig::split);
        add("threshold", &RunConfig::threshold);
        add("bucket_width", &RunConfig::bucket_width);
        add("dumps", &RunConfig::dumps);
        add("epsilon", &RunConfig::epsilon);
        add("tolerance", &RunConfig::tolerance);
        return r;
    }();
    return *registry;
}

const KeyEntry& find_key(const std::string& name) {
    for (const auto& [key, entry] : key_registry())
        if (key == name) return entry;
    throw UsageError("unknown configuration key '" + name + "'");
}

/// Line-oriented `key = value` file, '#' comments, UTF-8.
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open config file '" + path + "'");
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config file " + path + ":" + std::to_string(line_no) +
                             ": expected 'key = value'");
        entries.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
    }
    return entries;
}

struct ParsedArgs {
    RunConfig cfg;
    std::set<std::string> set_keys;
    bool help = false;
};

ParsedArgs parse_args(const std::vector<std::string>& args) {
    ParsedArgs parsed;
    std::vector<std::pair<std::string, std::string>> flag_values;
    std::vector<std::string> config_files;
    std::vector<std::string> positionals;

    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--help" || a == "-h" || a == "help") {
            parsed.help = true;
            return parsed;
        }
        if (a.rfind("--", 0) == 0) {
            std::string key = a.substr(2);
            std::string value;
            const auto eq = key.find('=');
            if (eq != std::string::npos) {
                value = key.substr(eq + 1);
                key = key.substr(0, eq);
            } else {
                if (i + 1 >= args.size())
                    throw UsageError("missing value for flag '--" + key + "'");
                value = args[++i];
            }
            std::replace(key.begin(), key.end(), '-', '_');
            if (key == "config")
                config_files.push_back(value);
            else
                flag_values.push_back({key, value});
        } else {
            positionals.push_back(a);
        }
    }

    // Config files first, then flags, so flags override file values.
    for (const auto& path : config_files)
        for (const auto& [key, value] : parse_config_file(path)) {
            find_key(key).set(parsed.cfg, value);
            parsed.set_keys.insert(key);
        }
    for (const auto& [key, value] : flag_values) {
        find_key(key).set(parsed.cfg, value);
        parsed.set_keys.insert(key);
    }

    if (!positionals.empty()) {
        parsed.cfg.command = positionals[0];
        parsed.set_keys.insert("command");
        if (positionals.size() >= 2) {
            if (parsed.cfg.command != "reproduce")
                throw UsageError("unexpected argument '" + positionals[1] + "'");
            parsed.cfg.experiment = positionals[1];
            parsed.set_keys.insert("experiment");
        }
        if (positionals.size() > 2)
            throw UsageError("unexpected argument '" + positionals[2] + "'");
    }

    // Seed default of last resort.
    if (!parsed.set_keys.count("seed")) {
        if (const char* env = std::getenv("TRACE_SEED")) {
            find_key("seed").set(parsed.cfg, env);
            parsed.set_keys.insert("seed");
        }
    }
    return parsed;
}

void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& dir) {
    write_file_atomic(dir / (cfg.command + ".resolved.cfg"), [&](std::ostream& os) {
        os << "# resolved configuration; rerun with: recon --config <this file>\n";
        for (const auto& [key, entry] : key_registry())
            os << key << " = " << entry.get(cfg) << "\n";
    });
}

void usage(std::ostream& os) {
    os << "usage: recon <command> [--key value ...] [--config file]\n"
          "\n"
          "commands:\n"
          "  generate         synthesize a raw dataset (--gen karman|droplet, --out FILE)\n"
          "  prepare          normalize/split a raw dataset (--pipeline karman2d|karman3d|droplet,\n"
          "                   --in FILE, --out FILE)\n"
          "  train            train an autoencoder (--data FILE, --out CKPT)\n"
          "  score            score one split (--model-file CKPT, --data FILE, --out CSV)\n"
          "  report           score, flag, attribute, and dump artifacts (--out DIR)\n"
          "  check-gradients  run the finite-difference gradient harness\n"
          "  reproduce        run a full named experiment: karman-2d, karman-3d,\n"
          "                   droplet, droplet-500 (--out DIR)\n"
          "\n"
          "Flags map 1:1 to config-file keys (`key = value`, '#' comments); flags\n"
          "override file values. `--seed N` defaults to $TRACE_SEED, then 42.\n"
          "Flag names use underscores, e.g. --model_file (dashes are accepted).\n";
}

// -------------------------------------------------------------------------
// Stage helpers shared by the subcommands and `reproduce`.
// -------------------------------------------------------------------------

DatasetManifest raw_manifest_from_frames(std::vector<Frame> frames, std::uint64_t seed) {
    DatasetManifest m;
    m.seed = seed;
    m.norm = {NormMode::BytePassthrough, 0.0, 255.0};
    m.source = "generate:karman";
    for (auto& f : frames) m.samples.push_back({f.sim_id, f.t, f.t, std::move(f.values)});
    m.split.assign(m.samples.size(), Split::None);
    return m;
}

DatasetManifest raw_manifest_from_volumes(std::vector<Volume> volumes, std::uint64_t seed) {
    DatasetManifest m;
    m.seed = seed;
    m.norm = {NormMode::BytePassthrough, 0.0, 255.0};
    m.source = "generate:droplet";
    m.samples = std::move(volumes);
    m.split.assign(m.samples.size(), Split::None);
    return m;
}

std::vector<Frame> frames_from_manifest(const DatasetManifest& m) {
    std::vector<Frame> frames;
    frames.reserve(m.samples.size());
    for (const auto& s : m.samples) {
        if (s.values.shape().rank() != 2)
            throw FormatError("expected rank-2 frames in dataset, got " +
                              s.values.shape().str());
        frames.push_back({s.sim_id, s.t_start, s.values});
    }
    return frames;
}

struct GenerateResult {
    DatasetManifest raw;
    std::vector<AnomalyLabel> labels;
};

GenerateResult generate_karman(const RunConfig& cfg) {
    const int steps = cfg.steps > 0 ? cfg.steps : 40;
    const Shape frame_shape{cfg.frame_h, cfg.frame_w};
    auto params = make_vortex_ensemble(cfg.sims, frame_shape, cfg.seed);
    auto frames = gen_vortex_ensemble(params, steps, frame_shape);

    std::vector<AnomalyLabel> labels;
    if (cfg.inject > 0) {
        Rng rng(mix_seed(cfg.seed, 0x696e6a31ull));
        for (int k = 0; k < cfg.inject; ++k) {
            AnomalyLabel label;
            label.kind = k % 2 == 0 ? AnomalyKind::MagnitudeInversion
                                    : AnomalyKind::TurbulenceBurst;
            label.sim_id = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(cfg.sims)));
            const int t_min = kKarmanDiscardSteps;
            label.t_start = label.t_end =
                t_min + static_cast<std::int32_t>(
                            rng.below(static_cast<std::uint64_t>(steps - t_min)));
            inject_anomaly(frames, label, mix_seed(cfg.seed, 0x696e6a32ull + static_cast<std::uint64_t>(k)));
            labels.push_back(label);
        }
    }
    return {raw_manifest_from_frames(std::move(frames), cfg.seed), std::move(labels)};
}

GenerateResult generate_droplet(const RunConfig& cfg) {
    const int steps = cfg.steps > 0 ? cfg.steps : 200;
    DropletParams params;
    params.n_droplets_initial = cfg.droplets;
    params.initial_radius = cfg.droplet_radius;
    params.dispersal_rate = cfg.droplet_dispersal;
    params.domain_side = cfg.side;
    params.seed = cfg.seed;
    auto volumes = gen_droplet_series(params, steps, cfg.side);

    std::vector<AnomalyLabel> labels;
    if (cfg.inject > 0) {
        Rng rng(mix_seed(cfg.seed, 0x696e6a33ull));
        // Concentrations are planted in the dispersed half of the kept range,
        // where a compact core stands out against the local dynamics.
        const int kept = steps * 3 / 5;
        const int slots = kept - kept / 2;
        std::set<std::int32_t> used;
        for (int k = 0; k < std::min(cfg.inject, slots); ++k) {
            std::int32_t t;
            do {
                t = kept / 2 +
                    static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(slots)));
            } while (used.count(t));
            used.insert(t);
            AnomalyLabel label{AnomalyKind::MassConcentration, 0, t, t};
            inject_anomaly(volumes, label, mix_seed(cfg.seed, 0x696e6a34ull));
            labels.push_back(label);
        }
    }
    return {raw_manifest_from_volumes(std::move(volumes), cfg.seed), std::move(labels)};
}

void dump_pgms(const DatasetManifest& m, const std::filesystem::path& dir) {
    for (const auto& s : m.samples) {
        const auto name = "sim" + std::to_string(s.sim_id) + "_t" + std::to_string(s.t_start) +
                          ".pgm";
        const bool is_volume = s.values.shape().rank() == 3;
        write_pgm(dir / name, is_volume ? central_slice(s.values) : s.values, 0.0,
                  scale_hi(m.norm));
    }
}

int cmd_generate(const RunConfig& cfg) {
    if (cfg.out.empty()) throw UsageError("generate: missing required key 'out'");
    GenerateResult result;
    if (cfg.gen == "karman")
        result = generate_karman(cfg);
    else if (cfg.gen == "droplet")
        result = generate_droplet(cfg);
    else
        throw UsageError("generate: key 'gen' must be karman or droplet, got '" + cfg.gen + "'");

    write_dataset(cfg.out, result.raw);
    const std::string labels_path = cfg.labels.empty() ? cfg.out + ".labels.csv" : cfg.labels;
    write_labels_csv(labels_path, result.labels);
    if (!cfg.pgm_dir.empty()) dump_pgms(result.raw, cfg.pgm_dir);
    write_resolved_config(cfg, std::filesystem::path(cfg.out).parent_path());
    std::cout << "generated " << result.raw.samples.size() << " samples -> " << cfg.out << "\n";
    return 0;
}

DatasetManifest run_prepare(const RunConfig& cfg, const DatasetManifest& raw) {
    DatasetManifest prepared;
    if (cfg.pipeline == "karman2d" || cfg.pipeline == "karman3d") {
        const auto frames = frames_from_manifest(raw);
        std::set<std::int32_t> sims;
        for (const auto& f : frames) sims.insert(f.sim_id);
        const int n_select = cfg.select_sims > 0 ? cfg.select_sims : static_cast<int>(sims.size());
        prepared = prepare_karman(frames, n_select, cfg.seed);
        if (cfg.pipeline == "karman3d") prepared = stack_temporal(prepared);
    } else if (cfg.pipeline == "droplet") {
        prepared = prepare_droplet(raw.samples, cfg.seed);
        if (cfg.normalize == "minmax") apply_minmax(prepared);
    } else {
        throw UsageError("prepare: key 'pipeline' must be karman2d, karman3d or droplet, got '" +
                         cfg.pipeline + "'");
    }
    return prepared;
}

int cmd_prepare(const RunConfig& cfg) {
    if (cfg.in.empty()) throw UsageError("prepare: missing required key 'in'");
    if (cfg.out.empty()) throw UsageError("prepare: missing required key 'out'");
    const DatasetManifest raw = read_dataset(cfg.in);
    const DatasetManifest prepared = run_prepare(cfg, raw);
    write_dataset(cfg.out, prepared);
    write_resolved_config(cfg, std::filesystem::path(cfg.out).parent_path());
    std::cout << "prepared " << prepared.samples.size() << " samples (train "
              << prepared.count_of(Split::Train) << ", val " << prepared.count_of(Split::Val)
              << ", test " << prepared.count_of(Split::Test) << ") -> " << cfg.out << "\n";
    return 0;
}

ConfigId resolve_model_kind(const RunConfig& cfg, const DatasetManifest& data) {
    if (cfg.model == "karman2d") return ConfigId::Karman2D;
    if (cfg.model == "karman3d") return ConfigId::Karman3DStack;
    if (cfg.model == "droplet3d") return ConfigId::Droplet3D;
    if (cfg.model != "auto")
        throw UsageError("key 'model' must be auto, karman2d, karman3d or droplet3d, got '" +
                         cfg.model + "'");
    if (data.samples.empty()) throw EmptySplit("train: dataset is empty");
    const Shape& s = data.samples.front().values.shape();
    if (s.rank() == 2) return ConfigId::Karman2D;
    if (s.rank() == 3 && s.extent(0) == 3 && s.extent(1) != 3) return ConfigId::Karman3DStack;
    if (s.rank() == 3) return ConfigId::Droplet3D;
    throw UsageError("cannot infer model kind from sample shape " + s.str() +
                     "; set the 'model' key");
}

AutoencoderModel<float> build_model(const RunConfig& cfg, ConfigId kind,
                                    const DatasetManifest& data) {
    const Shape& input = data.samples.front().values.shape();
    const float hi = static_cast<float>(scale_hi(data.norm));
    switch (kind) {
        case ConfigId::Karman2D:
            return make_karman_2d<float>(input, cfg.filters, cfg.dense_hidden, cfg.latent_units,
                                         0.0f, hi);
        case ConfigId::Karman3DStack:
            return make_karman_3d<float>(input, cfg.filters, cfg.dense_hidden, cfg.latent_units,
                                         0.0f, hi);
        case ConfigId::Droplet3D:
            return make_droplet_3d<float>(input, cfg.droplet_f1, cfg.droplet_f2, 0.0f, hi);
    }
    throw BadParams("unreachable model kind");
}

struct TrainOutputs {
    FitResult fit;
};

TrainOutputs run_train(const RunConfig& cfg, const DatasetManifest& data,
                       const std::filesystem::path& ckpt_path,
                       const std::filesystem::path& loss_path) {
    const ConfigId kind = resolve_model_kind(cfg, data);
    AutoencoderModel<float> model = build_model(cfg, kind, data);
    init_parameters(model, cfg.seed);

    TrainConfig tc;
    tc.epochs = cfg.epochs > 0 ? cfg.epochs : (kind == ConfigId::Droplet3D ? 100 : 70);
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = cfg.seed;
    tc.early_stop_patience = cfg.patience;
    tc.threads = cfg.threads;

    FitResult fit_result = fit(std::move(model), data, tc);
    save_checkpoint(ckpt_path, fit_result.model);
    write_loss_csv(loss_path, fit_result.history);
    std::cout << "trained " << config_id_name(kind) << " for " << fit_result.history.size()
              << " epochs; best validation MSE " << format_g17(fit_result.best_val_mse)
              << " at epoch " << fit_result.best_epoch << "\n";
    return {std::move(fit_result)};
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.data.empty()) throw UsageError("train: missing required key 'data'");
    if (cfg.out.empty()) throw UsageError("train: missing required key 'out'");
    const DatasetManifest data = read_dataset(cfg.data);
    const std::filesystem::path ckpt(cfg.out);
    const std::filesystem::path loss_path =
        cfg.loss_csv.empty() ? std::filesystem::path(cfg.out + ".loss.csv")
                             : std::filesystem::path(cfg.loss_csv);
    run_train(cfg, data, ckpt, loss_path);
    write_resolved_config(cfg, ckpt.parent_path());
    return 0;
}

double resolve_threshold(const RunConfig& cfg, const DatasetManifest& data) {
    if (cfg.threshold > 0) return cfg.threshold;
    return data.norm.mode == NormMode::MinMax ? 3e-4 : 115.0;
}

int cmd_score(const RunConfig& cfg) {
    if (cfg.model_file.empty()) throw UsageError("score: missing required key 'model_file'");
    if (cfg.data.empty()) throw UsageError("score: missing required key 'data'");
    if (cfg.out.empty()) throw UsageError("score: missing required key 'out'");
    const DatasetManifest data = read_dataset(cfg.data);
    const auto model = load_checkpoint<float>(cfg.model_file);
    auto records = score(model, data, split_from_name(cfg.split), cfg.threads);
    const double threshold = resolve_threshold(cfg, data);
    const AnomalyReport report = flag(records, threshold, cfg.bucket_width);
    write_scores_csv(cfg.out, records);
    write_resolved_config(cfg, std::filesystem::path(cfg.out).parent_path());
    std::cout << "scored " << records.size() << " samples; " << report.flagged.size()
              << " above threshold " << format_g17(threshold) << " -> " << cfg.out << "\n";
    return 0;
}

int cmd_report(const RunConfig& cfg) {
    if (cfg.model_file.empty()) throw UsageError("report: missing required key 'model_file'");
    if (cfg.data.empty()) throw UsageError("report: missing required key 'data'");
    if (cfg.out.empty()) throw UsageError("report: missing required key 'out'");
    const DatasetManifest data = read_dataset(cfg.data);
    const auto model = load_checkpoint<float>(cfg.model_file);
    auto records = score(model, data, split_from_name(cfg.split), cfg.threads);
    const double threshold = resolve_threshold(cfg, data);
    const AnomalyReport report = flag(records, threshold, cfg.bucket_width);
    emit_report(records, report, model, data, cfg.out, cfg.dumps);
    write_resolved_config(cfg, cfg.out);
    std::cout << "report: " << report.flagged.size() << " of " << records.size()
              << " samples flagged at threshold " << format_g17(threshold) << " -> " << cfg.out
              << "\n";
    return 0;
}

int cmd_check_gradients(const RunConfig& cfg) {
    const auto cases = run_gradcheck_suite(cfg.epsilon, cfg.tolerance);
    bool all_pass = true;
    for (const auto& c : cases) {
        all_pass = all_pass && c.report.pass;
        std::cout << (c.report.pass ? "[PASS] " : "[FAIL] ") << c.name << "  max rel err "
                  << format_g17(c.report.max_rel_error) << " (tolerance "
                  << format_g17(c.report.tolerance) << ")\n";
    }
    std::cout << (all_pass ? "gradient check passed" : "gradient check FAILED") << "\n";
    return all_pass ? 0 : 1;
}

int cmd_reproduce(RunConfig cfg, const std::set<std::string>& set_keys) {
    if (cfg.out.empty()) throw UsageError("reproduce: missing required key 'out'");
    const std::filesystem::path dir(cfg.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());

    auto defaulted = [&](const std::string& key) { return !set_keys.count(key); };

    GenerateResult generated;
    if (cfg.experiment == "karman-2d" || cfg.experiment == "karman-3d") {
        if (defaulted("inject")) cfg.inject = cfg.experiment == "karman-2d" ? 6 : 0;
        generated = generate_karman(cfg);
        if (cfg.experiment == "karman-3d") {
            // Frozen-motion events aligned to the stacking windows, so each
            // event lands in exactly one depth-3 volume.
            const int steps = cfg.steps > 0 ? cfg.steps : 40;
            const int n_windows = (steps - kKarmanDiscardSteps) / 3;
            Rng rng(mix_seed(cfg.seed, 0x66727a6eull));
            auto frames = frames_from_manifest(generated.raw);
            const int n_events = 2;
            std::set<std::uint64_t> used;
            for (int k = 0; k < n_events; ++k) {
                std::uint64_t pick;
                do {
                    pick = rng.below(static_cast<std::uint64_t>(cfg.sims) *
                                     static_cast<std::uint64_t>(n_windows));
                } while (used.count(pick));
                used.insert(pick);
                AnomalyLabel label;
                label.kind = AnomalyKind::FrozenMotion;
                label.sim_id = static_cast<std::int32_t>(pick / static_cast<std::uint64_t>(n_windows));
                label.t_start = kKarmanDiscardSteps +
                                3 * static_cast<std::int32_t>(pick % static_cast<std::uint64_t>(n_windows));
                label.t_end = label.t_start + 2;
                inject_anomaly(frames, label, mix_seed(cfg.seed, 0x66727a31ull));
                generated.labels.push_back(label);
            }
            generated.raw = raw_manifest_from_frames(std::move(frames), cfg.seed);
        }
        cfg.pipeline = cfg.experiment == "karman-2d" ? "karman2d" : "karman3d";
        cfg.model = cfg.experiment == "karman-2d" ? "karman2d" : "karman3d";
    } else if (cfg.experiment == "droplet" || cfg.experiment == "droplet-500") {
        cfg.gen = "droplet";
        if (defaulted("inject")) cfg.inject = 2;
        if (cfg.experiment == "droplet-500") {
            if (defaulted("epochs")) cfg.epochs = 500;
            if (defaulted("patience")) cfg.patience = 0; // run the full extension
        }
        generated = generate_droplet(cfg);
        cfg.pipeline = "droplet";
        cfg.model = "droplet3d";
    } else {
        throw UsageError("reproduce: experiment must be one of karman-2d, karman-3d, droplet, "
                         "droplet-500; got '" + cfg.experiment + "'");
    }

    write_dataset(dir / "raw.ds", generated.raw);
    write_labels_csv(dir / "labels.csv", generated.labels);

    const DatasetManifest prepared = run_prepare(cfg, generated.raw);
    write_dataset(dir / "prepared.ds", prepared);

    const TrainOutputs trained =
        run_train(cfg, prepared, dir / "model.ckpt", dir / "loss.csv");

    auto records = score(trained.fit.model, prepared, split_from_name(cfg.split), cfg.threads);
    const double threshold = resolve_threshold(cfg, prepared);
    const AnomalyReport report = flag(records, threshold, cfg.bucket_width);
    emit_report(records, report, trained.fit.model, prepared, dir, cfg.dumps);
    write_resolved_config(cfg, dir);
    std::cout << "reproduce " << cfg.experiment << ": " << report.flagged.size() << " of "
              << records.size() << " test samples flagged at threshold "
              << format_g17(threshold) << "; artifacts in " << dir.string() << "\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    try {
        ParsedArgs parsed = parse_args(args);
        if (parsed.help) {
            usage(std::cout);
            return 0;
        }
        const std::string& command = parsed.cfg.command;
        if (command.empty()) {
            usage(std::cerr);
            return 2;
        }
        if (command == "generate") return cmd_generate(parsed.cfg);
        if (command == "prepare") return cmd_prepare(parsed.cfg);
        if (command == "train") return cmd_train(parsed.cfg);
        if (command == "score") return cmd_score(parsed.cfg);
        if (command == "report") return cmd_report(parsed.cfg);
        if (command == "check-gradients") return cmd_check_gradients(parsed.cfg);
        if (command == "reproduce") return cmd_reproduce(parsed.cfg, parsed.set_keys);
        throw UsageError("unknown command '" + command + "'");
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace recon
