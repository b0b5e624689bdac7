#include "prism/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "prism/checkpoint.hpp"
#include "prism/metrics.hpp"
#include "prism/rng.hpp"

namespace prism::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown(const json& doc, std::initializer_list<std::string_view> known,
                    std::string_view where)
{
    if (!doc.is_object()) {
        throw ConfigError(std::string(where) + ": expected an object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
        }
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    out << text;
}

/// Splits an ordered window list by the train/validation/test fractions.
SplitWindows split_in_order(std::vector<Window> all, SplitFractions f,
                            std::vector<std::string> names)
{
    const auto n = static_cast<double>(all.size());
    const auto train_end = static_cast<std::size_t>(std::floor(f.train * n));
    const auto val_end = static_cast<std::size_t>(std::floor((f.train + f.validation) * n));
    SplitWindows out;
    out.channel_names = std::move(names);
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto& target = i < train_end ? out.train : i < val_end ? out.validation : out.test;
        target.push_back(std::move(all[i]));
    }
    return out;
}

std::vector<Window> windows_if_fit(const SeriesFrame& frame, const PrismConfig& model, Index stride,
                                   IndexRange region)
{
    if (window_count(region.size(), model.input_length, model.horizon, stride) == 0) {
        return {};
    }
    return make_windows(frame, model.input_length, model.horizon, stride, region);
}

void check_window_shapes(const std::vector<Window>& windows, const PrismConfig& model,
                         std::string_view source)
{
    for (const auto& w : windows) {
        if (w.history.rows() != model.input_length || w.future.rows() != model.horizon) {
            throw ConfigError(std::string(source) + ": windows have history/future lengths " +
                              std::to_string(w.history.rows()) + "/" +
                              std::to_string(w.future.rows()) + ", model expects " +
                              std::to_string(model.input_length) + "/" +
                              std::to_string(model.horizon));
        }
    }
}

std::string format_metric(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void print_report(std::ostream& out, const MetricsReport& r)
{
    out << "crps        " << format_metric(r.crps) << '\n'
        << "distortion  " << format_metric(r.distortion) << '\n'
        << "mae         " << format_metric(r.mae) << '\n'
        << "mse         " << format_metric(r.mse) << '\n'
        << "windows     " << r.window_count << '\n';
}

std::string epoch_log_line(const EpochRecord& rec, bool with_time)
{
    ordered_json line;
    line["epoch"] = rec.epoch;
    line["total"] = rec.total;
    line["recon"] = rec.recon;
    line["prob"] = rec.prob;
    line["validation_crps"] = rec.validation_crps ? json(*rec.validation_crps) : json(nullptr);
    if (with_time) {
        line["seconds"] = rec.seconds;
    }
    return line.dump() + "\n";
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CommonFlags {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    bool deterministic = false;
    std::string dataset;
    std::string windows;
    std::string mixture_spec;
};

RunConfig resolve(const CommonFlags& flags)
{
    RunConfig cfg = flags.config.empty() ? RunConfig{} : load_run_config(flags.config);
    if (flags.seed_set) {
        cfg.seed = flags.seed;
    }
    if (!flags.out.empty()) {
        cfg.out_dir = flags.out;
    }
    if (flags.deterministic) {
        cfg.deterministic = true;
    }
    if (!flags.dataset.empty() || !flags.windows.empty() || !flags.mixture_spec.empty()) {
        cfg.dataset = flags.dataset;
        cfg.windows = flags.windows;
        cfg.mixture_spec = flags.mixture_spec;
    }
    cfg.train.seed = cfg.seed;
    if (cfg.deterministic) {
        cfg.train.threads = 1;
    }
    return cfg;
}

int cmd_synth(const std::string& spec_path, const CommonFlags& flags, std::ostream& out)
{
    MixtureSpec spec = load_mixture_spec(spec_path);
    if (flags.seed_set) {
        spec.seed = flags.seed;
    }
    const fs::path dir = flags.out.empty() ? fs::path("synth") : fs::path(flags.out);
    fs::create_directories(dir);

    const MixtureData data = generate_mixture(spec);
    const auto names = default_channel_names(spec.channels());
    write_windows_csv(dir / "windows.csv", data.windows, names);
    write_modes_csv(dir / "modes.csv", data.modes);
    write_file(dir / "spec.json", dump_mixture_spec(spec) + "\n");

    std::vector<Index> counts(static_cast<std::size_t>(spec.modes), 0);
    for (const Index m : data.modes) {
        ++counts[static_cast<std::size_t>(m)];
    }
    out << "instances " << data.windows.size() << '\n';
    for (std::size_t j = 0; j < counts.size(); ++j) {
        out << "mode " << j << ' ' << counts[j] << '\n';
    }
    out << "wrote " << (dir / "windows.csv").string() << '\n';
    return kExitOk;
}

int cmd_train(const CommonFlags& flags, Index epochs_override, std::ostream& out)
{
    RunConfig cfg = resolve(flags);
    if (epochs_override > 0) {
        cfg.train.epochs = epochs_override;
    }
    cfg.model.validate();
    cfg.train.validate();

    const SplitWindows splits = load_split_windows(cfg);
    if (splits.train.empty()) {
        throw ConfigError("train: the training split contains no windows");
    }

    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_file(dir / "resolved_config.json", run_config_to_json(cfg).dump(2) + "\n");

    std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
    if (!log) {
        throw ConfigError("cannot write '" + (dir / "train_log.jsonl").string() + "'");
    }
    TrainHooks hooks;
    hooks.validation = &splits.validation;
    hooks.on_epoch = [&](const EpochRecord& rec, const PrismParams& params) {
        log << epoch_log_line(rec, !cfg.deterministic);
        log.flush();
        if (cfg.train.checkpoint_every > 0 && rec.epoch % cfg.train.checkpoint_every == 0) {
            std::ostringstream name;
            name << "checkpoint_epoch_" << rec.epoch << ".json";
            save_checkpoint(dir / name.str(), Checkpoint{cfg.model, splits.channel_names, params});
        }
    };

    const TrainResult result = train(splits.train, cfg.model, cfg.train, hooks);
    save_checkpoint(dir / "checkpoint.json",
                    Checkpoint{cfg.model, splits.channel_names, result.params});

    const auto& last = result.history.epochs.back();
    out << "windows     " << splits.train.size() << '\n'
        << "epochs      " << result.history.epochs.size() << '\n'
        << "final loss  " << format_metric(last.total) << " (recon " << format_metric(last.recon)
        << ", prob " << format_metric(last.prob) << ")\n"
        << "wrote " << (dir / "checkpoint.json").string() << '\n';
    return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path, const std::string& split,
             std::ostream& out)
{
    RunConfig cfg = resolve(flags);
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    cfg.model = ck.config;

    const SplitWindows splits = load_split_windows(cfg);
    const std::vector<Window>* windows = nullptr;
    if (split == "train") {
        windows = &splits.train;
    } else if (split == "validation") {
        windows = &splits.validation;
    } else if (split == "test") {
        windows = &splits.test;
    } else {
        throw ConfigError("eval: unknown split '" + split + "' (train, validation, test)");
    }
    if (windows->empty()) {
        throw ConfigError("eval: split '" + split + "' contains no windows");
    }
    if (windows->front().channels() != ck.channels()) {
        throw ShapeError("eval: checkpoint was trained on " + std::to_string(ck.channels()) +
                         " channels, data has " + std::to_string(windows->front().channels()));
    }

    const MetricsReport report = evaluate(ck.params, ck.config, *windows);
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    const fs::path report_path = dir / ("metrics_" + split + ".json");
    write_file(report_path, metrics_report_json(report));
    print_report(out, report);
    out << "wrote " << report_path.string() << '\n';
    return kExitOk;
}

int cmd_eval_adapter(const CommonFlags& flags, const std::string& samples_path,
                     const std::string& truth_path, std::ostream& out)
{
    const ScenarioTensor samples = load_samples_csv(samples_path);
    const SeriesFrame truth = load_csv(truth_path);
    if (truth.length() != samples.horizon() || truth.channels() != samples.channels()) {
        throw ShapeError("eval: truth is " + detail::shape_str(truth.length(), truth.channels()) +
                         " but samples have horizon x channels " +
                         detail::shape_str(samples.horizon(), samples.channels()));
    }
    const ForecastSet set = uniform_adapter(samples);
    const WindowMetrics m = score_window(set, truth.values);
    MetricsReport report = aggregate({m});

    const fs::path dir(flags.out.empty() ? std::string("run") : flags.out);
    fs::create_directories(dir);
    const fs::path report_path = dir / "metrics_adapter.json";
    write_file(report_path, metrics_report_json(report));
    print_report(out, report);
    out << "wrote " << report_path.string() << '\n';
    return kExitOk;
}

int cmd_forecast(const CommonFlags& flags, const std::string& checkpoint_path,
                 const std::string& history_path, std::ostream& out)
{
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const SeriesFrame history = load_csv(history_path);
    if (history.length() != ck.config.input_length) {
        throw ConfigError("forecast: history has " + std::to_string(history.length()) +
                          " rows, model expects " + std::to_string(ck.config.input_length));
    }
    if (history.channels() != ck.channels()) {
        throw ShapeError("forecast: history has " + std::to_string(history.channels()) +
                         " channels, model expects " + std::to_string(ck.channels()));
    }
    const Scaler scaler = fit_scaler(history.values, ck.config.scaler_kind);
    const ScenarioForecast fc =
        forward(ck.params, ck.config, history.values, scaler, OutputSpace::original);

    const fs::path dir(flags.out.empty() ? std::string("run") : flags.out);
    fs::create_directories(dir);
    const fs::path path = dir / "forecast.csv";
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    write_forecast_csv(file, ForecastSet::from_forecast(fc), history.channel_names);
    out << "scenarios " << fc.scenarios.count() << '\n' << "wrote " << path.string() << '\n';
    return kExitOk;
}

int cmd_flops(const CommonFlags& flags, const std::string& preset_name, Index channels,
              Index batch, Index scenarios, std::ostream& out)
{
    PrismConfig model;
    Index d = channels;
    if (!preset_name.empty()) {
        const auto& all = presets();
        const auto it = std::find_if(all.begin(), all.end(),
                                     [&](const Preset& p) { return p.name == preset_name; });
        if (it == all.end()) {
            throw ConfigError("flops: unknown preset '" + preset_name + "'");
        }
        const Index n = scenarios > 0 ? scenarios : (it->name == "unit" ? 1 : 625);
        model = PrismConfig::with_scenarios(it->horizon, it->horizon, n);
        if (d < 1) {
            d = it->channels;
        }
    } else {
        model = resolve(flags).model;
        if (scenarios > 0) {
            model = PrismConfig::with_scenarios(model.input_length, model.horizon, scenarios);
        }
        if (d < 1) {
            d = 1;
        }
    }
    const FlopsBreakdown f = flops_breakdown(model, d, batch);
    out << "config      L=" << model.input_length << " T=" << model.horizon
        << " M=" << model.trend_count << " K=" << model.season_count << " N=" << model.scenarios
        << " D=" << d << " batch=" << batch << '\n'
        << "trend       " << f.trend << '\n'
        << "season      " << f.season << '\n'
        << "probability " << f.prob << '\n'
        << "total       " << f.total << '\n';
    return kExitOk;
}

} // namespace

// ---------------------------------------------------------------------------
// Run config
// ---------------------------------------------------------------------------

RunConfig parse_run_config(const json& doc)
{
    reject_unknown(doc, {"data", "model", "train", "out_dir", "seed", "deterministic"}, "config");
    RunConfig cfg;
    try {
        if (doc.contains("data")) {
            const auto& data = doc.at("data");
            reject_unknown(data, {"dataset", "windows", "mixture_spec", "stride", "split"},
                           "config.data");
            cfg.dataset = data.value("dataset", cfg.dataset);
            cfg.windows = data.value("windows", cfg.windows);
            cfg.mixture_spec = data.value("mixture_spec", cfg.mixture_spec);
            cfg.stride = data.value("stride", cfg.stride);
            if (data.contains("split")) {
                const auto& split = data.at("split");
                reject_unknown(split, {"train", "validation", "test"}, "config.data.split");
                cfg.split.train = split.value("train", cfg.split.train);
                cfg.split.validation = split.value("validation", cfg.split.validation);
                cfg.split.test = split.value("test", cfg.split.test);
            }
        }
        if (doc.contains("model")) {
            cfg.model = config_from_json(doc.at("model"));
        }
        if (doc.contains("train")) {
            const auto& t = doc.at("train");
            reject_unknown(t, {"epochs", "lr", "batch_size", "shuffle", "checkpoint_every", "threads"},
                           "config.train");
            cfg.train.epochs = t.value("epochs", cfg.train.epochs);
            cfg.train.lr = t.value("lr", cfg.train.lr);
            cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
            cfg.train.shuffle = t.value("shuffle", cfg.train.shuffle);
            cfg.train.checkpoint_every = t.value("checkpoint_every", cfg.train.checkpoint_every);
            cfg.train.threads = t.value("threads", cfg.train.threads);
        }
        cfg.out_dir = doc.value("out_dir", cfg.out_dir);
        cfg.seed = doc.value("seed", cfg.seed);
        cfg.deterministic = doc.value("deterministic", cfg.deterministic);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (cfg.stride < 1) {
        throw ConfigError("config.data.stride must be at least 1");
    }
    cfg.train.seed = cfg.seed;
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path)
{
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return parse_run_config(doc);
}

ordered_json run_config_to_json(const RunConfig& cfg)
{
    ordered_json doc;
    ordered_json data;
    data["dataset"] = cfg.dataset;
    data["windows"] = cfg.windows;
    data["mixture_spec"] = cfg.mixture_spec;
    data["stride"] = cfg.stride;
    data["split"] = {{"train", cfg.split.train},
                     {"validation", cfg.split.validation},
                     {"test", cfg.split.test}};
    doc["data"] = std::move(data);
    doc["model"] = config_to_json(cfg.model);
    ordered_json train;
    train["epochs"] = cfg.train.epochs;
    train["lr"] = cfg.train.lr;
    train["batch_size"] = cfg.train.batch_size;
    train["shuffle"] = cfg.train.shuffle;
    train["checkpoint_every"] = cfg.train.checkpoint_every;
    train["threads"] = cfg.train.threads;
    doc["train"] = std::move(train);
    doc["out_dir"] = cfg.out_dir;
    doc["seed"] = cfg.seed;
    doc["deterministic"] = cfg.deterministic;
    return doc;
}

SplitWindows load_split_windows(const RunConfig& cfg)
{
    const int sources = static_cast<int>(!cfg.dataset.empty()) +
                        static_cast<int>(!cfg.windows.empty()) +
                        static_cast<int>(!cfg.mixture_spec.empty());
    if (sources != 1) {
        throw ConfigError("exactly one of data.dataset, data.windows, data.mixture_spec is required");
    }
    const PrismConfig& model = cfg.model;
    if (!cfg.dataset.empty()) {
        const SeriesFrame frame = load_csv(cfg.dataset);
        const SplitRegions regions = split_regions(frame.length(), model.input_length, cfg.split);
        SplitWindows out;
        out.channel_names = frame.channel_names;
        out.train = windows_if_fit(frame, model, cfg.stride, regions.train);
        out.validation = windows_if_fit(frame, model, cfg.stride, regions.validation);
        out.test = windows_if_fit(frame, model, cfg.stride, regions.test);
        return out;
    }
    if (!cfg.windows.empty()) {
        WindowSet set = load_windows_csv(cfg.windows);
        check_window_shapes(set.windows, model, cfg.windows);
        return split_in_order(std::move(set.windows), cfg.split, std::move(set.channel_names));
    }
    const MixtureSpec spec = load_mixture_spec(cfg.mixture_spec);
    MixtureData data = generate_mixture(spec);
    check_window_shapes(data.windows, model, cfg.mixture_spec);
    return split_in_order(std::move(data.windows), cfg.split, default_channel_names(spec.channels()));
}

const std::vector<Preset>& presets()
{
    static const std::vector<Preset> all{
        {"exchange", 30, 8, ScalerKind::mean_std},   {"solar", 24, 137, ScalerKind::mean},
        {"electricity", 24, 370, ScalerKind::mean}, {"traffic", 24, 963, ScalerKind::mean},
        {"wikipedia", 30, 2000, ScalerKind::mean},  {"unit", 1, 1, ScalerKind::mean},
    };
    return all;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Probabilistic scenario forecasting: train, evaluate and forecast with a "
                 "three-layer linear scenario model"};
    app.require_subcommand(1);

    CommonFlags flags;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "Run config (JSON)");
        sub->add_option_function<std::uint64_t>(
            "--seed",
            [&](const std::uint64_t& s) {
                flags.seed = s;
                flags.seed_set = true;
            },
            "Top-level seed");
        sub->add_option("--out", flags.out, "Output directory");
        sub->add_flag("--deterministic", flags.deterministic, "Single-threaded reductions");
    };
    const auto add_data = [&](CLI::App* sub) {
        sub->add_option("--dataset", flags.dataset, "Wide series CSV");
        sub->add_option("--windows", flags.windows, "Window CSV written by synth");
        sub->add_option("--mixture-spec", flags.mixture_spec, "Mixture spec JSON");
    };

    std::string spec_path;
    auto* synth = app.add_subcommand("synth", "Generate a seeded multimodal window dataset");
    add_common(synth);
    synth->add_option("--spec", spec_path, "Mixture spec JSON")->required();

    Index epochs_override = 0;
    auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    add_common(train_cmd);
    add_data(train_cmd);
    train_cmd->add_option("--epochs", epochs_override, "Override train.epochs");

    std::string checkpoint_path;
    std::string split = "test";
    bool adapter = false;
    std::string samples_path;
    std::string truth_path;
    auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint or an external sample set");
    add_common(eval_cmd);
    add_data(eval_cmd);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file");
    eval_cmd->add_option("--split", split, "train, validation or test")->capture_default_str();
    eval_cmd->add_flag("--adapter", adapter, "Score external samples with uniform probabilities");
    eval_cmd->add_option("--samples", samples_path, "Sample CSV (sample,step,<channels>)");
    eval_cmd->add_option("--truth", truth_path, "Ground-truth wide CSV [T x D]");

    std::string history_path;
    auto* forecast_cmd = app.add_subcommand("forecast", "Export scenarios for one history");
    add_common(forecast_cmd);
    forecast_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    forecast_cmd->add_option("--history", history_path, "History wide CSV [L x D]")->required();

    std::string preset;
    Index channels = 0;
    Index batch = 1;
    Index scenarios = 0;
    auto* flops_cmd = app.add_subcommand("flops", "Count inference multiply-accumulates");
    add_common(flops_cmd);
    flops_cmd->add_option("--preset", preset,
                          "exchange, solar, electricity, traffic, wikipedia or unit");
    flops_cmd->add_option("--channels", channels, "Channel count D");
    flops_cmd->add_option("--batch", batch, "Batch size")->capture_default_str();
    flops_cmd->add_option("--scenarios", scenarios, "Override N");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(spec_path, flags, out);
        }
        if (train_cmd->parsed()) {
            return cmd_train(flags, epochs_override, out);
        }
        if (eval_cmd->parsed()) {
            if (adapter) {
                if (samples_path.empty() || truth_path.empty()) {
                    throw ConfigError("eval --adapter requires --samples and --truth");
                }
                return cmd_eval_adapter(flags, samples_path, truth_path, out);
            }
            if (checkpoint_path.empty()) {
                throw ConfigError("eval requires --checkpoint (or --adapter)");
            }
            return cmd_eval(flags, checkpoint_path, split, out);
        }
        if (forecast_cmd->parsed()) {
            return cmd_forecast(flags, checkpoint_path, history_path, out);
        }
        if (flops_cmd->parsed()) {
            return cmd_flops(flags, preset, channels, batch, scenarios, out);
        }
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace prism::cli
