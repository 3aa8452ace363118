// relspec: synthetic data, preprocessing, Dendrite Net training, spectrum
// expansion, LR-vs-DD cross-validation and cross-subject analysis.
//
// Every subcommand reads a flat JSON config (--config), then applies
// --set key=value overrides and the --seed / --out-dir flags, in that order.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "relspec/analysis.hpp"
#include "relspec/io.hpp"
#include "relspec/regression.hpp"
#include "relspec/signal.hpp"
#include "relspec/spectrum.hpp"

namespace fs = std::filesystem;
using Config = nlohmann::ordered_json;
using namespace relspec;

namespace {

const std::vector<std::string> kMuscles = {"FPL", "FDP", "EDC", "EPL", "EIP", "APL"};
const std::vector<std::string> kFingers = {"ThumbFE", "ThumbAA", "Little", "Ring", "Middle", "Index"};

Config dendrite_defaults() {
    return {{"hidden_widths", {8, 8}}, {"residual", Config::array()}, {"learning_rate", 0.05},
            {"epochs", 200},           {"batch_size", 32},            {"init_scale", 0.5},
            {"per_output", true}};
}

Config merged(Config a, const Config& b) {
    for (auto it = b.begin(); it != b.end(); ++it) a[it.key()] = it.value();
    return a;
}

// ---------------------------------------------------------------------------
// Config handling

bool same_kind(const Config& def, const Config& v) {
    if (def.is_number_integer()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (def.is_number()) return v.is_number();
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_string()) return v.is_string();
    if (def.is_array()) return v.is_array();
    return def.type() == v.type();
}

const char* kind_name(const Config& def) {
    if (def.is_number_integer()) return "non-negative integer";
    if (def.is_number()) return "number";
    if (def.is_boolean()) return "boolean";
    if (def.is_string()) return "string";
    if (def.is_array()) return "array";
    return "value";
}

void set_key(Config& cfg, const std::string& key, const Config& value, const std::string& origin) {
    if (!cfg.contains(key)) throw ConfigError(origin + ": unknown config key '" + key + "'");
    if (!same_kind(cfg[key], value))
        throw ConfigError(origin + ": key '" + key + "' expects a " + kind_name(cfg[key]) + ", got " + value.dump());
    cfg[key] = value;
}

Config parse_value(const std::string& text) {
    try {
        return Config::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        return text;  // bare string
    }
}

Config load_config(const Config& defaults, const std::string& path, const std::vector<std::string>& sets,
                   const std::optional<std::uint64_t>& seed, const std::string& out_dir) {
    Config cfg = defaults;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        Config file;
        try {
            file = Config::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(path + ": " + e.what());
        }
        if (!file.is_object()) throw ConfigError(path + ": config must be a JSON object");
        for (auto it = file.begin(); it != file.end(); ++it) set_key(cfg, it.key(), it.value(), path);
    }
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
        set_key(cfg, s.substr(0, eq), parse_value(s.substr(eq + 1)), "--set");
    }
    if (seed) {
        if (!cfg.contains("seed")) throw ConfigError("--seed: this command has no random component");
        cfg["seed"] = *seed;
    }
    if (!out_dir.empty()) cfg["out_dir"] = out_dir;
    return cfg;
}

std::string help_footer(const Config& defaults) {
    std::ostringstream os;
    os << "Config keys (JSON file via --config, or --set key=value):\n";
    for (auto it = defaults.begin(); it != defaults.end(); ++it)
        os << "  " << it.key() << " = " << it.value().dump() << "\n";
    return os.str();
}

template <typename T>
T get(const Config& c, const std::string& key) {
    try {
        return c.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

std::string require_path(const Config& c, const std::string& key) {
    auto p = get<std::string>(c, key);
    if (p.empty()) throw ConfigError("config key '" + key + "' is required");
    return p;
}

void write_stream(const fs::path& path, const std::function<void(std::ostream&)>& fn) {
    std::ostringstream os;
    fn(os);
    io::write_text(path, os.str());
}

eval::DendriteSpec dendrite_spec(const Config& c) {
    eval::DendriteSpec s;
    s.hidden_widths = get<std::vector<std::size_t>>(c, "hidden_widths");
    s.residual = get<std::vector<bool>>(c, "residual");
    s.per_output = get<bool>(c, "per_output");
    s.train.learning_rate = get<double>(c, "learning_rate");
    s.train.epochs = get<std::size_t>(c, "epochs");
    s.train.batch_size = get<std::size_t>(c, "batch_size");
    s.train.init_scale = get<double>(c, "init_scale");
    s.train.rng_seed = get<std::uint64_t>(c, "seed");
    if (s.hidden_widths.empty()) throw ConfigError("hidden_widths must list at least one module");
    if (!s.residual.empty() && s.residual.size() != s.hidden_widths.size())
        throw ConfigError("residual must be empty or have one flag per hidden module");
    try {
        s.train.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Model bundle file

nlohmann::json bundle_to_json(const eval::DendriteBundle& b, const Dataset& d) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : b.models) models.push_back(dd::to_json(m));
    return {{"format_version", 1},
            {"per_output", b.per_output},
            {"feature_names", d.feature_names},
            {"output_names", d.target_names},
            {"models", models}};
}

struct LoadedBundle {
    std::vector<dd::DDModel> models;
    bool per_output = true;
    std::vector<std::string> feature_names, output_names;
};

LoadedBundle bundle_from_json(const nlohmann::json& j) {
    LoadedBundle b;
    try {
        b.per_output = j.at("per_output").get<bool>();
        b.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        b.output_names = j.at("output_names").get<std::vector<std::string>>();
        for (const auto& m : j.at("models")) b.models.push_back(dd::model_from_json(m));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
    if (b.models.empty()) throw DataError("model file: no models");
    return b;
}

spectrum::RelationSpectrum expand_bundle(const LoadedBundle& b) {
    if (!b.per_output) return spectrum::expand_model(b.models.front(), b.feature_names, b.output_names);
    spectrum::RelationSpectrum all;
    for (std::size_t o = 0; o < b.models.size(); ++o) {
        std::vector<std::string> name;
        if (o < b.output_names.size()) name.push_back(b.output_names[o]);
        else name.push_back("y" + std::to_string(o + 1));
        auto s = spectrum::expand_model(b.models[o], b.feature_names, name);
        if (o == 0) all = s;
        else all.outputs.push_back(std::move(s.outputs.front()));
    }
    return all;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_synth(const Config& c) {
    const fs::path out = get<std::string>(c, "out_dir");
    const auto seed = get<std::uint64_t>(c, "seed");
    auto sys = signal::random_ground_truth(get<std::vector<std::string>>(c, "variables"),
                                           get<std::vector<std::string>>(c, "outputs"), get<std::size_t>(c, "degree"),
                                           get<double>(c, "coefficient_scale"), seed);
    auto freqs = get<std::vector<double>>(c, "frequencies_hz");
    if (freqs.empty()) freqs = signal::default_frequencies(sys.variables(), get<double>(c, "base_frequency_hz"));
    if (freqs.size() != sys.variables()) throw ConfigError("frequencies_hz must be empty or one per variable");
    sys.frequency_hz = freqs;
    sys.noise_sd = get<double>(c, "noise_sd");
    sys.emg_carrier = get<bool>(c, "emg_carrier");
    const auto rec = signal::synthesize_recording(sys, get<double>(c, "duration_s"), get<double>(c, "sample_rate_hz"),
                                                  seed + 1);
    io::save_recording(rec.recording, out / "recording.csv");
    io::write_json(out / "truth.json", spectrum::to_json(rec.truth));
}

void cmd_preprocess(const Config& c) {
    const fs::path out = get<std::string>(c, "out_dir");
    auto rec = io::load_recording(require_path(c, "input"), get<std::string>(c, "manifest"));
    if (get<bool>(c, "filter")) {
        signal::FilterSpec f;
        f.highpass_hz = get<double>(c, "highpass_hz");
        f.lowpass_hz = get<double>(c, "lowpass_hz");
        f.notch_hz = get<double>(c, "notch_hz");
        f.notch_q = get<double>(c, "notch_q");
        f.butterworth_order = get<int>(c, "butterworth_order");
        f.zero_phase = get<bool>(c, "zero_phase");
        try {
            f.validate(rec.sample_rate_hz);
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
        rec = signal::filter_chain(rec, f);
    }
    const double window = get<double>(c, "envelope_ms");
    if (window > 0) rec = signal::envelopes(rec, window);
    const auto d = signal::build_dataset(rec, get<std::size_t>(c, "decimation"));
    io::save_dataset(d, out / "dataset.csv");
}

void cmd_train(const Config& c) {
    const fs::path out = get<std::string>(c, "out_dir");
    const auto spec = dendrite_spec(c);
    const auto data = io::load_dataset(require_path(c, "input"));
    const auto bundle = eval::fit_dd(data, spec);
    io::write_json(out / "model.json", bundle_to_json(bundle, data));
    write_stream(out / "loss_trace.csv", [&](std::ostream& os) {
        os << "epoch";
        if (bundle.per_output)
            for (const auto& n : data.target_names) os << ',' << n;
        else
            os << ",loss";
        os << '\n';
        for (std::size_t e = 0; e < spec.train.epochs; ++e) {
            os << e + 1;
            for (const auto& t : bundle.loss_traces) os << ',' << fmt17(t[e]);
            os << '\n';
        }
    });
}

void cmd_expand(const Config& c) {
    const fs::path out = get<std::string>(c, "out_dir");
    const auto bundle = bundle_from_json(io::read_json(require_path(c, "model")));
    auto full = expand_bundle(bundle);
    auto order = get<std::vector<std::string>>(c, "variable_order");
    if (!order.empty()) full = spectrum::canonical_order(full, order);
    const auto view = spectrum::truncate_spectrum(full, get<std::size_t>(c, "truncate_degree"));

    io::write_json(out / "spectrum_full.json", spectrum::to_json(full));
    write_stream(out / "spectrum_full.csv", [&](std::ostream& os) { spectrum::write_csv(os, full); });
    io::write_json(out / "spectrum.json", spectrum::to_json(view));
    write_stream(out / "spectrum.csv", [&](std::ostream& os) { spectrum::write_csv(os, view); });
    write_stream(out / "items.csv", [&](std::ostream& os) { spectrum::write_item_table(os, view); });
}

void cmd_evaluate(const Config& c) {
    const fs::path out = get<std::string>(c, "out_dir");
    const auto data = io::load_dataset(require_path(c, "input"));
    const auto k = get<std::size_t>(c, "folds");
    const auto scheme_name = get<std::string>(c, "fold_scheme");
    eval::FoldScheme scheme;
    if (scheme_name == "contiguous") scheme = eval::FoldScheme::contiguous;
    else if (scheme_name == "random") scheme = eval::FoldScheme::seeded_random;
    else throw ConfigError("fold_scheme must be 'contiguous' or 'random'");
    const auto seed = get<std::uint64_t>(c, "seed");

    const auto lr = eval::cross_validate(data, k, eval::LinearSpec{}, scheme, seed);
    const auto dd = eval::cross_validate(data, k, dendrite_spec(c), scheme, seed);
    const std::vector<const eval::CVResult*> results = {&lr, &dd};

    write_stream(out / "cv_folds.csv", [&](std::ostream& os) {
        os << "output,model,fold,R2,MSE\n";
        for (std::size_t o = 0; o < data.outputs(); ++o)
            for (const auto* r : results)
                for (std::size_t f = 0; f < r->folds.size(); ++f)
                    os << data.target_names[o] << ',' << r->model << ',' << f + 1 << ',' << fmt17(r->folds[f].r2[o])
                       << ',' << fmt17(r->folds[f].mse[o]) << '\n';
    });

    nlohmann::json tests = nlohmann::json::array();
    write_stream(out / "cv_summary.csv", [&](std::ostream& os) {
        os << "output,model,R2_mean,R2_sd,MSE_mean,MSE_sd,p_value_vs_baseline\n";
        for (std::size_t o = 0; o < data.outputs(); ++o) {
            const auto t_r2 = eval::paired_t_test(dd.r2_series(o), lr.r2_series(o));
            const auto t_mse = eval::paired_t_test(dd.mse_series(o), lr.mse_series(o));
            tests.push_back({{"output", data.target_names[o]}, {"r2", eval::to_json(t_r2)}, {"mse", eval::to_json(t_mse)}});
            for (const auto* r : results) {
                os << data.target_names[o] << ',' << r->model << ',' << fmt17(r->r2_mean[o]) << ','
                   << fmt17(r->r2_sd[o]) << ',' << fmt17(r->mse_mean[o]) << ',' << fmt17(r->mse_sd[o]) << ',';
                if (r == &dd) os << (t_r2.degenerate ? "undefined" : fmt17(t_r2.p));
                os << '\n';
            }
        }
    });
    io::write_json(out / "cv_result.json",
                   {{"folds", k}, {"fold_scheme", scheme_name}, {"models", {eval::to_json(lr), eval::to_json(dd)}},
                    {"paired_t_tests", tests}});
}

void cmd_analyze(const Config& c) {
    const fs::path out = get<std::string>(c, "out_dir");
    const auto paths = get<std::vector<std::string>>(c, "spectra");
    if (paths.empty()) throw ConfigError("config key 'spectra' must list at least one spectrum JSON file");
    std::vector<spectrum::RelationSpectrum> spectra;
    for (const auto& p : paths) {
        try {
            spectra.push_back(spectrum::spectrum_from_json(io::read_json(p)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(p + ": " + e.what());
        }
    }
    auto col = analysis::make_collection(spectra, get<std::vector<std::string>>(c, "subjects"),
                                         get<std::size_t>(c, "degree"));
    if (get<bool>(c, "normalize")) col = analysis::l2_normalized(col);
    const auto agg_name = get<std::string>(c, "aggregation");
    analysis::Aggregation agg;
    if (agg_name == "concatenate") agg = analysis::Aggregation::concatenate;
    else if (agg_name == "per_subject_mean") agg = analysis::Aggregation::per_subject_mean;
    else throw ConfigError("aggregation must be 'concatenate' or 'per_subject_mean'");

    const auto rows = analysis::synergy_report(col, get<double>(c, "threshold"));
    const auto m = analysis::coupling_matrix(col, agg);
    write_stream(out / "synergy.csv", [&](std::ostream& os) { analysis::write_synergy_csv(os, rows); });
    write_stream(out / "coupling.csv", [&](std::ostream& os) { analysis::write_coupling_csv(os, m); });
    io::write_json(out / "coupling.json", analysis::to_json(m));
}

struct Command {
    std::string name;
    std::string description;
    Config defaults;
    std::function<void(const Config&)> run;
};

std::vector<Command> commands() {
    return {
        {"synth", "Generate a synthetic recording from a random polynomial ground truth",
         {{"out_dir", "synth"},
          {"seed", 1},
          {"duration_s", 60.0},
          {"sample_rate_hz", 1000.0},
          {"variables", kMuscles},
          {"outputs", kFingers},
          {"degree", 2},
          {"coefficient_scale", 1.0},
          {"frequencies_hz", Config::array()},
          {"base_frequency_hz", 0.1},
          {"noise_sd", 0.0},
          {"emg_carrier", true}},
         cmd_synth},
        {"preprocess", "Filter EMG, take RMS envelopes and write an aligned dataset",
         {{"out_dir", "preprocess"},
          {"input", ""},
          {"manifest", ""},
          {"filter", true},
          {"highpass_hz", 10.0},
          {"lowpass_hz", 450.0},
          {"notch_hz", 50.0},
          {"notch_q", 30.0},
          {"butterworth_order", 4},
          {"zero_phase", true},
          {"envelope_ms", 250.0},
          {"decimation", 25}},
         cmd_preprocess},
        {"train", "Train Dendrite Nets on a dataset",
         merged({{"out_dir", "train"}, {"input", ""}, {"seed", 42}}, dendrite_defaults()), cmd_train},
        {"expand", "Expand a trained model into its relation spectrum",
         {{"out_dir", "expand"}, {"model", ""}, {"variable_order", Config::array()}, {"truncate_degree", 2}},
         cmd_expand},
        {"evaluate", "k-fold cross-validation of LR and DD with paired t-tests",
         merged({{"out_dir", "evaluate"}, {"input", ""}, {"seed", 42}, {"folds", 10}, {"fold_scheme", "contiguous"}},
                dendrite_defaults()),
         cmd_evaluate},
        {"analyze", "Same-contribution items and coupling across subject spectra",
         {{"out_dir", "analyze"},
          {"spectra", Config::array()},
          {"subjects", Config::array()},
          {"degree", 2},
          {"threshold", 100.0},
          {"aggregation", "concatenate"},
          {"normalize", false}},
         cmd_analyze},
    };
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relation spectra of Dendrite Net models"};
    app.require_subcommand(1);

    struct Flags {
        std::string config, out_dir;
        std::vector<std::string> sets;
        std::optional<std::uint64_t> seed;
    };
    const auto cmds = commands();
    std::map<std::string, Flags> flags;
    std::vector<CLI::App*> subs;
    for (const auto& cmd : cmds) {
        auto* sub = app.add_subcommand(cmd.name, cmd.description);
        auto& f = flags[cmd.name];
        sub->add_option("--config", f.config, "JSON config file");
        sub->add_option("--out-dir", f.out_dir, "Output directory (overrides out_dir)");
        sub->add_option("--seed", f.seed, "Random seed (overrides seed)");
        sub->add_option("--set", f.sets, "Override a config key: key=value (value parsed as JSON)");
        sub->footer(help_footer(cmd.defaults));
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        const auto& cmd = cmds[i];
        const auto& f = flags[cmd.name];
        try {
            cmd.run(load_config(cmd.defaults, f.config, f.sets, f.seed, f.out_dir));
            return 0;
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return 2;
        } catch (const NumericalError& e) {
            std::cerr << "numerical failure: " << e.what() << '\n';
            return 4;
        } catch (const DataError& e) {
            std::cerr << "data error: " << e.what() << '\n';
            return 3;
        } catch (const ValidationError& e) {
            std::cerr << "invalid input: " << e.what() << '\n';
            return 3;
        } catch (const fs::filesystem_error& e) {
            std::cerr << "data error: " << e.what() << '\n';
            return 3;
        } catch (const nlohmann::json::exception& e) {
            std::cerr << "data error: " << e.what() << '\n';
            return 3;
        }
    }
    return 0;
}
