#include "mdwm/cli.hpp"

#include "mdwm/datasets.hpp"
#include "mdwm/errors.hpp"
#include "mdwm/evaluation.hpp"
#include "mdwm/meta_stats.hpp"
#include "mdwm/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <limits>
#include <sstream>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

namespace mdwm::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct GenerateArgs {
    SynthConfig synth;
    std::string out;
    std::string name;
};

struct EvalArgs {
    std::string data;
    std::string out;
    std::vector<int> n_train;
    std::vector<double> lambdas;
    int repetitions = 10;
    std::uint64_t seed = 42;
    std::vector<std::string> pipelines;
    double shrinkage = 0.05;
    std::string paradigm;
    std::string prototype_label;
    std::vector<std::string> bands;
    int jobs = 1;
    bool paper_defaults = false;
    bool timing = false;
};

struct MetaArgs {
    std::vector<std::string> tables;
    std::string out;
    std::string method_a = kPipelineMdwm;
    std::string method_b = kPipelineTargetOnly;
    int n_train = 0;
    double lambda = 0.7;
    bool two_sided = false;
};

std::string json_scalar_to_string(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    if (value.is_number_integer() || value.is_number_unsigned()) return value.dump();
    if (value.is_number_float()) return value.dump();
    throw ValidationError("config: unsupported value " + value.dump());
}

// Applies a JSON object of {"option-name": value} to options that were not
// given on the command line. A key also given as a flag is an error.
void apply_config(CLI::App& command, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ValidationError("config file '" + path + "' must hold a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (key == "config") throw ValidationError("config file may not name another config file");
        CLI::Option* option = command.get_option_no_throw("--" + key);
        if (option == nullptr) throw ValidationError("config file: unknown option '" + key + "'");
        if (option->count() > 0) {
            throw ValidationError("option '--" + key + "' is set both on the command line and in '" + path + "'");
        }
        std::vector<std::string> results;
        if (value.is_array()) {
            for (const auto& item : value) results.push_back(json_scalar_to_string(item));
        } else {
            results.push_back(json_scalar_to_string(value));
        }
        option->add_result(results);
        option->run_callback();
    }
}

void write_text_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_provenance(const fs::path& path, const std::string& command, const json& config) {
    json doc;
    doc["tool"] = kToolName;
    doc["version"] = kToolVersion;
    doc["command"] = command;
    doc["config"] = config;
    write_text_file(path, doc.dump(2) + "\n");
}

FrequencyBand parse_band(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ValidationError("band '" + text + "' must look like LOW:HIGH (Hz)");
    try {
        return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ValidationError("band '" + text + "' must look like LOW:HIGH (Hz)");
    }
}

int cmd_generate(const GenerateArgs& args, std::ostream& out) {
    if (args.out.empty()) throw ValidationError("generate: --out is required");
    args.synth.validate();
    Dataset ds = generate_synthetic(args.synth);
    if (!args.name.empty()) ds.name = args.name;
    save_dataset(ds, args.out);

    const auto& s = args.synth;
    json config = {{"seed", s.seed},
                   {"subjects", s.subjects},
                   {"classes", s.classes},
                   {"channels", s.channels},
                   {"samples", s.samples},
                   {"trials-per-class", s.trials_per_class},
                   {"rate", s.sampling_rate_hz},
                   {"class-sep", s.class_separation},
                   {"subject-var", s.subject_variability},
                   {"trial-noise", s.trial_noise},
                   {"name", ds.name}};
    // The record sits inside the dataset, so it leaves out the directory path
    // and stays identical wherever the dataset is written.
    write_provenance(fs::path(args.out) / "provenance.json", "generate", config);

    out << "wrote dataset '" << ds.name << "' to " << args.out << ": " << ds.subjects.size() << " subjects, "
        << ds.labels.size() << " classes, " << ds.channels() << " channels x " << ds.samples() << " samples, "
        << s.trials_per_class * s.classes << " trials per subject\n";
    return kExitOk;
}

int cmd_eval(EvalArgs args, std::ostream& out, std::ostream& err) {
    if (args.data.empty()) throw ValidationError("eval: --data is required");
    if (args.out.empty()) throw ValidationError("eval: --out is required");
    const Dataset ds = load_dataset(args.data);
    validate_for_transfer(ds);
    const int classes = static_cast<int>(ds.labels.size());

    EvalConfig config;
    config.repetitions = args.repetitions;
    config.seed = args.seed;
    config.jobs = args.jobs;
    if (!args.pipelines.empty()) config.pipelines = args.pipelines;
    if (!args.lambdas.empty()) config.lambdas = args.lambdas;

    int capacity = std::numeric_limits<int>::max();
    for (const auto& subject : ds.subjects) capacity = std::min(capacity, max_feasible_n(subject));

    if (!args.n_train.empty()) {
        config.n_train = args.n_train;
    } else {
        std::vector<int> grid = {5, 30, 55};
        if (args.paper_defaults) grid.push_back(2 * classes);
        std::set<int> feasible;
        for (int n : grid) {
            if (n >= classes && n <= capacity) {
                feasible.insert(n);
            } else {
                err << "note: dropping infeasible default n_train = " << n << " (feasible range [" << classes << ", "
                    << capacity << "])\n";
            }
        }
        if (feasible.empty()) {
            throw ValidationError("eval: none of the default n_train values fits every subject (feasible range [" +
                                  std::to_string(classes) + ", " + std::to_string(capacity) + "]); pass --n");
        }
        config.n_train.assign(feasible.begin(), feasible.end());
    }

    FeatureConfig& features = config.features;
    features.shrinkage = args.shrinkage;
    features.paradigm.kind = args.paradigm.empty() ? ds.paradigm : parse_paradigm_kind(args.paradigm);
    features.paradigm.prototype_label = args.prototype_label;
    features.paradigm.sampling_rate_hz = ds.sampling_rate_hz;
    for (const auto& band : args.bands) features.paradigm.bands.push_back(parse_band(band));
    if (features.paradigm.kind == ParadigmKind::erp_prototype &&
        !std::binary_search(ds.labels.begin(), ds.labels.end(), features.paradigm.prototype_label)) {
        throw ValidationError("eval: erp_prototype needs --prototype-label naming one of the dataset classes");
    }

    const ScoreTable table = run_transfer_evaluation(ds, config);

    std::ostringstream csv;
    write_score_table(csv, table, args.timing);
    write_text_file(args.out, csv.str());

    json bands = json::array();
    for (const auto& b : features.paradigm.bands) bands.push_back({b.low_hz, b.high_hz});
    json resolved = {{"data", args.data},
                     {"out", args.out},
                     {"dataset", ds.name},
                     {"n", config.n_train},
                     {"lambda", config.lambdas},
                     {"reps", config.repetitions},
                     {"seed", config.seed},
                     {"pipeline", config.pipelines},
                     {"shrinkage", features.shrinkage},
                     {"paradigm", to_string(features.paradigm.kind)},
                     {"prototype-label", features.paradigm.prototype_label},
                     {"bands", bands},
                     {"jobs", config.jobs},
                     {"paper-defaults", args.paper_defaults},
                     {"timing", args.timing}};
    write_provenance(args.out + ".provenance.json", "eval", resolved);

    out << "wrote " << table.rows.size() << " rows to " << args.out << " (" << ds.subjects.size() << " subjects, "
        << config.n_train.size() << " n values, " << config.lambdas.size() << " lambda values, "
        << config.repetitions << " repetitions, " << config.pipelines.size() << " pipelines)\n";
    return kExitOk;
}

int cmd_meta(const MetaArgs& args, std::ostream& out) {
    if (args.tables.empty()) throw ValidationError("meta: at least one --table is required");
    std::vector<ScoreTable> tables;
    for (const auto& path : args.tables) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open score table '" + path + "'");
        try {
            tables.push_back(read_score_table(in));
        } catch (const FormatError& e) {
            throw FormatError(path + ": " + e.what());
        }
    }

    CellSelector cell{args.n_train, args.lambda};
    if (cell.n_train == 0) {
        std::set<int> values;
        for (const auto& t : tables) {
            for (const auto& r : t.rows) values.insert(r.n_train);
        }
        if (values.size() != 1) {
            throw ValidationError("meta: the tables hold " + std::to_string(values.size()) +
                                  " distinct n_train values; choose one with --n");
        }
        cell.n_train = *values.begin();
    }

    const MetaResult result = run_meta_analysis(tables, args.method_a, args.method_b, cell,
                                                args.two_sided ? Alternative::two_sided : Alternative::greater);
    write_meta_report(out, result);
    if (!args.out.empty()) {
        std::ostringstream summary;
        write_meta_summary(summary, result);
        write_text_file(args.out, summary.str());
        json resolved = {{"table", args.tables},   {"out", args.out},       {"method-a", args.method_a},
                         {"method-b", args.method_b}, {"n", cell.n_train},     {"lambda", cell.lambda},
                         {"two-sided", args.two_sided}};
        write_provenance(args.out + ".provenance.json", "meta", resolved);
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Riemannian minimum-distance classification with cross-subject transfer (MDWM)", kToolName};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    GenerateArgs gen;
    std::string gen_config;
    auto* generate = app.add_subcommand("generate", "Write a seeded synthetic multi-subject dataset");
    generate->add_option("--seed", gen.synth.seed, "Master seed")->capture_default_str();
    generate->add_option("--subjects", gen.synth.subjects, "Number of subjects")->capture_default_str();
    generate->add_option("--classes", gen.synth.classes, "Number of classes (>= 2)")->capture_default_str();
    generate->add_option("--channels", gen.synth.channels, "Channels per trial")->capture_default_str();
    generate->add_option("--samples", gen.synth.samples, "Samples per trial")->capture_default_str();
    generate->add_option("--trials-per-class", gen.synth.trials_per_class, "Trials per class and subject")
        ->capture_default_str();
    generate->add_option("--rate", gen.synth.sampling_rate_hz, "Sampling rate in Hz")->capture_default_str();
    generate->add_option("--class-sep", gen.synth.class_separation, "Class-center scale")->capture_default_str();
    generate->add_option("--subject-var", gen.synth.subject_variability, "Per-subject perturbation scale")
        ->capture_default_str();
    generate->add_option("--trial-noise", gen.synth.trial_noise, "Per-trial perturbation scale")->capture_default_str();
    generate->add_option("--name", gen.name, "Dataset name (default synthetic-seed<seed>)");
    generate->add_option("--out", gen.out, "Output dataset directory");
    generate->add_option("--config", gen_config, "JSON file of option values");

    EvalArgs ev;
    std::string eval_config;
    auto* eval = app.add_subcommand("eval", "Leave-one-subject-out transfer evaluation");
    eval->add_option("--data", ev.data, "Dataset directory");
    eval->add_option("--out", ev.out, "Score table CSV to write");
    eval->add_option("--n", ev.n_train, "Calibration trials from the target (repeatable; default 5 30 55)");
    eval->add_option("--lambda", ev.lambdas, "Transfer weight in [0, 1] (repeatable; default 0 0.1 0.3 0.7)");
    eval->add_option("--reps", ev.repetitions, "Repetitions per cell")->capture_default_str();
    eval->add_option("--seed", ev.seed, "Master seed for calibration draws")->capture_default_str();
    eval->add_option("--pipeline", ev.pipelines, "mdwm and/or mdm-target-only (default both)");
    eval->add_option("--shrinkage", ev.shrinkage, "Covariance shrinkage in [0, 1)")->capture_default_str();
    eval->add_option("--paradigm", ev.paradigm, "plain, erp_prototype or filter_bank (default: dataset's)");
    eval->add_option("--prototype-label", ev.prototype_label, "Class whose mean waveform augments ERP trials");
    eval->add_option("--band", ev.bands, "Filter-bank band LOW:HIGH in Hz (repeatable)");
    eval->add_option("--jobs", ev.jobs, "Worker threads")->capture_default_str();
    eval->add_flag("--paper-defaults", ev.paper_defaults,
                   "n in {5, 30, 55, 2K}, lambda in {0, 0.1, 0.3, 0.7}, 10 repetitions");
    eval->add_flag("--timing", ev.timing, "Record wall-clock timings (otherwise written as 0)");
    eval->add_option("--config", eval_config, "JSON file of option values");

    MetaArgs meta;
    std::string meta_config;
    auto* meta_cmd = app.add_subcommand("meta", "Per-dataset Wilcoxon tests combined with Stouffer's method");
    meta_cmd->add_option("--table", meta.tables, "Score table CSV (repeatable)");
    meta_cmd->add_option("--out", meta.out, "Summary CSV to write");
    meta_cmd->add_option("--method-a", meta.method_a, "Method tested as better")->capture_default_str();
    meta_cmd->add_option("--method-b", meta.method_b, "Reference method")->capture_default_str();
    meta_cmd->add_option("--n", meta.n_train, "n_train cell (default: the only one present)");
    meta_cmd->add_option("--lambda", meta.lambda, "lambda cell")->capture_default_str();
    meta_cmd->add_flag("--two-sided", meta.two_sided, "Two-sided instead of one-sided (A > B) tests");
    meta_cmd->add_option("--config", meta_config, "JSON file of option values");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try {
            app.parse(reversed);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::CallForVersion& e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError& e) {
            app.exit(e, out, err);
            return kExitValidation;
        }

        if (generate->parsed()) {
            if (!gen_config.empty()) apply_config(*generate, gen_config);
            return cmd_generate(gen, out);
        }
        if (eval->parsed()) {
            if (!eval_config.empty()) apply_config(*eval, eval_config);
            if (ev.paper_defaults) {
                for (const char* name : {"--n", "--lambda", "--reps"}) {
                    if (eval->get_option(name)->count() > 0) {
                        throw ValidationError(std::string("eval: --paper-defaults fixes ") + name +
                                              "; drop one of them");
                    }
                }
                ev.repetitions = 10;
                ev.lambdas = {0.0, 0.1, 0.3, 0.7};
            }
            return cmd_eval(ev, out, err);
        }
        if (meta_cmd->parsed()) {
            if (!meta_config.empty()) apply_config(*meta_cmd, meta_config);
            return cmd_meta(meta, out);
        }
        return kExitValidation;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace mdwm::cli
