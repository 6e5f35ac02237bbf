#include "bayesreloc/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bayesreloc/checkpoint.hpp"
#include "bayesreloc/detector.hpp"
#include "bayesreloc/error.hpp"
#include "bayesreloc/harness.hpp"
#include "bayesreloc/mc_posterior.hpp"
#include "bayesreloc/rng.hpp"
#include "bayesreloc/scenes.hpp"

namespace bayesreloc {
namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
    std::uint64_t seed = 0;
    std::size_t samples = kDefaultSampleCount;
    std::string out;
};

struct GenOptions {
    std::string spec_path;
    std::string scene_id = "synthetic";
    std::optional<std::uint64_t> generator_seed;
    std::optional<double> aliasing_period;
    std::optional<double> noise_sigma;
    std::size_t n_train = 0;
    std::size_t n_calib = 0;
    std::size_t n_test = 0;
};

struct TrainOptions {
    std::string data;
    std::optional<std::size_t> epochs;
    std::optional<double> learning_rate;
    std::optional<std::size_t> batch_size;
    std::optional<double> beta;
    std::optional<double> momentum;
    std::optional<double> dropout_p;
    std::vector<std::size_t> hidden;
    std::optional<std::size_t> aux_tap;
};

struct ModelOptions {
    std::string model;
    std::string calibration;
    std::string data;
};

fs::path require_out(const GlobalOptions& g, const char* what) {
    if (g.out.empty()) throw Error(ErrorKind::InvalidArgument, std::string("--out is required for ") + what);
    return g.out;
}

int cmd_gen(const GlobalOptions& g, const GenOptions& o, std::ostream& out) {
    const ExperimentConfig defaults;
    SceneSpec spec = defaults.scene;
    if (!o.spec_path.empty()) spec = parse_scene_spec(read_text_file(o.spec_path));
    else spec.scene_id = o.scene_id;
    spec.generator_seed = o.generator_seed.value_or(o.spec_path.empty() ? g.seed : spec.generator_seed);
    if (o.aliasing_period) spec.aliasing_period = *o.aliasing_period;
    if (o.noise_sigma) spec.noise_sigma = *o.noise_sigma;
    const SceneDataset ds = generate_scene(spec, o.n_train ? o.n_train : defaults.n_train,
                                           o.n_calib ? o.n_calib : defaults.n_calib,
                                           o.n_test ? o.n_test : defaults.n_test);
    const fs::path dir = require_out(g, "gen");
    save_dataset(dir, ds);
    out << "wrote scene '" << spec.scene_id << "' (" << ds.train.size() << " train, " << ds.calib.size()
        << " calib, " << ds.test.size() << " test) to " << dir.string() << '\n';
    return kExitOk;
}

int cmd_train(const GlobalOptions& g, const TrainOptions& o, std::ostream& out) {
    ExperimentConfig cfg;
    const SceneDataset ds = load_dataset(o.data);
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (o.learning_rate) cfg.train.learning_rate = *o.learning_rate;
    if (o.batch_size) cfg.train.batch_size = *o.batch_size;
    if (o.beta) cfg.train.loss.beta = *o.beta;
    if (o.momentum) cfg.train.momentum = *o.momentum;
    if (o.dropout_p) cfg.dropout_p = *o.dropout_p;
    if (!o.hidden.empty()) cfg.hidden_widths = o.hidden;
    cfg.train.seed = g.seed;

    std::optional<AuxHeadSpec> aux;
    if (o.aux_tap) aux = AuxHeadSpec{*o.aux_tap, 0.3};
    const auto specs = default_architecture(ds.spec.feature_dim, cfg.hidden_widths);
    NetworkParams net = build_network(specs, cfg.dropout_p, g.seed, aux);
    net.output = fit_output_scaling(ds.train);
    const TrainResult trained = train(std::move(net), ds.train, cfg.train);

    const fs::path path = require_out(g, "train");
    save_checkpoint(path, {trained.net, g.seed, cfg.train.loss.beta});
    out << "epoch\tmean_loss\n";
    for (std::size_t e = 0; e < trained.epoch_losses.size(); ++e) out << e + 1 << '\t' << trained.epoch_losses[e] << '\n';
    out << "wrote checkpoint " << path.string() << '\n';
    return kExitOk;
}

int cmd_calibrate(const GlobalOptions& g, const ModelOptions& o, const std::string& split, std::ostream& out) {
    const Checkpoint cp = load_checkpoint(o.model);
    const SceneDataset ds = load_dataset(o.data);
    if (split != "calib" && split != "test") throw Error(ErrorKind::InvalidArgument, "--split must be calib or test");
    const auto& examples = split == "test" ? ds.test : ds.calib;
    const CalibrationModel cal = calibrate_network(cp.net, examples, ds.spec.scene_id, g.samples, g.seed);
    const fs::path path = require_out(g, "calibrate");
    write_text_file(path, format_calibration(cal));
    out << "translation Gamma k=" << cal.trans.model.shape << " theta=" << cal.trans.model.scale
        << "  rotation Gamma k=" << cal.rot.model.shape << " theta=" << cal.rot.model.scale << '\n';
    out << "wrote calibration " << path.string() << '\n';
    return kExitOk;
}

SceneModel load_scene_model(const std::string& model, const std::string& calibration) {
    Checkpoint cp = load_checkpoint(model);
    CalibrationModel cal = parse_calibration(read_text_file(calibration));
    return {cal.source_scene, std::move(cp.net), std::move(cal)};
}

int cmd_eval(const GlobalOptions& g, const ModelOptions& o, std::ostream& out) {
    const SceneModel model = load_scene_model(o.model, o.calibration);
    const SceneDataset ds = load_dataset(o.data);
    const EvalReport report = run_eval(model, ds, g.samples, g.seed);
    const fs::path dir = require_out(g, "eval");
    write_text_file(dir / "summary.json", format_eval_summary(report));
    write_text_file(dir / "queries.tsv", format_query_table(report));
    out << format_eval_summary(report);
    return kExitOk;
}

int cmd_sample(const GlobalOptions& g, const ModelOptions& o, const std::string& query, std::ostream& out) {
    const Checkpoint cp = load_checkpoint(o.model);
    const SceneDataset ds = load_dataset(o.data);
    for (const auto* split : {&ds.test, &ds.calib, &ds.train}) {
        for (const auto& ex : *split) {
            if (ex.query_id != query) continue;
            const std::string text = format_samples(sample_posterior(cp.net, ex.features, g.samples, g.seed), query);
            if (g.out.empty()) out << text;
            else write_text_file(g.out, text);
            return kExitOk;
        }
    }
    throw Error(ErrorKind::InvalidArgument, "no query '" + query + "' in " + o.data);
}

int cmd_sweep(const GlobalOptions& g, const ModelOptions& o, const std::vector<std::size_t>& counts,
              std::size_t repetitions, std::ostream& out) {
    const Checkpoint cp = load_checkpoint(o.model);
    const SceneDataset ds = load_dataset(o.data);
    const SweepReport report = run_sweep(cp.net, ds.test, counts, repetitions, g.seed);
    const std::string text = format_sweep(report);
    if (!g.out.empty()) write_text_file(g.out, text);
    out << text;
    return kExitOk;
}

int cmd_hist(const GlobalOptions& g, const std::string& table, const std::vector<double>& thresholds, std::ostream& out) {
    const EvalReport report = parse_query_table(read_text_file(table));
    const std::string text = format_histogram(run_histogram(report, thresholds));
    if (!g.out.empty()) write_text_file(g.out, text);
    out << text;
    return kExitOk;
}

int cmd_detect(const GlobalOptions& g, const std::vector<std::string>& models, const std::vector<std::string>& cals,
               const std::vector<std::string>& data, const std::vector<std::string>& exclude, std::ostream& out) {
    if (models.size() != cals.size() || models.size() != data.size()) {
        throw Error(ErrorKind::InvalidArgument, "--model, --calibration and --data must be given once per scene");
    }
    std::vector<SceneModel> scene_models;
    std::vector<SceneQueries> test_sets;
    for (std::size_t i = 0; i < models.size(); ++i) {
        scene_models.push_back(load_scene_model(models[i], cals[i]));
        SceneDataset ds = load_dataset(data[i]);
        if (ds.spec.scene_id != scene_models.back().scene_id) {
            throw Error(ErrorKind::InvalidArgument, "dataset '" + ds.spec.scene_id + "' paired with model for '" +
                                                        scene_models.back().scene_id + "'");
        }
        test_sets.push_back({ds.spec.scene_id, std::move(ds.test)});
    }
    const ConfusionReport report = confusion(scene_models, test_sets, g.samples, g.seed, exclude);
    const fs::path dir = require_out(g, "detect");
    write_text_file(dir / "confusion_combined.tsv", format_confusion(report.combined));
    write_text_file(dir / "confusion_translation.tsv", format_confusion(report.translation));
    write_text_file(dir / "confusion_rotation.tsv", format_confusion(report.rotation));
    out << format_confusion(report.combined);
    return kExitOk;
}

int cmd_time(const GlobalOptions& g, const ModelOptions& o, const std::vector<std::size_t>& counts, std::ostream& out) {
    const Checkpoint cp = load_checkpoint(o.model);
    const SceneDataset ds = load_dataset(o.data);
    std::vector<TimingReport> rows;
    for (std::size_t c : counts) rows.push_back(run_timing(cp.net, ds.test, c, g.seed));
    const std::string text = format_timing(rows);
    if (!g.out.empty()) write_text_file(g.out, text);
    out << text;
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian pose regression with Monte Carlo dropout", "bayesreloc"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--samples", g.samples, "Monte Carlo samples per query")->check(CLI::Range(1, 100000));
    app.add_option("--out", g.out, "Output file or directory");

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic scene dataset directory");
    gen_cmd->add_option("--spec", gen.spec_path, "Scene spec JSON (bayesreloc-scene-v1)");
    gen_cmd->add_option("--scene-id", gen.scene_id, "Scene identifier");
    gen_cmd->add_option("--generator-seed", gen.generator_seed, "Generator seed (defaults to --seed)");
    gen_cmd->add_option("--aliasing-period", gen.aliasing_period, "Repeat period along x (m)");
    gen_cmd->add_option("--noise", gen.noise_sigma, "Feature noise sigma");
    gen_cmd->add_option("--n-train", gen.n_train);
    gen_cmd->add_option("--n-calib", gen.n_calib);
    gen_cmd->add_option("--n-test", gen.n_test);

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "Train a dropout pose regressor");
    train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
    train_cmd->add_option("--epochs", tr.epochs);
    train_cmd->add_option("--lr", tr.learning_rate, "Learning rate");
    train_cmd->add_option("--batch", tr.batch_size);
    train_cmd->add_option("--beta", tr.beta, "Orientation loss weight");
    train_cmd->add_option("--momentum", tr.momentum);
    train_cmd->add_option("--dropout", tr.dropout_p, "Drop probability");
    train_cmd->add_option("--hidden", tr.hidden, "Hidden layer widths")->delimiter(',');
    train_cmd->add_option("--aux-tap", tr.aux_tap, "Attach an auxiliary pose head to this hidden layer");

    ModelOptions mo;
    std::string split = "calib";
    auto* cal_cmd = app.add_subcommand("calibrate", "Fit Gamma calibration on a dataset split");
    cal_cmd->add_option("--model", mo.model)->required();
    cal_cmd->add_option("--data", mo.data)->required();
    cal_cmd->add_option("--split", split, "calib (default) or test");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate on the test split");
    eval_cmd->add_option("--model", mo.model)->required();
    eval_cmd->add_option("--calibration", mo.calibration)->required();
    eval_cmd->add_option("--data", mo.data)->required();

    std::string query;
    auto* sample_cmd = app.add_subcommand("sample", "Dump Monte Carlo pose samples for one query");
    sample_cmd->add_option("--model", mo.model)->required();
    sample_cmd->add_option("--data", mo.data)->required();
    sample_cmd->add_option("--query", query)->required();

    std::vector<std::size_t> counts{1, 2, 5, 10, 20, 40, 80, 128};
    std::size_t repetitions = 8;
    auto* sweep_cmd = app.add_subcommand("sweep", "Median error against number of samples");
    sweep_cmd->add_option("--model", mo.model)->required();
    sweep_cmd->add_option("--data", mo.data)->required();
    sweep_cmd->add_option("--counts", counts)->delimiter(',');
    sweep_cmd->add_option("--repetitions", repetitions);

    std::string table;
    std::vector<double> thresholds{0.5, 1, 2, 3, 4, 5, 7.5, 10, 15, 20, 30, 50};
    auto* hist_cmd = app.add_subcommand("hist", "Cumulative error histogram from an eval table");
    hist_cmd->add_option("--table", table, "queries.tsv from eval")->required();
    hist_cmd->add_option("--thresholds", thresholds)->delimiter(',');

    std::vector<std::string> models, cals, data, exclude;
    auto* detect_cmd = app.add_subcommand("detect", "Scene recognition confusion matrices");
    detect_cmd->add_option("--model", models)->required();
    detect_cmd->add_option("--calibration", cals)->required();
    detect_cmd->add_option("--data", data)->required();
    detect_cmd->add_option("--exclude", exclude)->delimiter(',');

    std::vector<std::size_t> time_counts{40, 128};
    auto* time_cmd = app.add_subcommand("time", "Per-query localization wall time");
    time_cmd->add_option("--model", mo.model)->required();
    time_cmd->add_option("--data", mo.data)->required();
    time_cmd->add_option("--counts", time_counts)->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return kExitUsage;
    }

    try {
        if (*gen_cmd) return cmd_gen(g, gen, out);
        if (*train_cmd) return cmd_train(g, tr, out);
        if (*cal_cmd) return cmd_calibrate(g, mo, split, out);
        if (*eval_cmd) return cmd_eval(g, mo, out);
        if (*sample_cmd) return cmd_sample(g, mo, query, out);
        if (*sweep_cmd) return cmd_sweep(g, mo, counts, repetitions, out);
        if (*hist_cmd) return cmd_hist(g, table, thresholds, out);
        if (*detect_cmd) return cmd_detect(g, models, cals, data, exclude, out);
        if (*time_cmd) return cmd_time(g, mo, time_counts, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        switch (classify(e.kind())) {
            case ErrorClass::Usage: return kExitUsage;
            case ErrorClass::Numerical: return kExitNumerical;
            case ErrorClass::Data: return kExitData;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace bayesreloc
