#include "bayesreloc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bayesreloc/error.hpp"
#include "bayesreloc/mc_posterior.hpp"
#include "bayesreloc/parallel.hpp"
#include "bayesreloc/rng.hpp"
#include "bayesreloc/stats.hpp"

namespace bayesreloc {
namespace {

constexpr const char* kEvalTag = "bayesreloc-eval-v1";
constexpr const char* kQueryTag = "bayesreloc-queries-v1";
constexpr const char* kSweepTag = "bayesreloc-sweep-v1";
constexpr const char* kHistTag = "bayesreloc-hist-v1";
constexpr const char* kTimingTag = "bayesreloc-timing-v1";

constexpr std::uint64_t kCalibrationStream = 0xCA11B;

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json("undefined");
}

void check_widths(const NetworkParams& net, std::span<const Example> examples) {
    for (const auto& ex : examples) {
        if (ex.features.size() != net.input_width()) {
            throw Error(ErrorKind::ShapeMismatch, "query '" + ex.query_id + "' has feature width " +
                                                      std::to_string(ex.features.size()) + " but the model expects " +
                                                      std::to_string(net.input_width()));
        }
    }
}

std::vector<double> column(std::span<const QueryRecord> records, double QueryRecord::*field) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.*field);
    return out;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
    scene.scene_id = "synthetic";
    scene.nuisance_dof = 1;
    train.learning_rate = 3e-4;
    train.batch_size = 32;
    train.epochs = 75;
    train.loss.beta = 30.0;
    train.momentum = 0.9;
    train.seed = 7;
}

NetworkParams build_default_network(const ExperimentConfig& config, std::size_t input_width, std::uint64_t seed) {
    const auto specs = default_architecture(input_width, config.hidden_widths);
    return build_network(specs, config.dropout_p, seed);
}

CalibrationModel calibrate_network(const NetworkParams& net, std::span<const Example> examples,
                                   const std::string& scene_id, std::size_t num_samples, std::uint64_t seed,
                                   std::size_t threads) {
    check_widths(net, examples);
    std::vector<TracePair> traces(examples.size());
    parallel_for(
        examples.size(),
        [&](std::size_t i) {
            const auto u = localize(net, examples[i].features, num_samples, derive_seed(seed, i)).uncertainty;
            traces[i] = {u.trans_trace, u.rot_trace};
        },
        threads);
    return calibrate(traces, scene_id);
}

SceneModel train_scene_model(const SceneDataset& dataset, const ExperimentConfig& config,
                             std::vector<double>* epoch_losses) {
    NetworkParams net = build_default_network(config, dataset.spec.feature_dim, config.train.seed);
    net.output = fit_output_scaling(dataset.train);
    TrainResult trained = train(std::move(net), dataset.train, config.train);
    if (epoch_losses != nullptr) *epoch_losses = trained.epoch_losses;
    const auto& calib_split = config.calibrate_on_test ? dataset.test : dataset.calib;
    CalibrationModel cal = calibrate_network(trained.net, calib_split, dataset.spec.scene_id, config.num_samples,
                                             derive_seed(config.train.seed, kCalibrationStream));
    return {dataset.spec.scene_id, std::move(trained.net), std::move(cal)};
}

const Correlation& EvalReport::correlation(const std::string& name) const {
    for (const auto& c : summary.correlations) {
        if (c.name == name) return c;
    }
    throw Error(ErrorKind::InvalidArgument, "no correlation named '" + name + "'");
}

EvalSummary summarize(std::span<const QueryRecord> records) {
    EvalSummary s;
    s.queries = records.size();
    if (records.empty()) return s;
    s.median_trans_error = lower_median(column(records, &QueryRecord::trans_error));
    s.median_rot_error = lower_median(column(records, &QueryRecord::rot_error));
    s.median_det_trans_error = lower_median(column(records, &QueryRecord::det_trans_error));
    s.median_det_rot_error = lower_median(column(records, &QueryRecord::det_rot_error));
    s.median_nn_trans_error = lower_median(column(records, &QueryRecord::nn_trans_error));
    s.median_nn_rot_error = lower_median(column(records, &QueryRecord::nn_rot_error));

    const auto tt = column(records, &QueryRecord::trans_trace);
    const auto rt = column(records, &QueryRecord::rot_trace);
    const auto te = column(records, &QueryRecord::trans_error);
    const auto re = column(records, &QueryRecord::rot_error);
    const auto nn = column(records, &QueryRecord::nn_feature_distance);
    std::vector<double> combined;
    for (const auto& r : records) combined.push_back(r.z.combined);
    auto corr = [](std::string name, std::span<const double> a, std::span<const double> b) {
        return Correlation{std::move(name), spearman(a, b), pearson(a, b)};
    };
    s.correlations = {corr("trans_trace~trans_error", tt, te), corr("rot_trace~rot_error", rt, re),
                      corr("trans_trace~rot_trace", tt, rt), corr("combined_z~nn_feature_distance", combined, nn)};
    return s;
}

EvalReport run_eval(const SceneModel& model, const SceneDataset& dataset, std::size_t num_samples,
                    std::uint64_t seed, std::size_t threads) {
    const NetworkParams& net = model.network;
    check_widths(net, dataset.test);
    check_widths(net, dataset.train);

    std::vector<std::vector<double>> train_embeddings(dataset.train.size());
    parallel_for(
        dataset.train.size(),
        [&](std::size_t i) { train_embeddings[i] = feature_embedding(net, dataset.train[i].features); }, threads);

    EvalReport report;
    report.records.resize(dataset.test.size());
    const auto start = std::chrono::steady_clock::now();
    parallel_for(
        dataset.test.size(),
        [&](std::size_t i) {
            const Example& ex = dataset.test[i];
            const Localization loc = localize(net, ex.features, num_samples, derive_seed(seed, i));
            const Pose det = forward(net, ex.features).to_pose();
            const NeighbourMatch nn =
                nearest_neighbour_pose(dataset.train, feature_embedding(net, ex.features), train_embeddings);
            QueryRecord& r = report.records[i];
            r.query_id = ex.query_id;
            r.truth = ex.pose;
            r.estimate = loc.pose;
            r.trans_error = translation_error(loc.pose.position, ex.pose.position);
            r.rot_error = rotation_error_deg(loc.pose.orientation, ex.pose.orientation);
            r.trans_trace = loc.uncertainty.trans_trace;
            r.rot_trace = loc.uncertainty.rot_trace;
            r.z = z_score(model.calibration, loc.uncertainty);
            r.nn_feature_distance = nn.distance;
            r.nn_trans_error = translation_error(nn.pose.position, ex.pose.position);
            r.nn_rot_error = rotation_error_deg(nn.pose.orientation, ex.pose.orientation);
            r.det_trans_error = translation_error(det.position, ex.pose.position);
            r.det_rot_error = rotation_error_deg(det.orientation, ex.pose.orientation);
        },
        threads);
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;

    report.summary = summarize(report.records);
    report.summary.num_samples = num_samples;
    report.summary.seed = seed;
    report.summary.wall_time_per_query_ms =
        dataset.test.empty() ? 0.0 : elapsed.count() / static_cast<double>(dataset.test.size());
    return report;
}

const SweepRow& SweepReport::row(std::size_t num_samples) const {
    for (const auto& r : rows) {
        if (r.num_samples == num_samples) return r;
    }
    throw Error(ErrorKind::InvalidArgument, "sweep has no row for " + std::to_string(num_samples) + " samples");
}

SweepReport run_sweep(const NetworkParams& net, std::span<const Example> test, std::vector<std::size_t> sample_counts,
                      std::size_t repetitions, std::uint64_t seed, std::size_t threads) {
    if (repetitions < 1) throw Error(ErrorKind::InvalidArgument, "repetitions must be >= 1");
    if (test.empty()) throw Error(ErrorKind::InvalidArgument, "sweep needs at least one test query");
    check_widths(net, test);
    sample_counts.push_back(0);
    std::sort(sample_counts.begin(), sample_counts.end());
    sample_counts.erase(std::unique(sample_counts.begin(), sample_counts.end()), sample_counts.end());

    SweepReport report;
    for (std::size_t count : sample_counts) {
        const std::size_t reps = count == 0 ? 1 : repetitions;
        std::vector<double> trans_medians;
        std::vector<double> rot_medians;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            const std::uint64_t rep_seed = derive_seed(seed, rep);
            std::vector<double> te(test.size());
            std::vector<double> re(test.size());
            parallel_for(
                test.size(),
                [&](std::size_t i) {
                    const Example& ex = test[i];
                    const Pose est = count == 0
                                         ? forward(net, ex.features).to_pose()
                                         : localize(net, ex.features, count, derive_seed(rep_seed, i)).pose;
                    te[i] = translation_error(est.position, ex.pose.position);
                    re[i] = rotation_error_deg(est.orientation, ex.pose.orientation);
                },
                threads);
            trans_medians.push_back(lower_median(te));
            rot_medians.push_back(lower_median(re));
        }
        report.rows.push_back({count, mean(trans_medians), mean(rot_medians), sample_stddev(trans_medians),
                               sample_stddev(rot_medians), reps});
    }
    return report;
}

std::vector<HistogramRow> run_histogram(const EvalReport& report, std::span<const double> thresholds) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
        throw Error(ErrorKind::InvalidArgument, "histogram thresholds must be sorted ascending");
    }
    const double n = static_cast<double>(report.records.size());
    std::vector<HistogramRow> rows;
    for (double t : thresholds) {
        std::size_t trans = 0;
        std::size_t rot = 0;
        for (const auto& r : report.records) {
            trans += r.trans_error <= t ? 1 : 0;
            rot += r.rot_error <= t ? 1 : 0;
        }
        rows.push_back({t, n > 0 ? static_cast<double>(trans) / n : 0.0, n > 0 ? static_cast<double>(rot) / n : 0.0});
    }
    return rows;
}

TimingReport run_timing(const NetworkParams& net, std::span<const Example> test, std::size_t num_samples,
                        std::uint64_t seed, std::size_t min_queries) {
    if (test.empty()) throw Error(ErrorKind::InvalidArgument, "timing needs at least one query");
    check_widths(net, test);
    const std::size_t queries = std::max(min_queries, test.size());
    std::vector<double> ms;
    ms.reserve(queries);
    double sink = 0.0;
    for (std::size_t i = 0; i < queries; ++i) {
        const auto& ex = test[i % test.size()];
        const auto start = std::chrono::steady_clock::now();
        const Localization loc = localize(net, ex.features, num_samples, derive_seed(seed, i));
        const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
        sink += loc.uncertainty.trans_trace;
        ms.push_back(elapsed.count());
    }
    (void)sink;
    return {num_samples, queries, mean(ms), percentile(ms, 0.5), percentile(ms, 0.99)};
}

std::string format_query_table(const EvalReport& report) {
    std::ostringstream os;
    os.precision(17);
    os << "# " << kQueryTag << " samples=" << report.summary.num_samples << " seed=" << report.summary.seed << '\n';
    os << "query_id\ttx\tty\ttz\tqw\tqx\tqy\tqz\test_tx\test_ty\test_tz\test_qw\test_qx\test_qy\test_qz"
          "\ttrans_error_m\trot_error_deg\ttrans_trace\trot_trace\tz_trans\tz_rot\tz_combined"
          "\tnn_feature_distance\tnn_trans_error_m\tnn_rot_error_deg\tdet_trans_error_m\tdet_rot_error_deg\n";
    for (const auto& r : report.records) {
        const auto& t = r.truth;
        const auto& e = r.estimate;
        os << r.query_id << '\t' << t.position.x << '\t' << t.position.y << '\t' << t.position.z << '\t'
           << t.orientation.w() << '\t' << t.orientation.x() << '\t' << t.orientation.y() << '\t'
           << t.orientation.z() << '\t' << e.position.x << '\t' << e.position.y << '\t' << e.position.z << '\t'
           << e.orientation.w() << '\t' << e.orientation.x() << '\t' << e.orientation.y() << '\t'
           << e.orientation.z() << '\t' << r.trans_error << '\t' << r.rot_error << '\t' << r.trans_trace << '\t'
           << r.rot_trace << '\t' << r.z.trans_pct << '\t' << r.z.rot_pct << '\t' << r.z.combined << '\t'
           << r.nn_feature_distance << '\t' << r.nn_trans_error << '\t' << r.nn_rot_error << '\t'
           << r.det_trans_error << '\t' << r.det_rot_error << '\n';
    }
    return os.str();
}

EvalReport parse_query_table(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    EvalReport report;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line_no == 1 && line.rfind(std::string("# ") + kQueryTag, 0) != 0) {
                throw Error(ErrorKind::ParseError, std::string("line 1: missing ") + kQueryTag + " tag");
            }
            std::istringstream meta(line.substr(2));
            std::string token;
            while (meta >> token) {
                if (token.rfind("samples=", 0) == 0) report.summary.num_samples = std::stoull(token.substr(8));
                if (token.rfind("seed=", 0) == 0) report.summary.seed = std::stoull(token.substr(5));
            }
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        QueryRecord r;
        double v[26];
        row >> r.query_id;
        for (double& x : v) {
            if (!(row >> x)) {
                throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected 27 columns");
            }
        }
        r.truth = {{v[0], v[1], v[2]}, UnitQuaternion::normalize(v[3], v[4], v[5], v[6])};
        r.estimate = {{v[7], v[8], v[9]}, UnitQuaternion::normalize(v[10], v[11], v[12], v[13])};
        r.trans_error = v[14];
        r.rot_error = v[15];
        r.trans_trace = v[16];
        r.rot_trace = v[17];
        r.z = {v[18], v[19], v[20]};
        r.nn_feature_distance = v[21];
        r.nn_trans_error = v[22];
        r.nn_rot_error = v[23];
        r.det_trans_error = v[24];
        r.det_rot_error = v[25];
        report.records.push_back(std::move(r));
    }
    const std::size_t samples = report.summary.num_samples;
    const std::uint64_t seed = report.summary.seed;
    report.summary = summarize(report.records);
    report.summary.num_samples = samples;
    report.summary.seed = seed;
    return report;
}

std::string format_eval_summary(const EvalReport& report) {
    const EvalSummary& s = report.summary;
    nlohmann::json corr = nlohmann::json::array();
    for (const auto& c : s.correlations) {
        corr.push_back({{"pair", c.name}, {"spearman", optional_json(c.spearman)}, {"pearson", optional_json(c.pearson)}});
    }
    nlohmann::json j = {{"format", kEvalTag},
                        {"queries", s.queries},
                        {"num_samples", s.num_samples},
                        {"seed", s.seed},
                        {"median_convention", "lower median (element (n-1)/2 of the sorted errors)"},
                        {"median_trans_error_m", s.median_trans_error},
                        {"median_rot_error_deg", s.median_rot_error},
                        {"deterministic_baseline",
                         {{"median_trans_error_m", s.median_det_trans_error},
                          {"median_rot_error_deg", s.median_det_rot_error}}},
                        {"nearest_neighbour_baseline",
                         {{"median_trans_error_m", s.median_nn_trans_error},
                          {"median_rot_error_deg", s.median_nn_rot_error}}},
                        {"correlations", corr},
                        {"wall_time_per_query_ms", s.wall_time_per_query_ms}};
    return j.dump(2) + "\n";
}

std::string format_sweep(const SweepReport& report) {
    std::ostringstream os;
    os.precision(10);
    os << "# " << kSweepTag << " count 0 = deterministic maskless pass; repetitions re-randomize dropout seeds only\n";
    os << "num_samples\tmedian_trans_error_m\ttrans_std\tmedian_rot_error_deg\trot_std\trepetitions\n";
    for (const auto& r : report.rows) {
        os << r.num_samples << '\t' << r.median_trans_error << '\t' << r.trans_std << '\t' << r.median_rot_error
           << '\t' << r.rot_std << '\t' << r.repetitions << '\n';
    }
    return os.str();
}

std::string format_histogram(std::span<const HistogramRow> rows) {
    std::ostringstream os;
    os.precision(10);
    os << "# " << kHistTag << " cumulative fraction of queries with error <= threshold\n";
    os << "threshold\ttrans_fraction\trot_fraction\n";
    for (const auto& r : rows) os << r.threshold << '\t' << r.trans_fraction << '\t' << r.rot_fraction << '\n';
    return os.str();
}

std::string format_timing(std::span<const TimingReport> rows) {
    std::ostringstream os;
    os.precision(6);
    os << "# " << kTimingTag << " wall-clock per query, single thread; informational\n";
    os << "num_samples\tqueries\tmean_ms\tp50_ms\tp99_ms\n";
    for (const auto& r : rows) {
        os << r.num_samples << '\t' << r.queries << '\t' << r.mean_ms << '\t' << r.p50_ms << '\t' << r.p99_ms << '\n';
    }
    return os.str();
}

}  // namespace bayesreloc
