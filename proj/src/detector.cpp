#include "bayesreloc/detector.hpp"

#include <algorithm>
#include <sstream>

#include "bayesreloc/error.hpp"
#include "bayesreloc/mc_posterior.hpp"
#include "bayesreloc/parallel.hpp"
#include "bayesreloc/rng.hpp"

namespace bayesreloc {
namespace {

std::vector<ZScore> score_all(std::span<const SceneModel> models, std::span<const double> input,
                              std::size_t num_samples, std::uint64_t master_seed) {
    std::vector<ZScore> scores;
    scores.reserve(models.size());
    for (const auto& m : models) {
        const Localization loc = localize(m.network, input, num_samples, master_seed);
        scores.push_back(z_score(m.calibration, loc.uncertainty));
    }
    return scores;
}

ConfusionMatrix empty_matrix(const std::vector<std::string>& ids) {
    return {ids, std::vector<std::vector<std::size_t>>(ids.size(), std::vector<std::size_t>(ids.size(), 0))};
}

}  // namespace

void SceneModel::validate() const {
    if (calibration.source_scene != scene_id) {
        throw Error(ErrorKind::InvalidArgument, "calibration for scene '" + calibration.source_scene +
                                                    "' attached to model '" + scene_id + "'");
    }
}

double channel_score(const ZScore& z, ScoreChannel channel) noexcept {
    switch (channel) {
        case ScoreChannel::Translation: return z.trans_pct;
        case ScoreChannel::Rotation: return z.rot_pct;
        case ScoreChannel::Combined: break;
    }
    return z.combined;
}

Detection classify(std::span<const SceneModel> models, std::vector<ZScore> scores, ScoreChannel channel) {
    if (scores.empty() || scores.size() != models.size()) {
        throw Error(ErrorKind::ShapeMismatch, "need one score per model");
    }
    Detection d;
    double best = channel_score(scores[0], channel);
    for (std::size_t i = 1; i < scores.size(); ++i) {
        const double s = channel_score(scores[i], channel);
        if (s < best) {
            best = s;
            d.scene_index = i;
        }
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i != d.scene_index && channel_score(scores[i], channel) == best) d.tie = true;
    }
    d.scene_id = models[d.scene_index].scene_id;
    d.scores = std::move(scores);
    return d;
}

Detection detect(std::span<const SceneModel> models, std::span<const double> input, std::size_t num_samples,
                 std::uint64_t master_seed, ScoreChannel channel) {
    if (models.size() < 2) throw Error(ErrorKind::InvalidArgument, "detection needs at least two scene models");
    for (const auto& m : models) m.validate();
    return classify(models, score_all(models, input, num_samples, master_seed), channel);
}

std::size_t ConfusionMatrix::total() const noexcept {
    std::size_t t = 0;
    for (const auto& row : counts) {
        for (std::size_t c : row) t += c;
    }
    return t;
}

std::size_t ConfusionMatrix::correct() const noexcept {
    std::size_t t = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
    return t;
}

double ConfusionMatrix::accuracy() const noexcept {
    const std::size_t t = total();
    return t == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(t);
}

ConfusionReport confusion(std::span<const SceneModel> models, std::span<const SceneQueries> test_sets,
                          std::size_t num_samples, std::uint64_t seed, std::span<const std::string> excluded,
                          std::size_t threads) {
    auto is_excluded = [&](const std::string& id) {
        return std::find(excluded.begin(), excluded.end(), id) != excluded.end();
    };
    std::vector<SceneModel> kept;
    std::vector<std::string> ids;
    for (const auto& m : models) {
        m.validate();
        if (is_excluded(m.scene_id)) continue;
        kept.push_back(m);
        ids.push_back(m.scene_id);
    }
    if (kept.empty()) throw Error(ErrorKind::InvalidArgument, "no scene models left after exclusions");

    struct Query {
        std::size_t true_index;
        const Example* example;
    };
    std::vector<Query> queries;
    for (const auto& set : test_sets) {
        if (is_excluded(set.scene_id)) continue;
        const auto it = std::find(ids.begin(), ids.end(), set.scene_id);
        if (it == ids.end()) {
            throw Error(ErrorKind::InvalidArgument, "test set '" + set.scene_id + "' has no scene model");
        }
        const auto row = static_cast<std::size_t>(it - ids.begin());
        for (const auto& ex : set.queries) queries.push_back({row, &ex});
    }

    std::vector<std::vector<ZScore>> scores(queries.size());
    parallel_for(
        queries.size(),
        [&](std::size_t q) {
            scores[q] = score_all(kept, queries[q].example->features, num_samples, derive_seed(seed, q));
        },
        threads);

    ConfusionReport report{empty_matrix(ids), empty_matrix(ids), empty_matrix(ids)};
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const std::size_t row = queries[q].true_index;
        report.combined.counts[row][classify(kept, scores[q], ScoreChannel::Combined).scene_index]++;
        report.translation.counts[row][classify(kept, scores[q], ScoreChannel::Translation).scene_index]++;
        report.rotation.counts[row][classify(kept, scores[q], ScoreChannel::Rotation).scene_index]++;
    }
    return report;
}

std::string format_confusion(const ConfusionMatrix& matrix) {
    std::ostringstream os;
    os << "# bayesreloc-confusion-v1 rows=true columns=predicted\n";
    os << "true\\predicted";
    for (const auto& id : matrix.scene_ids) os << '\t' << id;
    os << '\n';
    for (std::size_t r = 0; r < matrix.counts.size(); ++r) {
        os << matrix.scene_ids[r];
        for (std::size_t c : matrix.counts[r]) os << '\t' << c;
        os << '\n';
    }
    os.precision(6);
    os << std::fixed << "# accuracy " << matrix.accuracy() << " (" << matrix.correct() << "/" << matrix.total()
       << ")\n";
    return os.str();
}

}  // namespace bayesreloc
