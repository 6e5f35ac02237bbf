#include "bayesreloc/scenes.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bayesreloc/error.hpp"
#include "bayesreloc/rng.hpp"

namespace bayesreloc {
namespace {

constexpr const char* kDataTag = "bayesreloc-data-v1";
constexpr const char* kSceneTag = "bayesreloc-scene-v1";
constexpr std::size_t kInjectivitySample = 1000;
constexpr double kInjectivityFloor = 1e-9;

enum Stream : std::uint64_t { kMapStream = 0, kPoseStream = 1, kNuisanceStream = 2, kNoiseStream = 3 };

std::uint64_t stream_seed(const SceneSpec& spec, Stream s) { return derive_seed(spec.generator_seed, s); }

double normalized(double v, const Range& r) { return 2.0 * (v - r.lo) / r.width() - 1.0; }

double deg(double d) { return d * std::numbers::pi / 180.0; }

// Yaw about z, then pitch about y, then roll about x.
UnitQuaternion from_yaw_pitch_roll(double yaw, double pitch, double roll) {
    const double cy = std::cos(0.5 * yaw), sy = std::sin(0.5 * yaw);
    const double cp = std::cos(0.5 * pitch), sp = std::sin(0.5 * pitch);
    const double cr = std::cos(0.5 * roll), sr = std::sin(0.5 * roll);
    return UnitQuaternion::normalize(cr * cp * cy + sr * sp * sy, sr * cp * cy - cr * sp * sy,
                                     cr * sp * cy + sr * cp * sy, cr * cp * sy - sr * sp * cy);
}

Pose draw_pose(const SceneSpec& spec, std::uint64_t draw_index) {
    Rng rng(stream_seed(spec, kPoseStream), draw_index);
    Pose pose;
    pose.position.x = rng.uniform(spec.x.lo, spec.x.hi);
    pose.position.y = rng.uniform(spec.y.lo, spec.y.hi);
    pose.position.z = rng.uniform(spec.z.lo, spec.z.hi);
    const double yaw = deg(rng.uniform(-spec.yaw_half_range_deg, spec.yaw_half_range_deg));
    const double pitch = deg(rng.uniform(-spec.tilt_half_range_deg, spec.tilt_half_range_deg));
    const double roll = deg(rng.uniform(-spec.tilt_half_range_deg, spec.tilt_half_range_deg));
    pose.orientation = from_yaw_pitch_roll(yaw, pitch, roll);
    return pose;
}

double parse_double(std::istringstream& row, std::size_t line_no, const char* what) {
    std::string token;
    if (!(row >> token)) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": missing " + what);
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != token.size()) {
        throw Error(ErrorKind::ParseError,
                    "line " + std::to_string(line_no) + ": '" + token + "' is not a number (" + what + ")");
    }
    if (!std::isfinite(v)) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": non-finite " + what);
    }
    return v;
}

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

Range range_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void SceneSpec::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidSpec, what); };
    for (const Range* r : {&x, &y, &z}) {
        if (!(std::isfinite(r->lo) && std::isfinite(r->hi) && r->hi > r->lo)) fail("extent ranges must be nonempty");
    }
    if (feature_dim < 4) fail("feature_dim must be >= 4");
    if (!(noise_sigma >= 0.0 && std::isfinite(noise_sigma))) fail("noise_sigma must be >= 0");
    if (!(nuisance_scale >= 0.0 && std::isfinite(nuisance_scale))) fail("nuisance_scale must be >= 0");
    if (aliasing_period && !(*aliasing_period > 0.0 && std::isfinite(*aliasing_period))) {
        fail("aliasing_period must be > 0");
    }
    if (!(yaw_half_range_deg >= 0.0 && yaw_half_range_deg <= 180.0)) fail("yaw half-range must lie in [0, 180]");
    if (!(tilt_half_range_deg >= 0.0 && tilt_half_range_deg <= 90.0)) fail("tilt half-range must lie in [0, 90]");
    if (hidden_width < 1) fail("generator hidden width must be >= 1");
    if (scene_id.empty() || scene_id.find_first_of(" \t\n") != std::string::npos) {
        fail("scene_id must be a nonempty token without whitespace");
    }
}

FeatureMap::FeatureMap(const SceneSpec& spec) : spec_(spec) {
    spec_.validate();
    const std::size_t in = 7 + spec_.nuisance_dim;
    const std::size_t hid = spec_.hidden_width;
    Rng rng(stream_seed(spec_, kMapStream), 0);
    const double gain1 = 2.0 / std::sqrt(static_cast<double>(in));
    const double gain2 = 1.0 / std::sqrt(static_cast<double>(hid));
    w1_.resize(hid * in);
    for (double& w : w1_) w = gain1 * rng.normal();
    b1_.resize(hid);
    for (double& b : b1_) b = rng.uniform(-1.0, 1.0);
    w2_.resize(spec_.feature_dim * hid);
    for (double& w : w2_) w = gain2 * rng.normal();
    b2_.resize(spec_.feature_dim);
    for (double& b : b2_) b = rng.uniform(-0.5, 0.5);
}

std::vector<double> FeatureMap::encode(const Pose& pose, std::span<const double> nuisance) const {
    if (nuisance.size() != spec_.nuisance_dim) {
        throw Error(ErrorKind::ShapeMismatch, "nuisance vector width does not match the scene");
    }
    double x = pose.position.x;
    double nx = 0.0;
    if (spec_.aliasing_period) {
        const double period = *spec_.aliasing_period;
        double m = std::fmod(x - spec_.x.lo, period);
        if (m < 0.0) m += period;
        nx = 2.0 * m / period - 1.0;
    } else {
        nx = normalized(x, spec_.x);
    }
    const auto& q = pose.orientation.components();
    std::vector<double> e{nx, normalized(pose.position.y, spec_.y), normalized(pose.position.z, spec_.z),
                          q[0], q[1], q[2], q[3]};
    for (double n : nuisance) e.push_back(spec_.nuisance_scale * n);
    return e;
}

std::vector<double> FeatureMap::features(const Pose& pose, std::span<const double> nuisance) const {
    const std::vector<double> e = encode(pose, nuisance);
    const std::size_t in = e.size();
    const std::size_t hid = spec_.hidden_width;
    std::vector<double> h(hid);
    for (std::size_t r = 0; r < hid; ++r) {
        double acc = b1_[r];
        for (std::size_t c = 0; c < in; ++c) acc += w1_[r * in + c] * e[c];
        h[r] = std::tanh(acc);
    }
    std::vector<double> f(spec_.feature_dim);
    for (std::size_t r = 0; r < f.size(); ++r) {
        double acc = b2_[r];
        for (std::size_t c = 0; c < hid; ++c) acc += w2_[r * hid + c] * h[c];
        f[r] = acc;
    }
    return f;
}

std::vector<double> draw_nuisance(const SceneSpec& spec, std::uint64_t draw_index) {
    Rng rng(stream_seed(spec, kNuisanceStream), draw_index);
    std::vector<double> n(spec.nuisance_dim);
    for (double& v : n) v = rng.normal();
    if (spec.nuisance_dof > 0) {
        // One chi-square scale per draw, so a draw is unusual in all dimensions at once.
        double chi2 = 0.0;
        for (std::size_t i = 0; i < spec.nuisance_dof; ++i) {
            const double z = rng.normal();
            chi2 += z * z;
        }
        const double scale = std::sqrt(static_cast<double>(spec.nuisance_dof) / std::max(chi2, 1e-300));
        for (double& v : n) v *= scale;
    }
    return n;
}

Example draw_example(const SceneSpec& spec, const FeatureMap& map, std::uint64_t draw_index,
                     std::string query_id) {
    Example ex;
    ex.query_id = std::move(query_id);
    ex.pose = draw_pose(spec, draw_index);
    ex.features = map.features(ex.pose, draw_nuisance(spec, draw_index));
    if (spec.noise_sigma > 0.0) {
        Rng noise(stream_seed(spec, kNoiseStream), draw_index);
        for (double& f : ex.features) f += spec.noise_sigma * noise.normal();
    }
    return ex;
}

double min_feature_separation(const SceneSpec& spec, std::size_t count) {
    const FeatureMap map(spec);
    std::vector<std::vector<double>> feats;
    feats.reserve(count);
    for (std::size_t i = 0; i < count; ++i) feats.push_back(map.features(draw_pose(spec, i), draw_nuisance(spec, i)));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = i + 1; j < count; ++j) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < feats[i].size(); ++c) {
                const double d = feats[i][c] - feats[j][c];
                d2 += d * d;
            }
            best = std::min(best, std::sqrt(d2));
        }
    }
    return best;
}

SceneDataset generate_scene(const SceneSpec& spec, std::size_t n_train, std::size_t n_calib, std::size_t n_test) {
    spec.validate();
    if (n_train < 1 || n_test < 1) throw Error(ErrorKind::InvalidSpec, "split sizes must be >= 1");
    if (n_calib < 8) throw Error(ErrorKind::InvalidSpec, "calibration split needs at least 8 examples");
    if (!spec.aliasing_period && min_feature_separation(spec, kInjectivitySample) <= kInjectivityFloor) {
        throw Error(ErrorKind::InvalidSpec, "feature map is not injective on the validation sample");
    }
    const FeatureMap map(spec);
    SceneDataset ds;
    ds.spec = spec;
    std::uint64_t draw = 0;
    auto fill = [&](std::vector<Example>& split, std::size_t n, const char* name) {
        split.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::ostringstream id;
            id << spec.scene_id << '/' << name << '/';
            id.width(6);
            id.fill('0');
            id << i;
            split.push_back(draw_example(spec, map, draw++, id.str()));
        }
    };
    fill(ds.train, n_train, "train");
    fill(ds.calib, n_calib, "calib");
    fill(ds.test, n_test, "test");
    return ds;
}

std::string format_examples(std::span<const Example> examples, std::size_t feature_dim) {
    std::ostringstream os;
    os.precision(17);
    os << kDataTag << " feature_dim=" << feature_dim << '\n';
    os << "# query_id tx ty tz qw qx qy qz f1..f" << feature_dim << '\n';
    for (const auto& ex : examples) {
        if (ex.features.size() != feature_dim) {
            throw Error(ErrorKind::ShapeMismatch, "example '" + ex.query_id + "' has the wrong feature width");
        }
        const auto& p = ex.pose.position;
        const auto& q = ex.pose.orientation;
        os << ex.query_id << ' ' << p.x << ' ' << p.y << ' ' << p.z << ' ' << q.w() << ' ' << q.x() << ' '
           << q.y() << ' ' << q.z();
        for (double f : ex.features) os << ' ' << f;
        os << '\n';
    }
    return os.str();
}

std::vector<Example> parse_examples(const std::string& text, std::size_t* feature_dim) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    bool have_header = false;
    std::vector<Example> out;
    while (std::getline(is, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream row(line);
        if (!have_header) {
            std::string tag, dim_field;
            row >> tag >> dim_field;
            if (tag != kDataTag || dim_field.rfind("feature_dim=", 0) != 0) {
                throw Error(ErrorKind::ParseError,
                            "line " + std::to_string(line_no) + ": expected '" + kDataTag + " feature_dim=<D>'");
            }
            try {
                dim = std::stoull(dim_field.substr(12));
            } catch (const std::exception&) {
                throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": bad feature_dim");
            }
            have_header = true;
            continue;
        }
        Example ex;
        row >> ex.query_id;
        double v[7];
        static constexpr const char* names[] = {"tx", "ty", "tz", "qw", "qx", "qy", "qz"};
        for (int i = 0; i < 7; ++i) v[i] = parse_double(row, line_no, names[i]);
        ex.pose.position = {v[0], v[1], v[2]};
        try {
            ex.pose.orientation = UnitQuaternion::normalize(v[3], v[4], v[5], v[6]);
        } catch (const Error&) {
            throw Error(ErrorKind::DegenerateQuaternion, "line " + std::to_string(line_no) + ": zero quaternion");
        }
        ex.features.reserve(dim);
        for (std::size_t i = 0; i < dim; ++i) ex.features.push_back(parse_double(row, line_no, "feature"));
        std::string extra;
        if (row >> extra) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": more than " +
                                                   std::to_string(dim) + " feature columns");
        }
        out.push_back(std::move(ex));
    }
    if (!have_header) throw Error(ErrorKind::ParseError, std::string("missing '") + kDataTag + "' header");
    if (feature_dim != nullptr) *feature_dim = dim;
    return out;
}

std::string format_scene_spec(const SceneSpec& spec) {
    nlohmann::json j = {{"format", kSceneTag},
                        {"scene_id", spec.scene_id},
                        {"x_range", range_json(spec.x)},
                        {"y_range", range_json(spec.y)},
                        {"z_range", range_json(spec.z)},
                        {"feature_dim", spec.feature_dim},
                        {"nuisance_dim", spec.nuisance_dim},
                        {"nuisance_scale", spec.nuisance_scale},
                        {"nuisance_dof", spec.nuisance_dof},
                        {"noise_sigma", spec.noise_sigma},
                        {"aliasing_period", spec.aliasing_period ? nlohmann::json(*spec.aliasing_period)
                                                                 : nlohmann::json(nullptr)},
                        {"generator_seed", spec.generator_seed},
                        {"yaw_half_range_deg", spec.yaw_half_range_deg},
                        {"tilt_half_range_deg", spec.tilt_half_range_deg},
                        {"hidden_width", spec.hidden_width}};
    return j.dump(2) + "\n";
}

SceneSpec parse_scene_spec(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.value("format", std::string()) != kSceneTag) {
            throw Error(ErrorKind::ParseError, std::string("missing format tag ") + kSceneTag);
        }
        SceneSpec spec;
        spec.scene_id = j.value("scene_id", spec.scene_id);
        if (j.contains("x_range")) spec.x = range_from(j["x_range"]);
        if (j.contains("y_range")) spec.y = range_from(j["y_range"]);
        if (j.contains("z_range")) spec.z = range_from(j["z_range"]);
        spec.feature_dim = j.value("feature_dim", spec.feature_dim);
        spec.nuisance_dim = j.value("nuisance_dim", spec.nuisance_dim);
        spec.nuisance_scale = j.value("nuisance_scale", spec.nuisance_scale);
        spec.nuisance_dof = j.value("nuisance_dof", spec.nuisance_dof);
        spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
        if (j.contains("aliasing_period") && !j["aliasing_period"].is_null()) {
            spec.aliasing_period = j["aliasing_period"].get<double>();
        }
        spec.generator_seed = j.value("generator_seed", spec.generator_seed);
        spec.yaw_half_range_deg = j.value("yaw_half_range_deg", spec.yaw_half_range_deg);
        spec.tilt_half_range_deg = j.value("tilt_half_range_deg", spec.tilt_half_range_deg);
        spec.hidden_width = j.value("hidden_width", spec.hidden_width);
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("scene spec: ") + e.what());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::vector<Example> load_examples(const std::filesystem::path& path) {
    try {
        return parse_examples(read_text_file(path));
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

void save_dataset(const std::filesystem::path& dir, const SceneDataset& dataset) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "scene.json", format_scene_spec(dataset.spec));
    write_text_file(dir / "train.txt", format_examples(dataset.train, dataset.spec.feature_dim));
    write_text_file(dir / "calib.txt", format_examples(dataset.calib, dataset.spec.feature_dim));
    write_text_file(dir / "test.txt", format_examples(dataset.test, dataset.spec.feature_dim));
}

SceneDataset load_dataset(const std::filesystem::path& dir) {
    SceneDataset ds;
    ds.spec = parse_scene_spec(read_text_file(dir / "scene.json"));
    ds.train = load_examples(dir / "train.txt");
    ds.calib = load_examples(dir / "calib.txt");
    ds.test = load_examples(dir / "test.txt");
    std::set<std::string> ids;
    for (const auto* split : {&ds.train, &ds.calib, &ds.test}) {
        for (const auto& ex : *split) {
            if (ex.features.size() != ds.spec.feature_dim) {
                throw Error(ErrorKind::ShapeMismatch, "example '" + ex.query_id + "' does not match scene feature_dim");
            }
            if (!ids.insert(ex.query_id).second) {
                throw Error(ErrorKind::ParseError, "query id '" + ex.query_id + "' appears in more than one row");
            }
        }
    }
    return ds;
}

NeighbourMatch nearest_neighbour_pose(std::span<const Example> train, std::span<const double> query_embedding,
                                      std::span<const std::vector<double>> train_embeddings) {
    if (train.empty() || train.size() != train_embeddings.size()) {
        throw Error(ErrorKind::ShapeMismatch, "need one embedding per (nonempty) training example");
    }
    NeighbourMatch best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto& e = train_embeddings[i];
        if (e.size() != query_embedding.size()) {
            throw Error(ErrorKind::ShapeMismatch, "embedding widths differ");
        }
        double d2 = 0.0;
        for (std::size_t c = 0; c < e.size(); ++c) {
            const double d = e[c] - query_embedding[c];
            d2 += d * d;
        }
        if (d2 < best_d2) {
            best_d2 = d2;
            best.index = i;
        }
    }
    best.pose = train[best.index].pose;
    best.distance = std::sqrt(best_d2);
    return best;
}

}  // namespace bayesreloc
