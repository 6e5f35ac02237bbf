#include "bayesreloc/mc_posterior.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "bayesreloc/error.hpp"
#include "bayesreloc/linalg.hpp"

namespace bayesreloc {
namespace {

// Covariance (N - 1 denominator) of rows shifted by row 0, so identical
// samples give exactly zero.
template <std::size_t D>
std::array<double, D * D> covariance(const std::vector<std::array<double, D>>& rows,
                                     std::array<double, D>& mean) {
    const std::size_t n = rows.size();
    const auto& origin = rows.front();
    std::array<double, D> shift_mean{};
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < D; ++i) shift_mean[i] += r[i] - origin[i];
    }
    for (auto& v : shift_mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < D; ++i) mean[i] = origin[i] + shift_mean[i];

    std::array<double, D * D> cov{};
    if (n < 2) return cov;
    for (const auto& r : rows) {
        std::array<double, D> d{};
        for (std::size_t i = 0; i < D; ++i) d[i] = (r[i] - origin[i]) - shift_mean[i];
        for (std::size_t i = 0; i < D; ++i) {
            for (std::size_t j = 0; j < D; ++j) cov[i * D + j] += d[i] * d[j];
        }
    }
    for (auto& v : cov) v /= static_cast<double>(n - 1);
    return cov;
}

std::vector<std::array<double, 3>> position_rows(const PoseSampleSet& s) {
    std::vector<std::array<double, 3>> rows;
    rows.reserve(s.size());
    for (const auto& p : s.positions()) rows.push_back({p.x, p.y, p.z});
    return rows;
}

std::vector<std::array<double, 4>> quaternion_rows(const PoseSampleSet& s) {
    std::vector<std::array<double, 4>> rows;
    rows.reserve(s.size());
    for (const auto& q : s.quaternions()) rows.push_back(q.components());
    return rows;
}

template <std::size_t D>
double trace(const std::array<double, D * D>& m) {
    double t = 0.0;
    for (std::size_t i = 0; i < D; ++i) t += m[i * D + i];
    return t;
}

template <typename Eval>
PoseSampleSet draw(const NetworkParams& net, std::size_t num_samples, std::uint64_t master_seed,
                   Eval&& eval) {
    if (num_samples < 1) throw Error(ErrorKind::InvalidArgument, "num_samples must be >= 1");
    std::vector<Vec3> positions;
    std::vector<UnitQuaternion> quaternions;
    positions.reserve(num_samples);
    quaternions.reserve(num_samples);
    for (std::size_t i = 0; i < num_samples; ++i) {
        const DropoutMask mask = sample_mask(net, master_seed, i);
        const Pose pose = eval(mask).to_pose();
        positions.push_back(pose.position);
        quaternions.push_back(pose.orientation);
    }
    return PoseSampleSet(std::move(positions), std::move(quaternions), master_seed);
}

}  // namespace

PoseSampleSet::PoseSampleSet(std::vector<Vec3> positions, std::vector<UnitQuaternion> quaternions,
                             std::uint64_t master_seed)
    : positions_(std::move(positions)), quaternions_(std::move(quaternions)), master_seed_(master_seed) {
    if (positions_.empty() || positions_.size() != quaternions_.size()) {
        throw Error(ErrorKind::InvalidArgument, "sample set needs N >= 1 matching position and quaternion rows");
    }
    const UnitQuaternion ref = quaternions_.front().canonical();
    for (auto& q : quaternions_) {
        if (ref.dot(q) < 0.0) q = -q;
    }
}

PoseSampleSet sample_posterior(const NetworkParams& net, std::span<const double> input,
                               std::size_t num_samples, std::uint64_t master_seed) {
    // Layers ahead of the first dropout layer are identical in every pass.
    const std::size_t start = std::min(first_dropout_layer(net), net.layers.size() - 1);
    const std::vector<double> prefix = forward_prefix(net, input, start);
    return draw(net, num_samples, master_seed,
                [&](const DropoutMask& mask) { return forward_suffix(net, start, prefix, &mask); });
}

PoseSampleSet sample_aux_posterior(const NetworkParams& net, std::span<const double> input,
                                   std::size_t num_samples, std::uint64_t master_seed) {
    return draw(net, num_samples, master_seed,
                [&](const DropoutMask& mask) { return forward_aux(net, input, &mask); });
}

UncertaintyEstimate estimate(const PoseSampleSet& samples) {
    UncertaintyEstimate out;
    std::array<double, 3> pmean{};
    const auto pcov = covariance<3>(position_rows(samples), pmean);
    std::array<double, 4> qmean{};
    const auto qcov = covariance<4>(quaternion_rows(samples), qmean);

    out.trans_mean = {pmean[0], pmean[1], pmean[2]};
    out.rot_mean = quaternion_mean(samples.quaternions());
    out.trans_trace = trace<3>(pcov);
    out.rot_trace = trace<4>(qcov);
    out.degenerate = samples.size() < 2 || (out.trans_trace == 0.0 && out.rot_trace == 0.0);
    return out;
}

DeterminantEstimate estimate_determinant(const PoseSampleSet& samples) {
    if (samples.size() < 2) {
        throw Error(ErrorKind::InvalidArgument, "determinant estimate needs N >= 2");
    }
    std::array<double, 3> pmean{};
    const auto pcov = covariance<3>(position_rows(samples), pmean);
    std::array<double, 4> qmean{};
    const auto qcov = covariance<4>(quaternion_rows(samples), qmean);
    return {determinant(std::span<const double>(pcov), 3), determinant(std::span<const double>(qcov), 4)};
}

Localization localize(const NetworkParams& net, std::span<const double> input, std::size_t num_samples,
                      std::uint64_t master_seed) {
    const UncertaintyEstimate u = estimate(sample_posterior(net, input, num_samples, master_seed));
    return {{u.trans_mean, u.rot_mean}, u};
}

std::string format_samples(const PoseSampleSet& samples, const std::string& query_id) {
    std::ostringstream os;
    os.precision(17);
    os << "# bayesreloc-samples-v1 query_id=" << query_id << " n=" << samples.size()
       << " master_seed=" << samples.master_seed() << '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& p = samples.positions()[i];
        const auto& q = samples.quaternions()[i];
        os << i << ' ' << p.x << ' ' << p.y << ' ' << p.z << ' ' << q.w() << ' ' << q.x() << ' '
           << q.y() << ' ' << q.z() << '\n';
    }
    return os.str();
}

PoseSampleSet parse_samples(const std::string& text, std::string* query_id) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line.rfind("# bayesreloc-samples-v1", 0) != 0) {
        throw Error(ErrorKind::ParseError, "line 1: missing bayesreloc-samples-v1 header");
    }
    std::uint64_t seed = 0;
    std::size_t expected = 0;
    std::istringstream header(line.substr(2));
    std::string token;
    header >> token;
    while (header >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "query_id" && query_id != nullptr) *query_id = value;
        if (key == "n") expected = std::stoull(value);
        if (key == "master_seed") seed = std::stoull(value);
    }
    std::vector<Vec3> positions;
    std::vector<UnitQuaternion> quaternions;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        std::size_t idx = 0;
        double v[7];
        if (!(row >> idx >> v[0] >> v[1] >> v[2] >> v[3] >> v[4] >> v[5] >> v[6])) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": malformed sample row");
        }
        positions.push_back({v[0], v[1], v[2]});
        quaternions.push_back(UnitQuaternion::normalize(v[3], v[4], v[5], v[6]));
    }
    if (positions.size() != expected) {
        throw Error(ErrorKind::ParseError, "sample count does not match header n=" + std::to_string(expected));
    }
    return PoseSampleSet(std::move(positions), std::move(quaternions), seed);
}

}  // namespace bayesreloc
