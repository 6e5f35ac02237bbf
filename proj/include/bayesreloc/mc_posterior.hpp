#pragma once

// Monte Carlo dropout inference: repeated stochastic forward passes, the sample
// mean as the pose estimate and covariance traces as uncertainty.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bayesreloc/geometry.hpp"
#include "bayesreloc/regressor.hpp"

namespace bayesreloc {

inline constexpr std::size_t kDefaultSampleCount = 40;
inline constexpr std::size_t kMaxSampleCount = 128;

// Pose samples with quaternions hemisphere-aligned to row 0, and row 0 in
// canonical sign. Sign flips of the inputs therefore yield an identical set.
class PoseSampleSet {
public:
    PoseSampleSet(std::vector<Vec3> positions, std::vector<UnitQuaternion> quaternions,
                  std::uint64_t master_seed);

    std::size_t size() const noexcept { return positions_.size(); }
    const std::vector<Vec3>& positions() const noexcept { return positions_; }
    const std::vector<UnitQuaternion>& quaternions() const noexcept { return quaternions_; }
    std::uint64_t master_seed() const noexcept { return master_seed_; }

private:
    std::vector<Vec3> positions_;
    std::vector<UnitQuaternion> quaternions_;
    std::uint64_t master_seed_;
};

struct UncertaintyEstimate {
    double trans_trace = 0.0;  // m^2
    double rot_trace = 0.0;    // quaternion-component variance
    Vec3 trans_mean;
    UnitQuaternion rot_mean;
    // Set when the traces are zero because N = 1 or every sample is identical.
    bool degenerate = false;
};

struct DeterminantEstimate {
    double trans_det = 0.0;
    double rot_det = 0.0;
};

struct Localization {
    Pose pose;
    UncertaintyEstimate uncertainty;
};

// Pass i uses the mask drawn from stream (master_seed, i).
PoseSampleSet sample_posterior(const NetworkParams& net, std::span<const double> input,
                               std::size_t num_samples, std::uint64_t master_seed);

// Same procedure on the aux head; requires a network with one.
PoseSampleSet sample_aux_posterior(const NetworkParams& net, std::span<const double> input,
                                   std::size_t num_samples, std::uint64_t master_seed);

// Sample covariances use the N - 1 denominator.
UncertaintyEstimate estimate(const PoseSampleSet& samples);
DeterminantEstimate estimate_determinant(const PoseSampleSet& samples);

Localization localize(const NetworkParams& net, std::span<const double> input,
                      std::size_t num_samples = kDefaultSampleCount, std::uint64_t master_seed = 0);

// Sample-dump text: header "# bayesreloc-samples-v1 query_id=<id> n=<N> master_seed=<seed>",
// then "sample_index px py pz qw qx qy qz" rows.
std::string format_samples(const PoseSampleSet& samples, const std::string& query_id);
PoseSampleSet parse_samples(const std::string& text, std::string* query_id = nullptr);

}  // namespace bayesreloc
