#ifndef COLLABSIM_BEHAVIORSIM_HPP
#define COLLABSIM_BEHAVIORSIM_HPP

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "collabsim/common.hpp"
#include "collabsim/logmodel.hpp"
#include "collabsim/profile.hpp"

namespace collabsim {

struct RegressionForest;

/// Rounded Gaussian over per-participant counts, truncated below at min_count
/// (redrawn when min_count is 1, clamped when it is 0).
struct CountLaw {
    double mean = 0.0;
    double std = 0.0;
    long min_count = 0;

    long sample(Rng& rng) const;
    bool operator==(const CountLaw&) const = default;
};

/// Normalised histogram on [lo, hi]; sampling is uniform within a bin.
struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> mass;

    double sample(Rng& rng) const;
    /// Bin probabilities of `samples` on this histogram's edges.
    std::vector<double> bin(std::span<const double> samples) const;
    bool operator==(const Histogram&) const = default;
};

/// Histogram of `samples` on [min, max] with `n_bins` bins, normalised.
Histogram make_histogram(std::span<const double> samples, int n_bins);
/// Same, on fixed edges [lo, hi].
Histogram make_histogram(std::span<const double> samples, int n_bins, double lo, double hi);

/// Centered moving average with edge windows truncated to the available bins.
std::vector<double> smooth_moving_average(const std::vector<double>& values, int window = 3);

struct SpeakingGenerator {
    CountLaw count;
    Histogram start_hist;  // over normalised session time [0, 1]
    Histogram duration_hist;
    bool operator==(const SpeakingGenerator&) const = default;
};

struct GazeGenerator {
    CountLaw count;
    int rate_bins = 32;
    /// Mean DFT of the per-participant normalised start histograms: DC and
    /// the first harmonics.
    std::vector<std::complex<double>> spectrum;
    Histogram duration_hist;
    std::vector<std::pair<std::string, double>> object_frequency;
    bool operator==(const GazeGenerator&) const = default;
};

struct LocomotionGenerator {
    CountLaw count;
    double initial_time = 0.0;
    Eigen::Vector3d initial_mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d initial_cov = Eigen::Matrix3d::Zero();
    Eigen::Vector4d transition_mean = Eigen::Vector4d::Zero();  // (dt, dx, dy, dz)
    Eigen::Matrix4d transition_cov = Eigen::Matrix4d::Zero();
    Eigen::Vector3d box_min = Eigen::Vector3d::Zero();
    Eigen::Vector3d box_max = Eigen::Vector3d::Zero();
    bool operator==(const LocomotionGenerator&) const = default;
};

struct ClusterGenerators {
    std::vector<std::optional<SpeakingGenerator>> speaking;
    std::vector<std::optional<GazeGenerator>> gaze;
    std::vector<std::optional<LocomotionGenerator>> location;
    std::vector<std::string> warnings;  // e.g. empty clusters

    ClusterCounts counts() const {
        return {static_cast<int>(speaking.size()), static_cast<int>(gaze.size()), static_cast<int>(location.size())};
    }
    bool operator==(const ClusterGenerators&) const = default;
};

struct ClusterLabels {
    int k = 0;
    std::vector<int> labels;  // one per participant, session-then-participant order
};

struct CorpusLabels {
    ClusterLabels speaking;
    ClusterLabels gaze;
    ClusterLabels location;
};

struct GeneratorOptions {
    int start_bins = 32;
    int duration_bins = 32;
    int rate_bins = 32;
    int harmonics = 3;
    int smoothing_window = 3;
};

ClusterGenerators build_generators(const std::vector<GroupSession>& corpus, const CorpusLabels& labels,
                                   const GeneratorOptions& options = {});

std::vector<SpeakingEvent> simulate_speaking(const ClusterGenerators& gens, int cluster, double duration,
                                             std::uint64_t seed, const std::string& participant_id = "p0");

struct GazeSimulation {
    std::vector<GazeEvent> events;
    bool uniform_fallback = false;  // rate curve clipped to zero
};

/// Rate curve from the stored spectrum, negatives clipped, as a density over
/// `rate_bins` bins. Sets `fallback` and returns a flat curve when it clips to zero.
std::vector<double> gaze_rate_density(const GazeGenerator& gen, bool& fallback);

GazeSimulation simulate_gaze(const ClusterGenerators& gens, int cluster, double duration,
                             const std::vector<std::string>& catalog, std::uint64_t seed,
                             const std::string& participant_id = "p0");

std::vector<LocationSample> simulate_locomotion(const ClusterGenerators& gens, int cluster, double duration,
                                                std::uint64_t seed, const std::string& participant_id = "p0");

struct TaskParameters {
    int n_images = 28;
    int n_categories = 6;
};

struct SimulationConfig {
    std::string group_id = "sim";
    double session_duration = 900.0;
    int group_size = 4;
    std::vector<BehaviorProfile> profiles;
    std::vector<std::string> participant_ids;  // empty: p0, p1, ...
    std::uint64_t seed = 1;
    TaskParameters task;
};

struct SimulationResult {
    GroupSession session;
    std::vector<std::string> warnings;
};

SimulationResult simulate_group(const SimulationConfig& config, const ClusterGenerators& gens,
                                const RegressionForest* forest = nullptr);

struct InteractionTargets {
    long total_grabs = 0;
    long label_changes = 0;
    long labels_overridden = 0;
};

struct InteractionMarking {
    bool capped = false;
    long grabs = 0;
    long label_changes = 0;
    long labels_overridden = 0;
};

/// Marks uniformly chosen gaze fixations of the group as grabs (grab at the
/// fixation start, release at its end), label changes and label overrides,
/// replacing any existing interactions. Counts are capped by the fixations.
InteractionMarking mark_interactions_from_gaze(GroupSession& session, const InteractionTargets& targets, Rng& rng);

void to_json(nlohmann::json& j, const ClusterGenerators& g);
void from_json(const nlohmann::json& j, ClusterGenerators& g);

}  // namespace collabsim

#endif  // COLLABSIM_BEHAVIORSIM_HPP
