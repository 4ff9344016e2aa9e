#ifndef COLLABSIM_CORPUSGEN_HPP
#define COLLABSIM_CORPUSGEN_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "collabsim/common.hpp"
#include "collabsim/logmodel.hpp"

namespace collabsim {

// Archetypes are the ground-truth generators for the synthetic reference
// corpus. Instance counts follow a gamma-Poisson law with
// variance = instance_dispersion * mean; durations follow a log-normal
// shifted by kMinEventDuration so that mean and std are reproduced exactly.

inline constexpr double kMinEventDuration = 0.05;

struct SpeakingArchetype {
    std::string name;
    double mean_instances = 0.0;
    double instance_dispersion = 1.5;
    double duration_mean = 0.0;
    double duration_std = 0.0;
};

struct GazeArchetype {
    std::string name;
    double mean_instances = 0.0;
    double instance_dispersion = 1.5;
    double duration_mean = 0.0;
    double duration_std = 0.0;
    /// Zipf-like preference over the catalog: weight(i) ~ 1 / (i + 1)^exponent.
    /// Used when `object_preference` is empty.
    double preference_exponent = 0.0;
    /// Explicit distribution over the catalog (same order), sums to 1.
    std::vector<double> object_preference;
};

struct RoomBounds {
    std::array<double, 3> min{-3.0, 1.2, -3.0};
    std::array<double, 3> max{3.0, 1.9, 3.0};
};

struct LocomotionArchetype {
    std::string name;
    double mean_samples = 0.0;
    double instance_dispersion = 1.5;
    double sample_rate = 1.0;                  // Hz
    std::array<double, 3> step_std{0.05, 0.01, 0.05};  // per-step jitter per axis
    double drift = 0.3;                        // heading speed, units/s
    double turn_std = 0.3;                     // heading change per step, rad
    double idle_prob = 0.15;
    RoomBounds room_bounds;
    // Reference cluster profile values; not used by the generator.
    double reference_tortuosity = 0.0;
    double reference_max_speed = 0.0;
};

struct ArchetypeCatalog {
    std::vector<SpeakingArchetype> speaking;
    std::vector<GazeArchetype> gaze;
    std::vector<LocomotionArchetype> locomotion;
};

/// 3 speaking x 3 gaze x 4 locomotion archetypes parameterised from the
/// reference cluster profiles.
ArchetypeCatalog builtin_archetypes();

void validate_archetypes(const ArchetypeCatalog& catalog, std::size_t n_objects);

/// Which archetype of each modality a participant follows.
struct ArchetypeAssignment {
    int speaking = 0;
    int gaze = 0;
    int locomotion = 0;
    bool operator==(const ArchetypeAssignment&) const = default;
};

enum class ArchetypeMix {
    cyclic,    // participant i -> i mod n per modality
    shuffled,  // balanced counts per modality, seeded permutation
};

struct CorpusConfig {
    int n_groups = 12;
    int group_size = 4;
    double session_duration = 900.0;
    std::size_t n_objects = 28;
    ArchetypeMix archetype_mix = ArchetypeMix::shuffled;
    /// When non-empty, overrides `archetype_mix`; one entry per participant.
    std::vector<ArchetypeAssignment> explicit_assignments;
    std::uint64_t seed = 1;
};

struct GeneratedCorpus {
    std::vector<GroupSession> sessions;
    /// Ground truth, flattened in session-then-participant order.
    std::vector<ArchetypeAssignment> assignments;
};

std::vector<ArchetypeAssignment> assign_archetypes(const CorpusConfig& config, const ArchetypeCatalog& catalog);

/// Throws InvalidInput before generating anything when the configuration or
/// an archetype is infeasible for the session length.
GeneratedCorpus generate_corpus(const CorpusConfig& config, const ArchetypeCatalog& catalog);

/// Gamma-Poisson count with the given mean and variance/mean ratio (>= 1).
long sample_overdispersed_count(double mean, double dispersion, Rng& rng);

/// Log-normal shifted by `min_value` with exact mean/std.
double sample_shifted_lognormal(double mean, double std, double min_value, Rng& rng);

}  // namespace collabsim

#endif  // COLLABSIM_CORPUSGEN_HPP
