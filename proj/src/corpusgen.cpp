#include "collabsim/corpusgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "collabsim/behaviorsim.hpp"

namespace collabsim {

ArchetypeCatalog builtin_archetypes() {
    ArchetypeCatalog c;
    // Speaking: instance means and mean durations fixed per cluster; duration
    // spreads are chosen to match the described contrast between clusters.
    c.speaking = {
        {"frequent", 119.29, 1.5, 1.70, 0.90},
        {"infrequent", 14.35, 1.5, 1.60, 0.50},
        {"moderate", 48.63, 1.5, 1.32, 0.75},
    };
    c.gaze = {
        {"low", 836.43, 1.5, 0.14, 0.18, 0.0, {}},
        {"moderate", 1325.77, 1.5, 0.18, 0.24, 0.5, {}},
        {"high", 2014.00, 1.5, 0.18, 0.25, 1.0, {}},
    };
    LocomotionArchetype consistent;
    consistent.name = "consistent";
    consistent.mean_samples = 496.17;
    consistent.sample_rate = 1.0;
    consistent.drift = 0.25;
    consistent.turn_std = 0.20;
    consistent.idle_prob = 0.16;
    consistent.reference_tortuosity = 2.49;
    consistent.reference_max_speed = 497.34;

    LocomotionArchetype variable;
    variable.name = "variable";
    variable.mean_samples = 600.0;  // no reference value for this cluster
    variable.sample_rate = 1.0;
    variable.drift = 0.45;
    variable.turn_std = 0.60;
    variable.step_std = {0.10, 0.015, 0.10};
    variable.idle_prob = 0.18;
    variable.reference_tortuosity = 3.45;
    variable.reference_max_speed = 859.66;

    LocomotionArchetype dynamic;
    dynamic.name = "dynamic";
    dynamic.mean_samples = 1140.2;
    dynamic.sample_rate = 2.0;
    dynamic.drift = 0.70;
    dynamic.turn_std = 0.45;
    dynamic.step_std = {0.12, 0.02, 0.12};
    dynamic.idle_prob = 0.14;
    dynamic.reference_tortuosity = 2.29;
    dynamic.reference_max_speed = 1146.38;

    LocomotionArchetype stable;
    stable.name = "stable";
    stable.mean_samples = 709.18;
    stable.sample_rate = 1.5;
    stable.drift = 0.35;
    stable.turn_std = 0.25;
    stable.idle_prob = 0.14;
    stable.reference_tortuosity = 2.32;
    stable.reference_max_speed = 710.63;

    c.locomotion = {consistent, variable, dynamic, stable};
    return c;
}

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw InvalidInput(message);
}

std::vector<double> object_distribution(const GazeArchetype& g, std::size_t n_objects) {
    if (!g.object_preference.empty()) return g.object_preference;
    std::vector<double> w(n_objects);
    for (std::size_t i = 0; i < n_objects; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), g.preference_exponent);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

void validate_archetypes(const ArchetypeCatalog& c, std::size_t n_objects) {
    require(!c.speaking.empty() && !c.gaze.empty() && !c.locomotion.empty(),
            "archetype catalog needs at least one archetype per modality");
    for (const auto& s : c.speaking) {
        require(s.mean_instances > 0 && s.duration_mean > kMinEventDuration && s.duration_std >= 0,
                "speaking archetype '" + s.name + "': means must be > 0 and duration_mean > 0.05 s");
        require(s.instance_dispersion >= 1.0, "speaking archetype '" + s.name + "': dispersion must be >= 1");
    }
    for (const auto& g : c.gaze) {
        require(g.mean_instances > 0 && g.duration_mean > kMinEventDuration && g.duration_std >= 0,
                "gaze archetype '" + g.name + "': means must be > 0 and duration_mean > 0.05 s");
        require(g.instance_dispersion >= 1.0, "gaze archetype '" + g.name + "': dispersion must be >= 1");
        if (!g.object_preference.empty()) {
            require(g.object_preference.size() == n_objects,
                    "gaze archetype '" + g.name + "': object_preference size != catalog size");
            const double sum = std::accumulate(g.object_preference.begin(), g.object_preference.end(), 0.0);
            require(std::abs(sum - 1.0) < 1e-9 &&
                        std::all_of(g.object_preference.begin(), g.object_preference.end(),
                                    [](double p) { return p >= 0.0; }),
                    "gaze archetype '" + g.name + "': object_preference must be a distribution");
        }
    }
    for (const auto& l : c.locomotion) {
        require(l.mean_samples > 0 && l.sample_rate > 0 && l.drift >= 0,
                "locomotion archetype '" + l.name + "': means must be > 0");
        require(l.idle_prob >= 0.0 && l.idle_prob <= 1.0, "locomotion archetype '" + l.name + "': idle_prob outside [0,1]");
        require(l.instance_dispersion >= 1.0, "locomotion archetype '" + l.name + "': dispersion must be >= 1");
        for (int a = 0; a < 3; ++a)
            require(l.room_bounds.min[a] < l.room_bounds.max[a] && l.step_std[a] >= 0,
                    "locomotion archetype '" + l.name + "': bad room bounds or step_std");
    }
}

long sample_overdispersed_count(double mean, double dispersion, Rng& rng) {
    if (mean <= 0.0) return 0;
    double rate = mean;
    if (dispersion > 1.0) {
        const double shape = mean / (dispersion - 1.0);
        std::gamma_distribution<double> gamma(shape, mean / shape);
        rate = gamma(rng);
    }
    std::poisson_distribution<long> poisson(rate);
    return poisson(rng);
}

double sample_shifted_lognormal(double mean, double std, double min_value, Rng& rng) {
    const double m = mean - min_value;
    if (std <= 0.0 || m <= 0.0) return std::max(mean, min_value);
    const double sigma2 = std::log1p((std * std) / (m * m));
    std::lognormal_distribution<double> ln(std::log(m) - 0.5 * sigma2, std::sqrt(sigma2));
    return min_value + ln(rng);
}

std::vector<ArchetypeAssignment> assign_archetypes(const CorpusConfig& config, const ArchetypeCatalog& catalog) {
    const std::size_t n = static_cast<std::size_t>(std::max(0, config.n_groups)) *
                          static_cast<std::size_t>(std::max(0, config.group_size));
    if (!config.explicit_assignments.empty()) {
        require(config.explicit_assignments.size() == n, "explicit_assignments must list every participant");
        for (const auto& a : config.explicit_assignments)
            require(a.speaking >= 0 && a.speaking < static_cast<int>(catalog.speaking.size()) && a.gaze >= 0 &&
                        a.gaze < static_cast<int>(catalog.gaze.size()) && a.locomotion >= 0 &&
                        a.locomotion < static_cast<int>(catalog.locomotion.size()),
                    "explicit assignment references an unknown archetype");
        return config.explicit_assignments;
    }
    std::vector<ArchetypeAssignment> out(n);
    auto balanced = [&](std::size_t n_types, std::uint64_t stream) {
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % n_types);
        if (config.archetype_mix == ArchetypeMix::shuffled) {
            Rng rng = make_rng(config.seed, {0xA55167ULL, stream});
            std::shuffle(labels.begin(), labels.end(), rng);
        }
        return labels;
    };
    const auto s = balanced(catalog.speaking.size(), 0);
    const auto g = balanced(catalog.gaze.size(), 1);
    const auto l = balanced(catalog.locomotion.size(), 2);
    for (std::size_t i = 0; i < n; ++i) out[i] = {s[i], g[i], l[i]};
    return out;
}

namespace {

// Places `durations` in order without overlap: the free time is split by
// sorted uniform gap points, so starts are spread over the whole session.
template <typename MakeEvent>
void place_sequential(std::vector<double> durations, double session, Rng& rng, MakeEvent&& make) {
    double busy = std::accumulate(durations.begin(), durations.end(), 0.0);
    while (!durations.empty() && busy >= session) {
        busy -= durations.back();
        durations.pop_back();
    }
    const double free_time = session - busy;
    std::uniform_real_distribution<double> unif(0.0, free_time);
    std::vector<double> gaps(durations.size());
    for (double& g : gaps) g = unif(rng);
    std::sort(gaps.begin(), gaps.end());
    double consumed = 0.0;
    double last_end = -1.0;
    for (std::size_t i = 0; i < durations.size(); ++i) {
        const double start = gaps[i] + consumed;
        consumed += durations[i];
        if (start <= last_end) continue;  // coincident gap points
        const double d = std::min(durations[i], session - start);
        if (d <= 0.0) continue;
        make(start, d);
        last_end = start + d;
    }
}

std::vector<SpeakingEvent> generate_speaking(const SpeakingArchetype& a, const std::string& pid, double session,
                                             Rng& rng) {
    const long n = sample_overdispersed_count(a.mean_instances, a.instance_dispersion, rng);
    std::vector<double> durations(static_cast<std::size_t>(n));
    for (double& d : durations) d = sample_shifted_lognormal(a.duration_mean, a.duration_std, kMinEventDuration, rng);
    std::vector<SpeakingEvent> out;
    place_sequential(std::move(durations), session, rng,
                     [&](double start, double d) { out.push_back({pid, start, d}); });
    return out;
}

std::vector<GazeEvent> generate_gaze(const GazeArchetype& a, const std::string& pid, double session,
                                     const std::vector<std::string>& catalog, Rng& rng) {
    const long n = sample_overdispersed_count(a.mean_instances, a.instance_dispersion, rng);
    std::vector<double> durations(static_cast<std::size_t>(n));
    for (double& d : durations) d = sample_shifted_lognormal(a.duration_mean, a.duration_std, kMinEventDuration, rng);
    const auto weights = object_distribution(a, catalog.size());
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::vector<GazeEvent> out;
    place_sequential(std::move(durations), session, rng,
                     [&](double start, double d) { out.push_back({pid, start, d, catalog[pick(rng)]}); });
    return out;
}

std::vector<LocationSample> generate_locomotion(const LocomotionArchetype& a, const std::string& pid, double session,
                                                Rng& rng) {
    const long n = std::max(2L, sample_overdispersed_count(a.mean_samples, a.instance_dispersion, rng));
    const auto& lo = a.room_bounds.min;
    const auto& hi = a.room_bounds.max;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::array<double, 3> p{};
    for (int k = 0; k < 3; ++k) p[k] = lo[k] + (hi[k] - lo[k]) * (k == 1 ? 0.5 : unit(rng));
    double heading = 2.0 * std::numbers::pi * unit(rng);
    const double base_dt = 1.0 / a.sample_rate;
    double t = base_dt * unit(rng);

    std::vector<LocationSample> out;
    out.reserve(static_cast<std::size_t>(n));
    out.push_back({pid, t, p[0], p[1], p[2]});
    for (long i = 1; i < n; ++i) {
        const double dt = base_dt * (0.75 + 0.5 * unit(rng));
        if (t + dt > session) break;
        t += dt;
        if (unit(rng) >= a.idle_prob) {
            heading += a.turn_std * normal(rng);
            p[0] += a.drift * dt * std::cos(heading) + a.step_std[0] * normal(rng);
            p[1] += a.step_std[1] * normal(rng);
            p[2] += a.drift * dt * std::sin(heading) + a.step_std[2] * normal(rng);
            // reflect at the walls, turning the heading away from them
            for (int k = 0; k < 3; ++k) {
                if (p[k] < lo[k] || p[k] > hi[k]) {
                    p[k] = p[k] < lo[k] ? 2 * lo[k] - p[k] : 2 * hi[k] - p[k];
                    p[k] = std::clamp(p[k], lo[k], hi[k]);
                    if (k == 0) heading = std::numbers::pi - heading;
                    if (k == 2) heading = -heading;
                }
            }
        }
        out.push_back({pid, t, p[0], p[1], p[2]});
    }
    return out;
}

}  // namespace

GeneratedCorpus generate_corpus(const CorpusConfig& config, const ArchetypeCatalog& catalog) {
    require(config.n_groups >= 0, "n_groups must be >= 0");
    GeneratedCorpus corpus;
    if (config.n_groups == 0) return corpus;
    require(config.group_size >= 2, "group_size must be >= 2");
    require(config.session_duration > 0.0, "session_duration must be > 0");
    require(config.n_objects >= 1, "object catalog must not be empty");
    validate_archetypes(catalog, config.n_objects);
    const double D = config.session_duration;
    for (const auto& s : catalog.speaking)
        require(s.mean_instances * s.duration_mean <= D,
                "speaking archetype '" + s.name + "' is infeasible: mean_instances x duration_mean exceeds session");
    for (const auto& g : catalog.gaze)
        require(g.mean_instances * g.duration_mean <= D,
                "gaze archetype '" + g.name + "' is infeasible: mean_instances x duration_mean exceeds session");
    for (const auto& l : catalog.locomotion)
        require(l.mean_samples / l.sample_rate <= D,
                "locomotion archetype '" + l.name + "' is infeasible: mean_samples / sample_rate exceeds session");

    corpus.assignments = assign_archetypes(config, catalog);
    const auto objects = default_object_catalog(config.n_objects);

    std::size_t flat = 0;
    for (int g = 0; g < config.n_groups; ++g) {
        GroupSession s;
        std::string gid = std::to_string(g);
        if (gid.size() < 2) gid.insert(0, 2 - gid.size(), '0');
        s.group_id = "g" + gid;
        s.duration = D;
        s.object_catalog = objects;
        InteractionTargets targets;
        double speaking_total = 0.0;
        for (int k = 0; k < config.group_size; ++k, ++flat) {
            const auto& who = corpus.assignments[flat];
            ParticipantLog log;
            log.participant_id = "p" + std::to_string(k);
            const auto gu = static_cast<std::uint64_t>(g);
            const auto ku = static_cast<std::uint64_t>(k);
            Rng rs = make_rng(config.seed, {gu, ku, 0});
            Rng rg = make_rng(config.seed, {gu, ku, 1});
            Rng rl = make_rng(config.seed, {gu, ku, 2});
            Rng rt = make_rng(config.seed, {gu, ku, 3});
            const auto& ga = catalog.gaze[static_cast<std::size_t>(who.gaze)];
            log.speaking = generate_speaking(catalog.speaking[static_cast<std::size_t>(who.speaking)],
                                             log.participant_id, D, rs);
            log.gaze = generate_gaze(ga, log.participant_id, D, objects, rg);
            log.locations = generate_locomotion(catalog.locomotion[static_cast<std::size_t>(who.locomotion)],
                                                log.participant_id, D, rl);
            speaking_total += catalog.speaking[static_cast<std::size_t>(who.speaking)].mean_instances;

            std::poisson_distribution<long> grabs(ga.mean_instances / 150.0);
            const long n_grabs = grabs(rt);
            std::binomial_distribution<long> changes(n_grabs, 0.6);
            std::binomial_distribution<long> overrides(n_grabs, 0.2);
            targets.total_grabs += n_grabs;
            targets.label_changes += changes(rt);
            targets.labels_overridden += overrides(rt);
            s.participants.push_back(std::move(log));
        }
        Rng ri = make_rng(config.seed, {static_cast<std::uint64_t>(g), 0xFFFFULL});
        mark_interactions_from_gaze(s, targets, ri);

        TaskMetrics m;
        std::set<std::string> grabbed, looked;
        double last = 0.0;
        for (const auto& p : s.participants) {
            for (const auto& e : p.gaze) looked.insert(e.target_object_id);
            for (const auto& e : p.interactions) {
                last = std::max(last, e.t);
                if (e.kind == InteractionKind::grab) {
                    grabbed.insert(e.object_id);
                    ++m.total_grabs;
                } else if (e.kind == InteractionKind::label_change) {
                    ++m.label_changes;
                } else if (e.kind == InteractionKind::label_override) {
                    ++m.labels_overridden;
                }
            }
        }
        m.images_grabbed = static_cast<long>(grabbed.size());
        m.images_looked_at = static_cast<long>(looked.size());
        m.completion_time = last;
        std::normal_distribution<double> acc(45.0 + 0.1 * speaking_total / config.group_size, 8.0);
        m.accuracy = std::clamp(acc(ri), 0.0, 100.0);
        s.task_metrics = m;

        normalize_session(s);
        validate_session(s);
        corpus.sessions.push_back(std::move(s));
    }
    return corpus;
}

}  // namespace collabsim
