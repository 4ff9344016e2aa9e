#include "collabsim/behaviorsim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "collabsim/features.hpp"
#include "collabsim/taskpredict.hpp"

namespace collabsim {

namespace {

constexpr int kOverlapRetries = 50;
constexpr int kPositiveDtRetries = 100;

std::size_t cluster_index(int cluster, std::size_t n, const char* modality) {
    if (cluster < 0 || static_cast<std::size_t>(cluster) >= n)
        throw InvalidInput(std::string("unknown ") + modality + " cluster id " + std::to_string(cluster));
    return static_cast<std::size_t>(cluster);
}

template <typename Gen>
const Gen& generator_for(const std::vector<std::optional<Gen>>& gens, int cluster, const char* modality) {
    const auto& g = gens[cluster_index(cluster, gens.size(), modality)];
    if (!g) throw InvalidInput(std::string("no generator for ") + modality + " cluster " + std::to_string(cluster));
    return *g;
}

CountLaw fit_count_law(const std::vector<double>& counts) {
    CountLaw law;
    if (counts.empty()) return law;
    const double n = static_cast<double>(counts.size());
    law.mean = std::accumulate(counts.begin(), counts.end(), 0.0) / n;
    double ss = 0.0;
    for (double c : counts) ss += (c - law.mean) * (c - law.mean);
    law.std = std::sqrt(ss / n);
    law.min_count = *std::min_element(counts.begin(), counts.end()) >= 1.0 ? 1 : 0;
    return law;
}

// square root of a PSD matrix via its eigen decomposition (negative
// eigenvalues from round-off are clipped)
template <typename Matrix>
Matrix psd_sqrt(const Matrix& cov) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

long CountLaw::sample(Rng& rng) const {
    auto rounded = [](double x) { return static_cast<long>(std::llround(std::max(0.0, x))); };
    if (!(std > 0.0)) return std::max(min_count, rounded(mean));
    std::normal_distribution<double> normal(mean, std);
    // truncated below at min_count >= 1 by redrawing; a zero floor clamps
    long n = rounded(normal(rng));
    for (int tries = 1; n < min_count && min_count >= 1 && tries < 100; ++tries) n = rounded(normal(rng));
    return std::max(min_count, n);
}

double Histogram::sample(Rng& rng) const {
    if (mass.empty() || !(hi > lo)) return lo;
    std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double width = (hi - lo) / static_cast<double>(mass.size());
    return lo + (static_cast<double>(pick(rng)) + unit(rng)) * width;
}

std::vector<double> Histogram::bin(std::span<const double> samples) const {
    std::vector<double> p(mass.size(), 0.0);
    if (p.empty() || samples.empty()) return p;
    const auto n = static_cast<double>(mass.size());
    for (double x : samples) {
        long i = hi > lo ? static_cast<long>(std::floor((x - lo) / (hi - lo) * n)) : 0;
        p[static_cast<std::size_t>(std::clamp(i, 0L, static_cast<long>(p.size()) - 1))] += 1.0;
    }
    for (double& v : p) v /= static_cast<double>(samples.size());
    return p;
}

Histogram make_histogram(std::span<const double> samples, int n_bins, double lo, double hi) {
    if (n_bins < 1) throw InvalidInput("histogram needs >= 1 bin");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.mass.assign(static_cast<std::size_t>(n_bins), samples.empty() ? 1.0 / n_bins : 0.0);
    if (samples.empty()) return h;
    h.mass = h.bin(samples);
    return h;
}

Histogram make_histogram(std::span<const double> samples, int n_bins) {
    if (samples.empty()) return make_histogram(samples, n_bins, 0.0, 1.0);
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    return make_histogram(samples, n_bins, *lo, *hi);
}

std::vector<double> smooth_moving_average(const std::vector<double>& values, int window) {
    const int half = std::max(0, window / 2);
    const auto n = static_cast<int>(values.size());
    std::vector<double> out(values.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        int count = 0;
        for (int j = std::max(0, i - half); j <= std::min(n - 1, i + half); ++j) {
            sum += values[static_cast<std::size_t>(j)];
            ++count;
        }
        out[static_cast<std::size_t>(i)] = sum / count;
    }
    return out;
}

ClusterGenerators build_generators(const std::vector<GroupSession>& corpus, const CorpusLabels& labels,
                                   const GeneratorOptions& options) {
    struct Member {
        const GroupSession* session;
        const ParticipantLog* log;
    };
    std::vector<Member> members;
    for (const auto& s : corpus)
        for (const auto& p : s.participants) members.push_back({&s, &p});
    for (const auto* l : {&labels.speaking, &labels.gaze, &labels.location}) {
        if (l->labels.size() != members.size())
            throw InvalidInput("build_generators: every corpus participant needs a label per modality");
        for (int v : l->labels)
            if (v < 0 || v >= l->k) throw InvalidInput("build_generators: label outside [0, k)");
    }

    ClusterGenerators gens;
    auto cluster_members = [&](const ClusterLabels& l, int c) {
        std::vector<const Member*> out;
        for (std::size_t i = 0; i < members.size(); ++i)
            if (l.labels[i] == c) out.push_back(&members[i]);
        return out;
    };

    for (int c = 0; c < labels.speaking.k; ++c) {
        const auto ms = cluster_members(labels.speaking, c);
        if (ms.empty()) {
            gens.speaking.emplace_back();
            gens.warnings.push_back("speaking cluster " + std::to_string(c) + " has no participants");
            continue;
        }
        std::vector<double> counts, starts, durations;
        for (const auto* m : ms) {
            const auto events = merge_overlapping_events(m->log->speaking);
            counts.push_back(static_cast<double>(events.size()));
            for (const auto& e : events) {
                starts.push_back(e.start / m->session->duration);
                durations.push_back(e.duration);
            }
        }
        SpeakingGenerator g;
        g.count = fit_count_law(counts);
        g.start_hist = make_histogram(starts, options.start_bins, 0.0, 1.0);
        g.start_hist.mass = smooth_moving_average(g.start_hist.mass, options.smoothing_window);
        const double total = std::accumulate(g.start_hist.mass.begin(), g.start_hist.mass.end(), 0.0);
        for (double& v : g.start_hist.mass) v /= total;
        g.duration_hist = make_histogram(durations, options.duration_bins);
        gens.speaking.emplace_back(std::move(g));
    }

    for (int c = 0; c < labels.gaze.k; ++c) {
        const auto ms = cluster_members(labels.gaze, c);
        if (ms.empty()) {
            gens.gaze.emplace_back();
            gens.warnings.push_back("gaze cluster " + std::to_string(c) + " has no participants");
            continue;
        }
        GazeGenerator g;
        g.rate_bins = options.rate_bins;
        g.spectrum.assign(static_cast<std::size_t>(options.harmonics + 1), {0.0, 0.0});
        std::vector<double> counts, durations;
        std::map<std::string, double> objects;
        int contributing = 0;
        for (const auto* m : ms) {
            const auto& events = m->log->gaze;
            counts.push_back(static_cast<double>(events.size()));
            if (events.empty()) continue;
            std::vector<double> starts;
            for (const auto& e : events) {
                starts.push_back(e.start);
                durations.push_back(e.duration);
                objects[e.target_object_id] += 1.0;
            }
            Eigen::VectorXd density = bin_event_series(starts, m->session->duration, options.rate_bins);
            density /= density.sum();
            const Eigen::VectorXcd spec = dft_spectrum(density);
            for (int h = 0; h <= options.harmonics; ++h) g.spectrum[static_cast<std::size_t>(h)] += spec(h);
            ++contributing;
        }
        if (contributing == 0) {
            g.spectrum[0] = {1.0, 0.0};
        } else {
            for (auto& v : g.spectrum) v /= static_cast<double>(contributing);
        }
        g.count = fit_count_law(counts);
        g.duration_hist = make_histogram(durations, options.duration_bins);
        double total = 0.0;
        for (const auto& [id, n] : objects) total += n;
        for (const auto& [id, n] : objects) g.object_frequency.emplace_back(id, n / total);
        gens.gaze.emplace_back(std::move(g));
    }

    for (int c = 0; c < labels.location.k; ++c) {
        const auto ms = cluster_members(labels.location, c);
        if (ms.empty()) {
            gens.location.emplace_back();
            gens.warnings.push_back("location cluster " + std::to_string(c) + " has no participants");
            continue;
        }
        LocomotionGenerator g;
        std::vector<double> counts, first_t;
        std::vector<Eigen::Vector3d> firsts;
        std::vector<Eigen::Vector4d> deltas;
        g.box_min.setConstant(std::numeric_limits<double>::infinity());
        g.box_max.setConstant(-std::numeric_limits<double>::infinity());
        for (const auto* m : ms) {
            const auto& s = m->log->locations;
            counts.push_back(static_cast<double>(s.size()));
            if (s.empty()) continue;
            first_t.push_back(s.front().t);
            firsts.emplace_back(s.front().x, s.front().y, s.front().z);
            for (std::size_t i = 0; i < s.size(); ++i) {
                const Eigen::Vector3d p(s[i].x, s[i].y, s[i].z);
                g.box_min = g.box_min.cwiseMin(p);
                g.box_max = g.box_max.cwiseMax(p);
                if (i > 0)
                    deltas.emplace_back(s[i].t - s[i - 1].t, s[i].x - s[i - 1].x, s[i].y - s[i - 1].y,
                                        s[i].z - s[i - 1].z);
            }
        }
        g.count = fit_count_law(counts);
        if (firsts.empty()) {
            g.box_min.setZero();
            g.box_max.setZero();
            g.transition_mean(0) = 1.0;
            gens.warnings.push_back("location cluster " + std::to_string(c) + " has no samples");
            gens.location.emplace_back(std::move(g));
            continue;
        }
        g.initial_time = std::accumulate(first_t.begin(), first_t.end(), 0.0) / static_cast<double>(first_t.size());
        for (const auto& p : firsts) g.initial_mean += p;
        g.initial_mean /= static_cast<double>(firsts.size());
        for (const auto& p : firsts) g.initial_cov += (p - g.initial_mean) * (p - g.initial_mean).transpose();
        g.initial_cov /= static_cast<double>(firsts.size());
        if (deltas.empty()) {
            g.transition_mean(0) = 1.0;
        } else {
            for (const auto& d : deltas) g.transition_mean += d;
            g.transition_mean /= static_cast<double>(deltas.size());
            for (const auto& d : deltas) g.transition_cov += (d - g.transition_mean) * (d - g.transition_mean).transpose();
            g.transition_cov /= static_cast<double>(deltas.size());
        }
        gens.location.emplace_back(std::move(g));
    }
    return gens;
}

std::vector<SpeakingEvent> simulate_speaking(const ClusterGenerators& gens, int cluster, double duration,
                                             std::uint64_t seed, const std::string& participant_id) {
    const auto& g = generator_for(gens.speaking, cluster, "speaking");
    if (!(duration > 0.0)) throw InvalidInput("simulate_speaking: duration must be > 0");
    Rng rng(seed);
    const long n = g.count.sample(rng);

    // Occupied intervals keyed by start. A start that would touch an existing
    // utterance is redrawn a bounded number of times; leftovers are merged.
    std::map<double, double> busy;
    auto overlaps = [&](double s, double e) {
        auto next = busy.lower_bound(s);
        if (next != busy.end() && next->first <= e) return true;
        if (next != busy.begin() && std::prev(next)->second >= s) return true;
        return false;
    };
    std::vector<SpeakingEvent> events;
    events.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const double d = g.duration_hist.sample(rng);
        double s = g.start_hist.sample(rng) * duration;
        for (int tries = 0; tries < kOverlapRetries && overlaps(s, s + d); ++tries)
            s = g.start_hist.sample(rng) * duration;
        if (s >= duration || d <= 0.0) continue;
        const double clipped = std::min(d, duration - s);
        if (clipped <= 0.0) continue;
        busy[s] = std::max(busy[s], s + clipped);
        events.push_back({participant_id, s, clipped});
    }
    return merge_overlapping_events(std::move(events));
}

std::vector<double> gaze_rate_density(const GazeGenerator& g, bool& fallback) {
    const int R = g.rate_bins;
    Eigen::VectorXcd full = Eigen::VectorXcd::Zero(R);
    for (std::size_t h = 0; h < g.spectrum.size() && static_cast<int>(h) < R; ++h) {
        full(static_cast<Eigen::Index>(h)) = g.spectrum[h];
        if (h > 0 && static_cast<int>(h) * 2 != R) full(R - static_cast<Eigen::Index>(h)) = std::conj(g.spectrum[h]);
    }
    const Eigen::VectorXd curve = inverse_dft_real(full).cwiseMax(0.0);
    std::vector<double> density(curve.data(), curve.data() + curve.size());
    const double total = std::accumulate(density.begin(), density.end(), 0.0);
    fallback = !(total > 0.0);
    if (fallback) {
        std::fill(density.begin(), density.end(), 1.0 / R);
    } else {
        for (double& v : density) v /= total;
    }
    return density;
}

GazeSimulation simulate_gaze(const ClusterGenerators& gens, int cluster, double duration,
                             const std::vector<std::string>& catalog, std::uint64_t seed,
                             const std::string& participant_id) {
    const auto& g = generator_for(gens.gaze, cluster, "gaze");
    if (catalog.empty()) throw InvalidInput("simulate_gaze: empty object catalog");
    if (!(duration > 0.0)) throw InvalidInput("simulate_gaze: duration must be > 0");
    GazeSimulation out;
    const auto density = gaze_rate_density(g, out.uniform_fallback);

    std::vector<std::string> objects;
    std::vector<double> weights;
    for (const auto& [id, p] : g.object_frequency)
        if (std::binary_search(catalog.begin(), catalog.end(), id) ||
            std::find(catalog.begin(), catalog.end(), id) != catalog.end()) {
            objects.push_back(id);
            weights.push_back(p);
        }
    if (objects.empty() || std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) {
        objects = catalog;
        weights.assign(catalog.size(), 1.0);
    }

    Rng rng(seed);
    const long n = g.count.sample(rng);
    std::discrete_distribution<std::size_t> pick_bin(density.begin(), density.end());
    std::discrete_distribution<std::size_t> pick_object(weights.begin(), weights.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double width = duration / static_cast<double>(density.size());
    out.events.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const double s = std::min((static_cast<double>(pick_bin(rng)) + unit(rng)) * width, duration);
        const double d = std::clamp(g.duration_hist.sample(rng), 0.0, duration - s);
        out.events.push_back({participant_id, s, d, objects[pick_object(rng)]});
    }
    std::sort(out.events.begin(), out.events.end(), [](const GazeEvent& a, const GazeEvent& b) {
        if (a.start != b.start) return a.start < b.start;
        if (a.duration != b.duration) return a.duration < b.duration;
        return a.target_object_id < b.target_object_id;
    });
    return out;
}

std::vector<LocationSample> simulate_locomotion(const ClusterGenerators& gens, int cluster, double duration,
                                                std::uint64_t seed, const std::string& participant_id) {
    const auto& g = generator_for(gens.location, cluster, "location");
    if (!(duration > 0.0)) throw InvalidInput("simulate_locomotion: duration must be > 0");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const long n = g.count.sample(rng);
    std::vector<LocationSample> out;
    const double t0 = std::max(0.0, g.initial_time);
    if (n == 0 || t0 > duration) return out;

    const Eigen::Matrix3d init_root = psd_sqrt(g.initial_cov);
    const Eigen::Matrix4d step_root = psd_sqrt(g.transition_cov);
    auto clamp_box = [&](const Eigen::Vector3d& p) -> Eigen::Vector3d { return p.cwiseMax(g.box_min).cwiseMin(g.box_max); };

    Eigen::Vector3d z3;
    for (int a = 0; a < 3; ++a) z3(a) = normal(rng);
    Eigen::Vector3d p = clamp_box(g.initial_mean + init_root * z3);
    double t = t0;
    out.reserve(static_cast<std::size_t>(n));
    out.push_back({participant_id, t, p(0), p(1), p(2)});
    const double mean_dt = g.transition_mean(0) > 0.0 ? g.transition_mean(0) : 1.0;
    for (long i = 1; i < n; ++i) {
        Eigen::Vector4d step;
        int tries = 0;
        do {
            Eigen::Vector4d z4;
            for (int a = 0; a < 4; ++a) z4(a) = normal(rng);
            step = g.transition_mean + step_root * z4;
        } while (!(step(0) > 0.0) && ++tries < kPositiveDtRetries);
        if (!(step(0) > 0.0)) step(0) = mean_dt;
        double next_t = t + step(0);
        if (!(next_t > t)) next_t = std::nextafter(t, std::numeric_limits<double>::infinity());
        if (next_t > duration) break;
        t = next_t;
        p = clamp_box(p + step.tail<3>());
        out.push_back({participant_id, t, p(0), p(1), p(2)});
    }
    return out;
}

InteractionMarking mark_interactions_from_gaze(GroupSession& session, const InteractionTargets& targets, Rng& rng) {
    struct Fixation {
        std::size_t participant;
        std::size_t index;
    };
    std::vector<Fixation> fixations;
    for (std::size_t p = 0; p < session.participants.size(); ++p) {
        session.participants[p].interactions.clear();
        for (std::size_t i = 0; i < session.participants[p].gaze.size(); ++i) fixations.push_back({p, i});
    }
    InteractionMarking mark;
    const auto available = static_cast<long>(fixations.size());
    auto choose = [&](long wanted) {
        const long m = std::clamp(wanted, 0L, available);
        if (wanted > available) mark.capped = true;
        std::vector<Fixation> pool = fixations;
        // partial Fisher-Yates
        for (long i = 0; i < m; ++i) {
            std::uniform_int_distribution<long> pick(i, available - 1);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
        }
        pool.resize(static_cast<std::size_t>(m));
        return pool;
    };
    const auto grabs = choose(targets.total_grabs);
    const auto changes = choose(targets.label_changes);
    const auto overrides = choose(targets.labels_overridden);
    mark.grabs = static_cast<long>(grabs.size());
    mark.label_changes = static_cast<long>(changes.size());
    mark.labels_overridden = static_cast<long>(overrides.size());

    const std::vector<std::size_t> none;
    for (std::size_t p = 0; p < session.participants.size(); ++p) {
        auto& log = session.participants[p];
        std::map<std::string, std::vector<const GazeEvent*>> chains;
        for (const auto& f : grabs)
            if (f.participant == p) chains[log.gaze[f.index].target_object_id].push_back(&log.gaze[f.index]);
        std::vector<ObjectInteractionEvent> events;
        for (auto& [object, chain] : chains) {
            std::sort(chain.begin(), chain.end(), [](const GazeEvent* a, const GazeEvent* b) {
                if (a->start != b->start) return a->start < b->start;
                return a->duration < b->duration;
            });
            for (std::size_t i = 0; i < chain.size(); ++i) {
                double release = chain[i]->end();
                if (i + 1 < chain.size()) release = std::min(release, chain[i + 1]->start);
                release = std::clamp(release, chain[i]->start, session.duration);
                events.push_back({log.participant_id, chain[i]->start, object, InteractionKind::grab});
                events.push_back({log.participant_id, release, object, InteractionKind::release});
            }
        }
        auto add_labels = [&](const std::vector<Fixation>& chosen, InteractionKind kind) {
            for (const auto& f : chosen)
                if (f.participant == p) {
                    const auto& e = log.gaze[f.index];
                    events.push_back({log.participant_id, std::min(e.start + 0.5 * e.duration, session.duration),
                                      e.target_object_id, kind});
                }
        };
        add_labels(changes, InteractionKind::label_change);
        add_labels(overrides, InteractionKind::label_override);
        std::stable_sort(events.begin(), events.end(),
                         [](const ObjectInteractionEvent& a, const ObjectInteractionEvent& b) { return a.t < b.t; });
        log.interactions = std::move(events);
    }
    return mark;
}

SimulationResult simulate_group(const SimulationConfig& config, const ClusterGenerators& gens,
                                const RegressionForest* forest) {
    if (config.group_size < 1) throw InvalidInput("simulate_group: group_size must be >= 1");
    if (static_cast<int>(config.profiles.size()) != config.group_size)
        throw InvalidInput("simulate_group: profiles length must equal group_size");
    if (!config.participant_ids.empty() &&
        static_cast<int>(config.participant_ids.size()) != config.group_size)
        throw InvalidInput("simulate_group: participant_ids length must equal group_size");
    if (!(config.session_duration > 0.0)) throw InvalidInput("simulate_group: duration must be > 0");
    if (config.task.n_images < 1) throw InvalidInput("simulate_group: n_images must be >= 1");
    const ClusterCounts counts = gens.counts();
    if (forest && forest->input_dim != counts.total())
        throw InvalidInput("simulate_group: forest expects " + std::to_string(forest->input_dim) +
                           " inputs but the generators define " + std::to_string(counts.total()) + " clusters");
    for (const auto& pr : config.profiles) {
        generator_for(gens.speaking, pr.speaking_cluster, "speaking");
        generator_for(gens.gaze, pr.gaze_cluster, "gaze");
        generator_for(gens.location, pr.location_cluster, "location");
    }

    SimulationResult result;
    GroupSession& s = result.session;
    s.group_id = config.group_id;
    s.duration = config.session_duration;
    s.object_catalog = default_object_catalog(static_cast<std::size_t>(config.task.n_images));
    for (int k = 0; k < config.group_size; ++k) {
        const auto& pr = config.profiles[static_cast<std::size_t>(k)];
        const auto ku = static_cast<std::uint64_t>(k);
        ParticipantLog log;
        log.participant_id = config.participant_ids.empty() ? "p" + std::to_string(k)
                                                            : config.participant_ids[static_cast<std::size_t>(k)];
        log.speaking = simulate_speaking(gens, pr.speaking_cluster, s.duration, derive_seed(config.seed, {ku, 0}),
                                         log.participant_id);
        auto gaze = simulate_gaze(gens, pr.gaze_cluster, s.duration, s.object_catalog,
                                  derive_seed(config.seed, {ku, 1}), log.participant_id);
        if (gaze.uniform_fallback)
            result.warnings.push_back(log.participant_id + ": gaze rate curve clipped to zero; used uniform density");
        log.gaze = std::move(gaze.events);
        log.locations = simulate_locomotion(gens, pr.location_cluster, s.duration, derive_seed(config.seed, {ku, 2}),
                                            log.participant_id);
        s.participants.push_back(std::move(log));
    }

    if (forest) {
        const auto encoding = encode_group_config(config.profiles, counts);
        TaskMetrics m = predict_task_metrics(*forest, encoding);
        const auto n_images = static_cast<long>(s.object_catalog.size());
        m.images_grabbed = std::min(m.images_grabbed, n_images);
        m.images_looked_at = std::min(m.images_looked_at, n_images);
        Rng rng = make_rng(config.seed, {0xFFFFULL});
        const auto mark = mark_interactions_from_gaze(s, {m.total_grabs, m.label_changes, m.labels_overridden}, rng);
        if (mark.capped)
            result.warnings.push_back("predicted interaction counts exceed available gaze fixations; capped");
        s.task_metrics = m;
    }
    normalize_session(s);
    validate_session(s);
    return result;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json hist_json(const Histogram& h) { return {{"lo", h.lo}, {"hi", h.hi}, {"mass", h.mass}}; }
Histogram hist_from(const nlohmann::json& j) {
    return {j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("mass").get<std::vector<double>>()};
}
nlohmann::json law_json(const CountLaw& c) { return {{"mean", c.mean}, {"std", c.std}, {"min_count", c.min_count}}; }
CountLaw law_from(const nlohmann::json& j) {
    return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("min_count").get<long>()};
}
template <typename M>
nlohmann::json mat_json(const M& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
}
template <typename M>
M mat_from(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    M m;
    if (static_cast<Eigen::Index>(v.size()) != m.size()) throw InvalidInput("generator json: matrix size");
    std::copy(v.begin(), v.end(), m.data());
    return m;
}

}  // namespace

void to_json(nlohmann::json& j, const ClusterGenerators& g) {
    nlohmann::json sp = nlohmann::json::array(), gz = nlohmann::json::array(), lc = nlohmann::json::array();
    for (const auto& s : g.speaking)
        sp.push_back(s ? nlohmann::json{{"count", law_json(s->count)},
                                        {"start_hist", hist_json(s->start_hist)},
                                        {"duration_hist", hist_json(s->duration_hist)}}
                       : nlohmann::json(nullptr));
    for (const auto& z : g.gaze) {
        if (!z) {
            gz.push_back(nullptr);
            continue;
        }
        nlohmann::json spec = nlohmann::json::array();
        for (const auto& c : z->spectrum) spec.push_back({c.real(), c.imag()});
        nlohmann::json objs = nlohmann::json::array();
        for (const auto& [id, p] : z->object_frequency) objs.push_back({id, p});
        gz.push_back({{"count", law_json(z->count)},
                      {"rate_bins", z->rate_bins},
                      {"spectrum", spec},
                      {"duration_hist", hist_json(z->duration_hist)},
                      {"object_frequency", objs}});
    }
    for (const auto& l : g.location)
        lc.push_back(l ? nlohmann::json{{"count", law_json(l->count)},
                                        {"initial_time", l->initial_time},
                                        {"initial_mean", mat_json(l->initial_mean)},
                                        {"initial_cov", mat_json(l->initial_cov)},
                                        {"transition_mean", mat_json(l->transition_mean)},
                                        {"transition_cov", mat_json(l->transition_cov)},
                                        {"box_min", mat_json(l->box_min)},
                                        {"box_max", mat_json(l->box_max)}}
                       : nlohmann::json(nullptr));
    j = {{"speaking", sp}, {"gaze", gz}, {"location", lc}, {"warnings", g.warnings}};
}

void from_json(const nlohmann::json& j, ClusterGenerators& g) {
    g = {};
    for (const auto& s : j.at("speaking")) {
        if (s.is_null()) {
            g.speaking.emplace_back();
            continue;
        }
        g.speaking.push_back(
            SpeakingGenerator{law_from(s.at("count")), hist_from(s.at("start_hist")), hist_from(s.at("duration_hist"))});
    }
    for (const auto& z : j.at("gaze")) {
        if (z.is_null()) {
            g.gaze.emplace_back();
            continue;
        }
        GazeGenerator gg;
        gg.count = law_from(z.at("count"));
        gg.rate_bins = z.at("rate_bins").get<int>();
        for (const auto& c : z.at("spectrum")) gg.spectrum.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
        gg.duration_hist = hist_from(z.at("duration_hist"));
        for (const auto& o : z.at("object_frequency"))
            gg.object_frequency.emplace_back(o.at(0).get<std::string>(), o.at(1).get<double>());
        g.gaze.push_back(std::move(gg));
    }
    for (const auto& l : j.at("location")) {
        if (l.is_null()) {
            g.location.emplace_back();
            continue;
        }
        LocomotionGenerator lg;
        lg.count = law_from(l.at("count"));
        lg.initial_time = l.at("initial_time").get<double>();
        lg.initial_mean = mat_from<Eigen::Vector3d>(l.at("initial_mean"));
        lg.initial_cov = mat_from<Eigen::Matrix3d>(l.at("initial_cov"));
        lg.transition_mean = mat_from<Eigen::Vector4d>(l.at("transition_mean"));
        lg.transition_cov = mat_from<Eigen::Matrix4d>(l.at("transition_cov"));
        lg.box_min = mat_from<Eigen::Vector3d>(l.at("box_min"));
        lg.box_max = mat_from<Eigen::Vector3d>(l.at("box_max"));
        g.location.push_back(std::move(lg));
    }
    g.warnings = j.at("warnings").get<std::vector<std::string>>();
}

}  // namespace collabsim
