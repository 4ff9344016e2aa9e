#include "collabsim/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "collabsim/behaviorsim.hpp"
#include "collabsim/clustering.hpp"
#include "collabsim/common.hpp"
#include "collabsim/features.hpp"
#include "collabsim/fidelity.hpp"
#include "collabsim/logmodel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace collabsim {

MissingArtifact::MissingArtifact(const std::string& artifact, const std::string& producing_stage,
                                 const std::string& stage)
    : std::runtime_error("stage '" + stage + "' needs " + artifact + ", which is produced by '" + producing_stage +
                         "'") {}

namespace {

// Seed namespaces below the root seed.
enum : std::uint64_t { kSeedFit = 1, kSeedForest = 2, kSeedSimulate = 3, kSeedEvaluate = 4 };

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw InvalidInput("config: '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw InvalidInput("config: unknown key '" + key + "' in '" + where + "'");
    }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0)) throw InvalidInput(std::string("config: ") + name + " must be > 0");
}

std::string mix_name(ArchetypeMix m) { return m == ArchetypeMix::cyclic ? "cyclic" : "shuffled"; }
ArchetypeMix mix_from(const std::string& s) {
    if (s == "cyclic") return ArchetypeMix::cyclic;
    if (s == "shuffled") return ArchetypeMix::shuffled;
    throw InvalidInput("config: unknown archetype_mix '" + s + "'");
}

json profiles_json(const std::vector<BehaviorProfile>& profiles) {
    json a = json::array();
    for (const auto& p : profiles) a.push_back({p.speaking_cluster, p.gaze_cluster, p.location_cluster});
    return a;
}

std::vector<BehaviorProfile> profiles_from(const json& j) {
    std::vector<BehaviorProfile> out;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 3) throw InvalidInput("profile must be [speaking, gaze, location]");
        out.push_back({p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>()});
    }
    return out;
}

std::vector<double> metrics_list(const TaskMetrics& m) {
    const Eigen::VectorXd v = task_metrics_vector(m);
    return {v.data(), v.data() + v.size()};
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

json stamp(const PipelineConfig& c) { return {{"config_hash", config_hash(c)}, {"seed", c.seed}}; }

void write_json(const fs::path& path, const json& j) { atomic_write_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
}

std::string rel(const PipelineConfig& c, const fs::path& p) {
    return p.lexically_relative(c.paths.output_dir).generic_string();
}

std::vector<GroupSession> load_corpus(const PipelineConfig& c, const std::string& stage) {
    if (!fs::is_directory(c.paths.corpus_dir))
        throw MissingArtifact("corpus directory '" + c.paths.corpus_dir.generic_string() + "'", "gen-corpus", stage);
    auto sessions = parse_corpus(c.paths.corpus_dir);
    if (sessions.empty()) throw InvalidInput("corpus contains no sessions");
    return sessions;
}

FeatureOptions feature_options(const PipelineConfig& c) { return {c.thresholds.n_bins, c.thresholds.v_idle}; }

SociogramOptions sociogram_options(const PipelineConfig& c) {
    return {c.thresholds.tau_turn, c.thresholds.d_thresh, c.thresholds.grid_dt};
}

std::vector<std::string> corpus_row_ids(const std::vector<GroupSession>& sessions) {
    std::vector<std::string> ids;
    for (const auto& s : sessions)
        for (const auto& p : s.participants) ids.push_back(s.group_id + "/" + p.participant_id);
    return ids;
}

struct FittedModels {
    ClusterCounts counts;
    CorpusLabels labels;
    std::vector<std::string> row_ids;
    std::optional<RegressionForest> forest;
};

FittedModels load_models(const fs::path& file, const std::string& stage) {
    if (!fs::exists(file)) throw MissingArtifact("models file '" + file.filename().generic_string() + "'", "fit", stage);
    const json j = read_json(file);
    FittedModels m;
    const auto& mods = j.at("modalities");
    auto one = [&](const char* name, ClusterLabels& out) {
        const auto& e = mods.at(name);
        out.k = e.at("selection").at("chosen_k").get<int>();
        out.labels = e.at("labels").get<std::vector<int>>();
        const auto rows = e.at("row_ids").get<std::vector<std::string>>();
        if (m.row_ids.empty()) m.row_ids = rows;
        if (rows != m.row_ids) throw InvalidInput("models file: modalities disagree on participants");
    };
    one("speaking", m.labels.speaking);
    one("gaze", m.labels.gaze);
    one("location", m.labels.location);
    m.counts = {m.labels.speaking.k, m.labels.gaze.k, m.labels.location.k};
    if (!j.at("forest").is_null()) m.forest = j.at("forest").get<RegressionForest>();
    return m;
}

std::vector<BehaviorProfile> profiles_of(const FittedModels& m) {
    std::vector<BehaviorProfile> out;
    for (std::size_t i = 0; i < m.row_ids.size(); ++i)
        out.push_back({m.labels.speaking.labels[i], m.labels.gaze.labels[i], m.labels.location.labels[i]});
    return out;
}

// One-hot group encodings and task targets for every corpus session.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> forest_training_data(const std::vector<GroupSession>& sessions,
                                                                 const std::vector<BehaviorProfile>& profiles,
                                                                 const ClusterCounts& counts) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(sessions.size()), counts.total());
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(sessions.size()), 7);
    std::size_t offset = 0;
    for (std::size_t g = 0; g < sessions.size(); ++g) {
        const auto n = sessions[g].participants.size();
        const std::span<const BehaviorProfile> members(profiles.data() + offset, n);
        offset += n;
        X.row(static_cast<Eigen::Index>(g)) = encode_group_config(members, counts).one_hot.transpose();
        Y.row(static_cast<Eigen::Index>(g)) = task_metrics_vector(*sessions[g].task_metrics).transpose();
    }
    return {X, Y};
}

bool all_have_metrics(const std::vector<GroupSession>& sessions) {
    return std::all_of(sessions.begin(), sessions.end(), [](const GroupSession& s) { return s.task_metrics.has_value(); });
}

fs::path simulated_dir(const PipelineConfig& c) { return c.paths.output_dir / "simulated"; }

std::vector<GroupSession> load_simulated(const PipelineConfig& c, const std::string& stage) {
    const auto dir = simulated_dir(c);
    if (!fs::exists(dir / "provenance.json")) throw MissingArtifact("simulated sessions", "simulate", stage);
    return parse_corpus(dir);
}

// (real group id, simulated group id) for profile-matched groups.
std::vector<std::pair<std::string, std::string>> matched_groups(const PipelineConfig& c) {
    const json prov = read_json(simulated_dir(c) / "provenance.json");
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& g : prov.at("groups"))
        if (!g.at("source_group").is_null())
            out.emplace_back(g.at("source_group").get<std::string>(), g.at("group_id").get<std::string>());
    return out;
}

const GroupSession& find_session(const std::vector<GroupSession>& sessions, const std::string& id) {
    for (const auto& s : sessions)
        if (s.group_id == id) return s;
    throw InvalidInput("session '" + id + "' not found");
}

void write_manifest(const PipelineConfig& c) {
    const auto& root = c.paths.output_dir;
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) {
            const auto r = rel(c, e.path());
            if (r != "manifest.json" && r != "error.json") files.push_back(r);
        }
    std::sort(files.begin(), files.end());
    json list = json::array();
    for (const auto& f : files) list.push_back({{"path", f}, {"fnv1a64", hex64(fnv1a64(read_file(root / f)))}});
    write_json(root / "manifest.json", {{"stamp", stamp(c)}, {"files", list}});
}

StageResult& merge(StageResult& into, const StageResult& r) {
    into.artifacts.insert(into.artifacts.end(), r.artifacts.begin(), r.artifacts.end());
    into.warnings.insert(into.warnings.end(), r.warnings.begin(), r.warnings.end());
    return into;
}

constexpr std::array<GraphKind, 3> kGraphKinds{GraphKind::conversation, GraphKind::proximity,
                                               GraphKind::shared_attention};

}  // namespace

// ---------------------------------------------------------------------------
// Config

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
    check_keys(j, {"version", "seed", "paths", "corpus", "simulation", "thresholds", "forest"}, "root");
    PipelineConfig c;
    if (!j.contains("version")) throw InvalidInput("config: missing 'version'");
    c.version = j.at("version").get<int>();
    if (c.version != kConfigVersion) throw InvalidInput("config: unsupported version " + std::to_string(c.version));
    read_opt(j, "seed", c.seed);

    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        check_keys(p, {"corpus_dir", "models_file", "output_dir"}, "paths");
        if (p.contains("corpus_dir")) c.paths.corpus_dir = p.at("corpus_dir").get<std::string>();
        if (p.contains("models_file")) c.paths.models_file = p.at("models_file").get<std::string>();
        if (p.contains("output_dir")) c.paths.output_dir = p.at("output_dir").get<std::string>();
    }
    c.paths.corpus_dir = resolve(base_dir, c.paths.corpus_dir).lexically_normal();
    c.paths.output_dir = resolve(base_dir, c.paths.output_dir).lexically_normal();

    if (j.contains("corpus")) {
        const auto& k = j.at("corpus");
        check_keys(k, {"n_groups", "group_size", "session_duration", "n_objects", "archetype_mix"}, "corpus");
        read_opt(k, "n_groups", c.corpus.n_groups);
        read_opt(k, "group_size", c.corpus.group_size);
        read_opt(k, "session_duration", c.corpus.session_duration);
        read_opt(k, "n_objects", c.corpus.n_objects);
        if (k.contains("archetype_mix")) c.corpus.archetype_mix = mix_from(k.at("archetype_mix").get<std::string>());
    }
    if (j.contains("simulation")) {
        const auto& s = j.at("simulation");
        check_keys(s, {"session_duration", "group_size", "n_images", "n_categories", "match_corpus", "groups"},
                   "simulation");
        read_opt(s, "session_duration", c.simulation.session_duration);
        read_opt(s, "group_size", c.simulation.group_size);
        read_opt(s, "n_images", c.simulation.n_images);
        read_opt(s, "n_categories", c.simulation.n_categories);
        read_opt(s, "match_corpus", c.simulation.match_corpus);
        if (s.contains("groups"))
            for (const auto& g : s.at("groups")) {
                check_keys(g, {"group_id", "profiles"}, "simulation.groups");
                c.simulation.groups.push_back({g.at("group_id").get<std::string>(), profiles_from(g.at("profiles"))});
            }
    }
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        check_keys(t, {"tau_turn", "d_thresh", "grid_dt", "v_idle", "n_bins", "k_range"}, "thresholds");
        read_opt(t, "tau_turn", c.thresholds.tau_turn);
        read_opt(t, "d_thresh", c.thresholds.d_thresh);
        read_opt(t, "grid_dt", c.thresholds.grid_dt);
        read_opt(t, "v_idle", c.thresholds.v_idle);
        read_opt(t, "n_bins", c.thresholds.n_bins);
        read_opt(t, "k_range", c.thresholds.k_range);
    }
    if (j.contains("forest")) {
        const auto& f = j.at("forest");
        check_keys(f, {"n_trees", "min_leaf", "max_features", "bootstrap"}, "forest");
        read_opt(f, "n_trees", c.forest.n_trees);
        read_opt(f, "min_leaf", c.forest.min_leaf);
        read_opt(f, "max_features", c.forest.max_features);
        read_opt(f, "bootstrap", c.forest.bootstrap);
    }

    require_positive(c.thresholds.tau_turn, "thresholds.tau_turn");
    require_positive(c.thresholds.d_thresh, "thresholds.d_thresh");
    require_positive(c.thresholds.grid_dt, "thresholds.grid_dt");
    require_positive(c.thresholds.v_idle, "thresholds.v_idle");
    if (c.thresholds.n_bins < 7) throw InvalidInput("config: thresholds.n_bins must be >= 7");
    if (c.thresholds.k_range.empty()) throw InvalidInput("config: thresholds.k_range is empty");
    for (int k : c.thresholds.k_range)
        if (k < 1) throw InvalidInput("config: thresholds.k_range entries must be >= 1");
    require_positive(c.simulation.session_duration, "simulation.session_duration");
    if (c.simulation.group_size < 1 || c.simulation.n_images < 1 || c.simulation.n_categories < 1)
        throw InvalidInput("config: simulation sizes must be >= 1");
    if (c.forest.n_trees < 1 || c.forest.min_leaf < 1 || c.forest.max_features < 0)
        throw InvalidInput("config: invalid forest settings");
    return c;
}

PipelineConfig load_config(const fs::path& file) {
    if (!fs::exists(file)) throw IoError("config file not found: " + file.string());
    return config_from_json(read_json(file), file.parent_path().empty() ? fs::path(".") : file.parent_path());
}

json config_to_json(const PipelineConfig& c) {
    json groups = json::array();
    for (const auto& g : c.simulation.groups) groups.push_back({{"group_id", g.group_id}, {"profiles", profiles_json(g.profiles)}});
    return {{"version", c.version},
            {"seed", c.seed},
            {"paths",
             {{"corpus_dir", c.paths.corpus_dir.generic_string()},
              {"models_file", c.paths.models_file.generic_string()},
              {"output_dir", c.paths.output_dir.generic_string()}}},
            {"corpus",
             {{"n_groups", c.corpus.n_groups},
              {"group_size", c.corpus.group_size},
              {"session_duration", c.corpus.session_duration},
              {"n_objects", c.corpus.n_objects},
              {"archetype_mix", mix_name(c.corpus.archetype_mix)}}},
            {"simulation",
             {{"session_duration", c.simulation.session_duration},
              {"group_size", c.simulation.group_size},
              {"n_images", c.simulation.n_images},
              {"n_categories", c.simulation.n_categories},
              {"match_corpus", c.simulation.match_corpus},
              {"groups", groups}}},
            {"thresholds",
             {{"tau_turn", c.thresholds.tau_turn},
              {"d_thresh", c.thresholds.d_thresh},
              {"grid_dt", c.thresholds.grid_dt},
              {"v_idle", c.thresholds.v_idle},
              {"n_bins", c.thresholds.n_bins},
              {"k_range", c.thresholds.k_range}}},
            {"forest",
             {{"n_trees", c.forest.n_trees},
              {"min_leaf", c.forest.min_leaf},
              {"max_features", c.forest.max_features},
              {"bootstrap", c.forest.bootstrap}}}};
}

std::string config_hash(const PipelineConfig& config) {
    json j = config_to_json(config);
    j.erase("seed");
    j.erase("paths");
    return hex64(fnv1a64(j.dump()));
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::fit: return "fit";
        case Stage::simulate: return "simulate";
        case Stage::sociogram: return "sociogram";
        case Stage::evaluate: return "evaluate";
        case Stage::all: return "all";
    }
    throw InvalidInput("unknown stage");
}

Stage stage_from_string(const std::string& name) {
    for (Stage s : {Stage::fit, Stage::simulate, Stage::sociogram, Stage::evaluate, Stage::all})
        if (to_string(s) == name) return s;
    throw InvalidInput("unknown stage '" + name + "'");
}

fs::path models_path(const PipelineConfig& config) { return resolve(config.paths.output_dir, config.paths.models_file); }

// ---------------------------------------------------------------------------
// Stages

StageResult run_gen_corpus(const PipelineConfig& config, const std::optional<fs::path>& dir) {
    CorpusConfig cc = config.corpus;
    cc.seed = config.seed;
    const auto corpus = generate_corpus(cc, builtin_archetypes());
    const fs::path root = dir ? *dir : config.paths.corpus_dir;
    if (fs::exists(root) && !fs::is_directory(root)) throw IoError(root.string() + " exists and is not a directory");
    write_corpus(corpus.sessions, root);
    json truth = json::array();
    for (const auto& a : corpus.assignments) truth.push_back({a.speaking, a.gaze, a.locomotion});
    write_json(root / "ground_truth.json",
               {{"stamp", stamp(config)}, {"row_ids", corpus_row_ids(corpus.sessions)}, {"archetypes", truth}});
    StageResult r;
    for (const auto& s : corpus.sessions) r.artifacts.push_back((root / s.group_id).generic_string());
    r.artifacts.push_back((root / "ground_truth.json").generic_string());
    return r;
}

StageResult run_fit(const PipelineConfig& config) {
    const auto sessions = load_corpus(config, "fit");
    const auto options = feature_options(config);
    StageResult result;
    json modalities = json::object();
    std::vector<std::vector<int>> labels;
    std::vector<int> ks;
    for (std::size_t mi = 0; mi < kModalities.size(); ++mi) {
        const Modality m = kModalities[mi];
        FeatureMatrix fm = build_feature_matrix(sessions, m, options);
        impute_non_finite(fm);
        const FeatureMatrix z = standardize(fm);
        const auto sel = select_model(z.values, config.thresholds.k_range, derive_seed(config.seed, {kSeedFit, mi}));
        const auto lab = assign_clusters(sel.model, z.values);
        for (int c = 0; c < sel.report.chosen_k; ++c)
            if (std::find(lab.begin(), lab.end(), c) == lab.end())
                result.warnings.push_back(to_string(m) + " cluster " + std::to_string(c) + " has no members");
        modalities[to_string(m)] = {{"columns", fm.columns},
                                    {"row_ids", fm.row_ids},
                                    {"mean", std::vector<double>(z.mean.begin(), z.mean.end())},
                                    {"scale", std::vector<double>(z.scale.begin(), z.scale.end())},
                                    {"selection", sel.report},
                                    {"model", sel.model},
                                    {"labels", lab}};
        labels.push_back(lab);
        ks.push_back(sel.report.chosen_k);
    }

    json forest = nullptr;
    if (all_have_metrics(sessions) && sessions.size() >= 2) {
        std::vector<BehaviorProfile> profiles;
        for (std::size_t i = 0; i < labels[0].size(); ++i) profiles.push_back({labels[0][i], labels[1][i], labels[2][i]});
        const ClusterCounts counts{ks[0], ks[1], ks[2]};
        const auto [X, Y] = forest_training_data(sessions, profiles, counts);
        forest = fit_forest(X, Y, derive_seed(config.seed, {kSeedForest}), config.forest, task_metric_names());
    } else {
        result.warnings.push_back("corpus lacks task metrics for every group; no task forest trained");
    }

    const auto path = models_path(config);
    fs::create_directories(path.parent_path());
    write_json(path, {{"stamp", stamp(config)}, {"modalities", modalities}, {"forest", forest},
                      {"warnings", result.warnings}});
    result.artifacts.push_back(rel(config, path));
    return result;
}

StageResult run_simulate(const PipelineConfig& config) {
    const auto models = load_models(models_path(config), "simulate");
    const auto sessions = load_corpus(config, "simulate");
    if (corpus_row_ids(sessions) != models.row_ids)
        throw InvalidInput("corpus participants differ from the ones the models were fitted on; rerun fit");
    StageResult result;
    const auto gens = build_generators(sessions, models.labels);
    result.warnings = gens.warnings;
    const auto profiles = profiles_of(models);

    struct Planned {
        SimulationConfig sim;
        std::optional<std::string> source;
    };
    std::vector<Planned> plan;
    if (config.simulation.match_corpus) {
        std::size_t offset = 0;
        for (const auto& s : sessions) {
            Planned p;
            p.sim.group_id = "sim_" + s.group_id;
            p.sim.session_duration = s.duration;
            p.sim.group_size = static_cast<int>(s.participants.size());
            for (const auto& part : s.participants) {
                p.sim.profiles.push_back(profiles[offset++]);
                p.sim.participant_ids.push_back(part.participant_id);
            }
            p.source = s.group_id;
            plan.push_back(std::move(p));
        }
    }
    for (const auto& g : config.simulation.groups) {
        Planned p;
        p.sim.group_id = g.group_id;
        p.sim.session_duration = config.simulation.session_duration;
        p.sim.group_size = static_cast<int>(g.profiles.size());
        p.sim.profiles = g.profiles;
        plan.push_back(std::move(p));
    }
    if (plan.empty()) throw InvalidInput("simulation: no groups configured (match_corpus is false and groups is empty)");

    std::vector<GroupSession> simulated;
    json groups = json::array();
    for (std::size_t i = 0; i < plan.size(); ++i) {
        auto& p = plan[i];
        p.sim.seed = derive_seed(config.seed, {kSeedSimulate, i});
        p.sim.task = {config.simulation.n_images, config.simulation.n_categories};
        auto res = simulate_group(p.sim, gens, models.forest ? &*models.forest : nullptr);
        for (const auto& w : res.warnings) result.warnings.push_back(p.sim.group_id + ": " + w);
        groups.push_back({{"group_id", p.sim.group_id},
                          {"source_group", p.source ? json(*p.source) : json(nullptr)},
                          {"profiles", profiles_json(p.sim.profiles)},
                          {"participant_ids", p.sim.participant_ids}});
        simulated.push_back(std::move(res.session));
    }

    const auto dir = simulated_dir(config);
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_corpus(simulated, dir);
    write_json(dir / "provenance.json", {{"stamp", stamp(config)}, {"groups", groups}, {"warnings", result.warnings}});
    write_json(config.paths.output_dir / "generators.json", {{"stamp", stamp(config)}, {"generators", gens}});
    for (const auto& s : simulated) result.artifacts.push_back(rel(config, dir / s.group_id));
    result.artifacts.push_back(rel(config, dir / "provenance.json"));
    result.artifacts.push_back("generators.json");
    return result;
}

StageResult run_sociograms(const PipelineConfig& config, const std::vector<GraphKind>& kinds_in) {
    const std::vector<GraphKind> kinds = kinds_in.empty() ? std::vector<GraphKind>(kGraphKinds.begin(), kGraphKinds.end())
                                                          : kinds_in;
    StageResult result;
    const auto real = load_corpus(config, "sociogram");
    std::vector<std::pair<std::string, const std::vector<GroupSession>*>> sources{{"real", &real}};
    std::vector<GroupSession> sim;
    if (fs::exists(simulated_dir(config) / "provenance.json")) {
        sim = load_simulated(config, "sociogram");
        sources.emplace_back("sim", &sim);
    } else {
        result.warnings.push_back("no simulated sessions yet; built sociograms for the corpus only");
    }
    const auto options = sociogram_options(config);
    const json opts = {{"tau_turn", options.tau_turn}, {"d_thresh", options.d_thresh}, {"grid_dt", options.grid_dt}};
    const auto root = config.paths.output_dir / "sociograms";
    fs::remove_all(root);
    for (const auto& [label, sessions] : sources)
        for (const auto& s : *sessions) {
            fs::create_directories(root / label / s.group_id);
            for (GraphKind k : kinds) {
                const auto path = root / label / s.group_id / (to_string(k) + ".json");
                write_json(path, {{"stamp", stamp(config)}, {"options", opts}, {"sociogram", build_sociogram(s, k, options)}});
                result.artifacts.push_back(rel(config, path));
            }
        }
    return result;
}

StageResult run_evaluate(const PipelineConfig& config) {
    const auto models = load_models(models_path(config), "evaluate");
    const auto real = load_corpus(config, "evaluate");
    const auto sim = load_simulated(config, "evaluate");
    if (corpus_row_ids(real) != models.row_ids)
        throw InvalidInput("corpus participants differ from the ones the models were fitted on; rerun fit");
    StageResult result;
    const auto options = feature_options(config);
    const auto reports = config.paths.output_dir / "reports";
    fs::create_directories(reports);
    json summary = {{"stamp", stamp(config)}};

    for (const Modality m : kModalities) {
        FeatureMatrix fr = build_feature_matrix(real, m, options), fs_ = build_feature_matrix(sim, m, options);
        impute_non_finite(fr);
        impute_non_finite(fs_);
        const auto report = fidelity_report(fr, fs_, event_series(real, m, options.n_bins),
                                            event_series(sim, m, options.n_bins));
        const auto path = reports / ("fidelity_" + to_string(m) + ".json");
        write_json(path, {{"stamp", stamp(config)}, {"report", report}});
        result.artifacts.push_back(rel(config, path));
        double hs = 0.0, ws = 0.0;
        for (const auto& f : report.features) {
            hs += f.histogram_similarity;
            ws += f.wasserstein_similarity;
        }
        const auto n = static_cast<double>(report.features.size());
        summary["fidelity"][to_string(m)] = {{"mean_histogram_similarity", hs / n},
                                             {"mean_wasserstein_similarity", ws / n},
                                             {"acf_similarity", report.acf_similarity ? json(*report.acf_similarity) : json(nullptr)},
                                             {"pacf_similarity", report.pacf_similarity ? json(*report.pacf_similarity) : json(nullptr)}};
    }

    const auto pairs = matched_groups(config);
    const auto sopt = sociogram_options(config);
    json graphs = {{"stamp", stamp(config)}};
    for (GraphKind k : kGraphKinds) {
        json per_group = json::array();
        GraphFidelity mean{0, 0, 0, 0, 0};
        for (const auto& [rid, sid] : pairs) {
            const auto f = compare_graphs(build_sociogram(find_session(real, rid), k, sopt),
                                          build_sociogram(find_session(sim, sid), k, sopt));
            per_group.push_back({{"real", rid}, {"sim", sid}, {"fidelity", f}});
            mean.mean_weight_diff += f.mean_weight_diff;
            mean.mean_node_interaction_diff += f.mean_node_interaction_diff;
            mean.jaccard_edges += f.jaccard_edges;
            mean.cosine_similarity += f.cosine_similarity;
            mean.isomorphism_score += f.isomorphism_score;
        }
        json entry = {{"groups", per_group}, {"mean", nullptr}};
        if (!pairs.empty()) {
            const auto n = static_cast<double>(pairs.size());
            mean = {mean.mean_weight_diff / n, mean.mean_node_interaction_diff / n, mean.jaccard_edges / n,
                    mean.cosine_similarity / n, mean.isomorphism_score / n};
            entry["mean"] = mean;
            summary["graphs"][to_string(k)] = mean;
        }
        graphs["kinds"][to_string(k)] = entry;
    }
    if (pairs.empty()) result.warnings.push_back("no profile-matched simulated groups; graph comparison skipped");
    write_json(reports / "graphs.json", graphs);
    result.artifacts.push_back("reports/graphs.json");

    json task = {{"stamp", stamp(config)}, {"evaluation", nullptr}};
    if (all_have_metrics(real) && real.size() >= 3) {
        const auto [X, Y] = forest_training_data(real, profiles_of(models), models.counts);
        const auto ev = evaluate_forest_loo(X, Y, derive_seed(config.seed, {kSeedEvaluate}), config.forest,
                                            task_metric_names());
        task["evaluation"] = ev;
        summary["task"] = {{"r2_standardized", ev.r2}, {"mae_standardized", ev.mae}, {"mae_raw", ev.mae_raw}};
    } else {
        result.warnings.push_back("fewer than 3 corpus groups with task metrics; forest evaluation skipped");
    }
    json predicted = json::object();
    for (const auto& s : sim)
        if (s.task_metrics) predicted[s.group_id] = metrics_list(*s.task_metrics);
    task["simulated_task_metrics"] = {{"metric_names", task_metric_names()}, {"groups", predicted}};
    write_json(reports / "forest.json", task);
    result.artifacts.push_back("reports/forest.json");

    summary["warnings"] = result.warnings;
    write_json(reports / "summary.json", summary);
    result.artifacts.push_back("reports/summary.json");
    return result;
}

StageResult run_pipeline(const PipelineConfig& config, Stage stage) {
    fs::create_directories(config.paths.output_dir);
    StageResult result;
    switch (stage) {
        case Stage::fit: result = run_fit(config); break;
        case Stage::simulate: result = run_simulate(config); break;
        case Stage::sociogram: result = run_sociograms(config); break;
        case Stage::evaluate: result = run_evaluate(config); break;
        case Stage::all:
            merge(result, run_fit(config));
            merge(result, run_simulate(config));
            merge(result, run_sociograms(config));
            merge(result, run_evaluate(config));
            break;
    }
    write_manifest(config);
    result.artifacts.push_back("manifest.json");
    return result;
}

TaskMetrics predict_task(const fs::path& models_file, const std::vector<BehaviorProfile>& profiles) {
    const auto models = load_models(models_file, "predict-task");
    if (!models.forest) throw InvalidInput("models file has no task forest (corpus had no task metrics)");
    return predict_task_metrics(*models.forest, encode_group_config(profiles, models.counts));
}

// ---------------------------------------------------------------------------
// Export

namespace {

json event_line(const std::string& source, const GroupSession& s, const std::string& modality, json record) {
    record["source"] = source;
    record["group_id"] = s.group_id;
    record["modality"] = modality;
    return record;
}

std::string jsonl(const std::vector<json>& lines) {
    std::string out;
    for (const auto& l : lines) out += l.dump() + "\n";
    return out;
}

}  // namespace

StageResult export_data(const PipelineConfig& config, const std::string& what, const std::string& format) {
    static const std::set<std::pair<std::string, std::string>> supported{
        {"sessions", "jsonl"},   {"features", "csv"}, {"features", "jsonl"}, {"sociograms", "dot"},
        {"sociograms", "csv"}, {"reports", "csv"},  {"reports", "jsonl"}};
    if (!supported.count({what, format}))
        throw InvalidInput("unsupported export: '" + what + "' as '" + format + "'");

    StageResult result;
    const auto out = config.paths.output_dir / "export";
    fs::create_directories(out);
    auto emit = [&](const fs::path& path, const std::string& content) {
        fs::create_directories(path.parent_path());
        atomic_write_file(path, content);
        result.artifacts.push_back(rel(config, path));
    };

    std::vector<std::pair<std::string, std::vector<GroupSession>>> sources;
    if (what == "sessions" || what == "features") {
        sources.emplace_back("real", load_corpus(config, "export"));
        if (fs::exists(simulated_dir(config) / "provenance.json"))
            sources.emplace_back("sim", load_simulated(config, "export"));
    }

    if (what == "sessions") {
        std::vector<json> lines;
        for (const auto& [src, sessions] : sources)
            for (const auto& s : sessions) {
                lines.push_back(event_line(src, s, "session",
                                           {{"duration", s.duration},
                                            {"participant_ids", [&] {
                                                 std::vector<std::string> ids;
                                                 for (const auto& p : s.participants) ids.push_back(p.participant_id);
                                                 return ids;
                                             }()},
                                            {"task_metrics", s.task_metrics ? json(metrics_list(*s.task_metrics))
                                                                            : json(nullptr)}}));
                for (const auto& p : s.participants) {
                    for (const auto& e : p.speaking)
                        lines.push_back(event_line(src, s, "speaking",
                                                   {{"participant_id", e.participant_id}, {"start", e.start}, {"duration", e.duration}}));
                    for (const auto& e : p.gaze)
                        lines.push_back(event_line(src, s, "gaze",
                                                   {{"participant_id", e.participant_id}, {"start", e.start},
                                                    {"duration", e.duration}, {"target_object_id", e.target_object_id}}));
                    for (const auto& e : p.locations)
                        lines.push_back(event_line(src, s, "location",
                                                   {{"participant_id", e.participant_id}, {"t", e.t}, {"x", e.x}, {"y", e.y}, {"z", e.z}}));
                    for (const auto& e : p.interactions)
                        lines.push_back(event_line(src, s, "interactions",
                                                   {{"participant_id", e.participant_id}, {"t", e.t},
                                                    {"object_id", e.object_id}, {"kind", to_string(e.kind)}}));
                }
            }
        emit(out / "sessions.jsonl", jsonl(lines));
    } else if (what == "features") {
        std::vector<json> lines;
        for (const auto& [src, sessions] : sources)
            for (const Modality m : kModalities) {
                FeatureMatrix fm = build_feature_matrix(sessions, m, feature_options(config));
                impute_non_finite(fm);
                if (format == "csv") {
                    emit(out / ("features_" + src + "_" + to_string(m) + ".csv"), feature_matrix_csv(fm));
                } else {
                    for (Eigen::Index r = 0; r < fm.rows(); ++r) {
                        json values = json::object();
                        for (Eigen::Index c = 0; c < fm.cols(); ++c) values[fm.columns[static_cast<std::size_t>(c)]] = fm.values(r, c);
                        lines.push_back({{"source", src}, {"modality", to_string(m)},
                                         {"row_id", fm.row_ids[static_cast<std::size_t>(r)]}, {"features", values}});
                    }
                }
            }
        if (format == "jsonl") emit(out / "features.jsonl", jsonl(lines));
    } else if (what == "sociograms") {
        const auto root = config.paths.output_dir / "sociograms";
        if (!fs::is_directory(root)) throw MissingArtifact("sociograms", "sociogram", "export");
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const Sociogram g = read_json(f).at("sociogram").get<Sociogram>();
            const auto r = f.lexically_relative(root);  // <source>/<group>/<kind>.json
            auto name = r.parent_path().generic_string();
            std::replace(name.begin(), name.end(), '/', '_');
            name += "_" + r.stem().string();
            if (format == "dot")
                emit(out / "sociograms" / (name + ".dot"), to_dot(g));
            else
                emit(out / "sociograms" / (name + ".csv"), to_edge_csv(g));
        }
    } else {
        const auto root = config.paths.output_dir / "reports";
        if (!fs::exists(root / "summary.json")) throw MissingArtifact("reports", "evaluate", "export");
        std::vector<json> lines;
        for (const Modality m : kModalities) {
            const FidelityReport rep = read_json(root / ("fidelity_" + to_string(m) + ".json")).at("report").get<FidelityReport>();
            if (format == "csv")
                emit(out / "reports" / ("fidelity_" + to_string(m) + ".csv"), fidelity_csv(rep));
            else
                lines.push_back({{"report", "fidelity"}, {"modality", to_string(m)}, {"body", rep}});
        }
        const json graphs = read_json(root / "graphs.json");
        const json task = read_json(root / "forest.json");
        if (format == "csv") {
            std::string csv = "kind,real,sim,mean_weight_diff,mean_node_interaction_diff,jaccard_edges,cosine_similarity,isomorphism_score\n";
            for (const auto& [kind, entry] : graphs.at("kinds").items())
                for (const auto& g : entry.at("groups")) {
                    const auto& f = g.at("fidelity");
                    csv += kind + "," + g.at("real").get<std::string>() + "," + g.at("sim").get<std::string>();
                    for (const char* key : {"mean_weight_diff", "mean_node_interaction_diff", "jaccard_edges",
                                            "cosine_similarity", "isomorphism_score"})
                        csv += "," + format_real(f.at(key).get<double>());
                    csv += "\n";
                }
            emit(out / "reports" / "graphs.csv", csv);
            std::string fcsv = "metric,mae_raw,percent_error\n";
            if (!task.at("evaluation").is_null()) {
                const auto& ev = task.at("evaluation");
                const auto names = ev.at("metric_names").get<std::vector<std::string>>();
                for (std::size_t i = 0; i < names.size(); ++i)
                    fcsv += names[i] + "," + format_real(ev.at("mae_raw_per_metric").at(i).get<double>()) + "," +
                            format_real(ev.at("percent_error").at(i).get<double>()) + "\n";
            }
            emit(out / "reports" / "forest.csv", fcsv);
        } else {
            lines.push_back({{"report", "graphs"}, {"body", graphs.at("kinds")}});
            lines.push_back({{"report", "forest"}, {"body", task.at("evaluation")}});
            emit(out / "reports.jsonl", jsonl(lines));
        }
    }
    return result;
}

const std::vector<VerbMapping>& api_verb_mapping() {
    static const std::vector<VerbMapping> table{
        {"initialize_simulator", "collabsim fit --config <file>"},
        {"set_behavior_profile", "collabsim fit --config <file> (fitted clusters; simulation.groups profiles)"},
        {"set_task", "collabsim fit --config <file> (simulation.n_images, simulation.n_categories, task forest)"},
        {"run_simulation", "collabsim simulate --config <file>"},
        {"get_user_data", "collabsim export --what sessions --format jsonl"},
        {"get_group_data", "collabsim export --what sessions --format jsonl"},
        {"generate_sociograph", "collabsim sociogram --config <file> [--kind <kind>]"},
        {"calculate_task_performance", "collabsim evaluate --config <file>; collabsim predict-task"},
        {"export_data", "collabsim export --what <what> --format <format>"},
    };
    return table;
}

}  // namespace collabsim
