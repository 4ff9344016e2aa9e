#ifndef COLLABSIM_PIPELINE_HPP
#define COLLABSIM_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "collabsim/corpusgen.hpp"
#include "collabsim/features.hpp"
#include "collabsim/profile.hpp"
#include "collabsim/sociograph.hpp"
#include "collabsim/taskpredict.hpp"

namespace collabsim {

inline constexpr int kConfigVersion = 1;

/// A stage needs an artifact that an earlier stage has not produced.
class MissingArtifact : public std::runtime_error {
public:
    MissingArtifact(const std::string& artifact, const std::string& producing_stage, const std::string& stage);
};

struct PipelinePaths {
    std::filesystem::path corpus_dir = "corpus";
    std::filesystem::path models_file = "models.json";  // relative paths resolve under output_dir
    std::filesystem::path output_dir = "out";
};

struct Thresholds {
    double tau_turn = 2.0;
    double d_thresh = 1.5;
    double grid_dt = 0.5;
    double v_idle = 0.05;
    int n_bins = kSpectrumBins;
    std::vector<int> k_range{1, 2, 3, 4, 5, 6, 7, 8};
};

struct SimulatedGroupSpec {
    std::string group_id;
    std::vector<BehaviorProfile> profiles;
};

struct SimulationSettings {
    double session_duration = 900.0;
    int group_size = 4;
    int n_images = 28;
    int n_categories = 6;
    /// One simulated group per corpus group, with the members' fitted profiles.
    bool match_corpus = true;
    std::vector<SimulatedGroupSpec> groups;
};

struct PipelineConfig {
    int version = kConfigVersion;
    std::uint64_t seed = 1;
    PipelinePaths paths;
    CorpusConfig corpus;
    SimulationSettings simulation;
    Thresholds thresholds;
    ForestConfig forest;
};

/// Relative paths in the document resolve against `base_dir`. Unknown keys
/// and non-positive thresholds are rejected.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& file);
nlohmann::json config_to_json(const PipelineConfig& config);

/// Hash of everything that affects artifact contents (output locations and
/// the seed are excluded; the seed is stamped separately).
std::string config_hash(const PipelineConfig& config);

enum class Stage { fit, simulate, sociogram, evaluate, all };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& name);

struct StageResult {
    std::vector<std::string> artifacts;  // relative to output_dir
    std::vector<std::string> warnings;
};

std::filesystem::path models_path(const PipelineConfig& config);

/// Writes the synthetic corpus to `dir` (default: paths.corpus_dir).
StageResult run_gen_corpus(const PipelineConfig& config, const std::optional<std::filesystem::path>& dir = {});
StageResult run_fit(const PipelineConfig& config);
StageResult run_simulate(const PipelineConfig& config);
StageResult run_sociograms(const PipelineConfig& config, const std::vector<GraphKind>& kinds = {});
StageResult run_evaluate(const PipelineConfig& config);

/// `all` chains fit, simulate, sociogram and evaluate.
StageResult run_pipeline(const PipelineConfig& config, Stage stage);

/// Forest prediction for one group from a models file.
TaskMetrics predict_task(const std::filesystem::path& models_file, const std::vector<BehaviorProfile>& profiles);

/// Supported pairs: sessions/jsonl, features/csv, features/jsonl,
/// sociograms/dot, sociograms/csv, reports/csv, reports/jsonl.
StageResult export_data(const PipelineConfig& config, const std::string& what, const std::string& format);

struct VerbMapping {
    std::string api_verb;
    std::string cli;
};

/// API verb to CLI invocation.
const std::vector<VerbMapping>& api_verb_mapping();

}  // namespace collabsim

#endif  // COLLABSIM_PIPELINE_HPP
