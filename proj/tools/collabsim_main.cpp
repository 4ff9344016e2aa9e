#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "collabsim/common.hpp"
#include "collabsim/pipeline.hpp"

namespace fs = std::filesystem;
using namespace collabsim;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required = true) {
    auto* c = cmd->add_option("--config", o.config, "pipeline config (JSON)");
    if (config_required) c->required();
    cmd->add_option("--seed", o.seed, "overrides the config seed");
    cmd->add_option("--out", o.out, "overrides paths.output_dir");
}

PipelineConfig resolve_config(const CommonOptions& o) {
    PipelineConfig c = o.config.empty() ? config_from_json({{"version", kConfigVersion}}) : load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (!o.out.empty()) c.paths.output_dir = fs::path(o.out).lexically_normal();
    return c;
}

std::vector<BehaviorProfile> parse_profiles(const std::string& text) {
    // "s,g,l;s,g,l;..."
    std::vector<BehaviorProfile> out;
    std::stringstream groups(text);
    std::string item;
    while (std::getline(groups, item, ';')) {
        if (item.empty()) continue;
        std::stringstream parts(item);
        std::string v;
        std::vector<int> ids;
        while (std::getline(parts, v, ',')) ids.push_back(std::stoi(v));
        if (ids.size() != 3) throw InvalidInput("profile '" + item + "' must be speaking,gaze,location");
        out.push_back({ids[0], ids[1], ids[2]});
    }
    if (out.empty()) throw InvalidInput("no profiles given");
    return out;
}

void report(const StageResult& r) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& a : r.artifacts) std::cout << a << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Behavior clustering, simulation and fidelity evaluation for collaborative MR session logs"};
    app.require_subcommand(1);

    CommonOptions gen_o, fit_o, sim_o, soc_o, eval_o, run_o, exp_o;
    auto* gen = app.add_subcommand("gen-corpus", "write a synthetic reference corpus");
    add_common(gen, gen_o, false);
    auto* fit = app.add_subcommand("fit", "features, model selection per modality and task forest");
    add_common(fit, fit_o);
    auto* sim = app.add_subcommand("simulate", "simulate groups from the fitted clusters");
    add_common(sim, sim_o);
    auto* soc = app.add_subcommand("sociogram", "build conversation, proximity and shared-attention graphs");
    add_common(soc, soc_o);
    std::vector<std::string> kinds;
    std::optional<double> tau, dist, grid;
    soc->add_option("--kind", kinds, "conversation, proximity or shared_attention (repeatable)");
    soc->add_option("--tau-turn", tau, "turn window in seconds");
    soc->add_option("--d-thresh", dist, "proximity distance threshold");
    soc->add_option("--grid-dt", grid, "proximity grid step in seconds");
    auto* eval = app.add_subcommand("evaluate", "fidelity, graph and task-forest reports");
    add_common(eval, eval_o);
    auto* run = app.add_subcommand("run", "run one pipeline stage or all of them");
    add_common(run, run_o);
    std::string stage_name = "all";
    run->add_option("--stage", stage_name, "fit, simulate, sociogram, evaluate or all");
    auto* pred = app.add_subcommand("predict-task", "predict task metrics for a group of profiles");
    std::string model_file, profiles_text;
    pred->add_option("--model", model_file, "models file written by fit")->required();
    pred->add_option("--profiles", profiles_text, "member profiles as 's,g,l;s,g,l;...'")->required();
    auto* exp = app.add_subcommand("export", "export sessions, features, sociograms or reports");
    add_common(exp, exp_o);
    std::string what, format;
    exp->add_option("--what", what, "sessions, features, sociograms or reports")->required();
    exp->add_option("--format", format, "jsonl, csv or dot")->required();
    auto* verbs = app.add_subcommand("verbs", "print the API verb to command mapping");

    CLI11_PARSE(app, argc, argv);

    std::optional<PipelineConfig> config;
    try {
        auto with = [&](const CommonOptions& o) -> const PipelineConfig& {
            config = resolve_config(o);
            return *config;
        };
        StageResult result;
        if (*gen) {
            const auto& c = with(gen_o);
            result = run_gen_corpus(c, gen_o.out.empty() ? std::nullopt : std::optional<fs::path>(gen_o.out));
            config.reset();
        } else if (*fit) {
            result = run_pipeline(with(fit_o), Stage::fit);
        } else if (*sim) {
            result = run_pipeline(with(sim_o), Stage::simulate);
        } else if (*soc) {
            PipelineConfig c = resolve_config(soc_o);
            if (tau) c.thresholds.tau_turn = *tau;
            if (dist) c.thresholds.d_thresh = *dist;
            if (grid) c.thresholds.grid_dt = *grid;
            if (!(c.thresholds.tau_turn > 0.0 && c.thresholds.d_thresh > 0.0 && c.thresholds.grid_dt > 0.0))
                throw InvalidInput("sociogram thresholds must be > 0");
            config = c;
            std::vector<GraphKind> ks;
            for (const auto& k : kinds) ks.push_back(graph_kind_from_string(k));
            fs::create_directories(c.paths.output_dir);
            result = run_sociograms(c, ks);
        } else if (*eval) {
            result = run_pipeline(with(eval_o), Stage::evaluate);
        } else if (*run) {
            result = run_pipeline(with(run_o), stage_from_string(stage_name));
        } else if (*pred) {
            const TaskMetrics m = predict_task(model_file, parse_profiles(profiles_text));
            const nlohmann::json j = {{"images_grabbed", m.images_grabbed},     {"total_grabs", m.total_grabs},
                                      {"labels_overridden", m.labels_overridden}, {"images_looked_at", m.images_looked_at},
                                      {"completion_time", m.completion_time},     {"accuracy", m.accuracy},
                                      {"label_changes", m.label_changes}};
            std::cout << j.dump(2) << "\n";
            return 0;
        } else if (*exp) {
            result = export_data(with(exp_o), what, format);
        } else if (*verbs) {
            for (const auto& v : api_verb_mapping()) std::cout << v.api_verb << "\t" << v.cli << "\n";
            return 0;
        }
        if (config) fs::remove(config->paths.output_dir / "error.json");
        report(result);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (config) {
            try {
                fs::create_directories(config->paths.output_dir);
                atomic_write_file(config->paths.output_dir / "error.json",
                                  nlohmann::json{{"error", e.what()}}.dump(2) + "\n");
            } catch (const std::exception&) {
            }
        }
        return 1;
    }
}
