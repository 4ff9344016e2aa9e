#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "collabsim/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace collabsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json small_config() {
    return {{"version", 1},
            {"seed", 3},
            {"paths", {{"corpus_dir", "corpus"}, {"output_dir", "out"}}},
            {"corpus", {{"n_groups", 4}, {"group_size", 3}, {"session_duration", 900}}},
            {"simulation", {{"session_duration", 300}}},
            {"thresholds", {{"k_range", {1, 2, 3}}, {"n_bins", 64}}},
            {"forest", {{"n_trees", 10}}}};
}

fs::path write_config(const fs::path& dir, const json& j) {
    const auto path = dir / "config.json";
    std::ofstream(path) << j.dump(2);
    return path;
}

struct Run {
    int status;
    std::string out;
    std::string err;
};

Run cli(const std::string& args, const fs::path& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd =
        std::string("\"") + COLLABSIM_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int rc = std::system(cmd.c_str());
    return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, read_file(out), read_file(err)};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("config parsing") {
    const auto c = config_from_json(small_config(), "/base");
    CHECK(c.seed == 3);
    CHECK(c.paths.corpus_dir == fs::path("/base/corpus"));
    CHECK(c.paths.output_dir == fs::path("/base/out"));
    CHECK(models_path(c) == fs::path("/base/out/models.json"));
    CHECK(c.thresholds.k_range == std::vector<int>{1, 2, 3});
    CHECK(c.forest.n_trees == 10);
    CHECK(c.forest.min_leaf == 2);

    auto j = small_config();
    j["thresholds"]["tua_turn"] = 1.0;
    CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("tua_turn"), InvalidInput);
    j = small_config();
    j["extra"] = 1;
    CHECK_THROWS_AS(config_from_json(j), InvalidInput);
    j = small_config();
    j["thresholds"]["d_thresh"] = 0.0;
    CHECK_THROWS_AS(config_from_json(j), InvalidInput);
    j = small_config();
    j["version"] = 2;
    CHECK_THROWS_AS(config_from_json(j), InvalidInput);
    CHECK_THROWS_AS(config_from_json(json{{"seed", 1}}), InvalidInput);

    // seed and locations do not enter the hash
    auto other = c;
    other.seed = 99;
    other.paths.output_dir = "/elsewhere";
    CHECK(config_hash(other) == config_hash(c));
    other.thresholds.tau_turn = 3.0;
    CHECK(config_hash(other) != config_hash(c));
    CHECK(config_from_json(config_to_json(c)).thresholds.k_range == c.thresholds.k_range);

    for (Stage s : {Stage::fit, Stage::simulate, Stage::sociogram, Stage::evaluate, Stage::all})
        CHECK(stage_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(stage_from_string("train"), InvalidInput);
}

TEST_CASE("stages report missing artifacts") {
    testing::TempDir dir("pipe_missing");
    const auto c = config_from_json(small_config(), dir.path());
    CHECK_THROWS_WITH_AS(run_fit(c), doctest::Contains("gen-corpus"), MissingArtifact);

    fs::create_directories(c.paths.corpus_dir);
    CHECK_THROWS_WITH_AS(run_fit(c), "corpus contains no sessions", InvalidInput);

    run_gen_corpus(c);
    CHECK_THROWS_WITH_AS(run_simulate(c), doctest::Contains("'fit'"), MissingArtifact);
    CHECK_THROWS_WITH_AS(run_evaluate(c), doctest::Contains("'fit'"), MissingArtifact);
    CHECK_THROWS_AS(export_data(c, "sociograms", "dot"), MissingArtifact);
    CHECK_THROWS_AS(export_data(c, "reports", "csv"), MissingArtifact);
    CHECK_THROWS_WITH_AS(export_data(c, "sessions", "dot"), doctest::Contains("unsupported export"), InvalidInput);
    CHECK_THROWS_AS(export_data(c, "models", "jsonl"), InvalidInput);
}

TEST_CASE("full pipeline through the library") {
    testing::TempDir dir("pipe_lib");
    const auto c = config_from_json(small_config(), dir.path());
    run_gen_corpus(c);
    const auto r = run_pipeline(c, Stage::all);
    const std::set<std::string> artifacts(r.artifacts.begin(), r.artifacts.end());
    for (const char* a : {"models.json", "generators.json", "reports/summary.json", "reports/graphs.json",
                          "reports/forest.json", "reports/fidelity_speaking.json", "reports/fidelity_gaze.json",
                          "reports/fidelity_location.json", "manifest.json"})
        CHECK(artifacts.count(a) == 1);
    for (const auto& a : r.artifacts) CHECK(fs::exists(c.paths.output_dir / a));

    const json models = json::parse(read_file(c.paths.output_dir / "models.json"));
    CHECK(models.at("stamp").at("config_hash") == config_hash(c));
    CHECK(models.at("stamp").at("seed") == 3);
    for (const char* m : {"speaking", "gaze", "location"}) {
        const auto k = models.at("modalities").at(m).at("selection").at("chosen_k").get<int>();
        CHECK(k >= 1);
        CHECK(k <= 3);
    }

    // every exported sociogram is valid DOT, every CSV has a header and one row per edge
    const auto dots = export_data(c, "sociograms", "dot");
    CHECK(dots.artifacts.size() == 2 * 4 * 3);
    for (const auto& a : dots.artifacts) CHECK(oracle::valid_dot(read_file(c.paths.output_dir / a)));
    for (const auto& a : export_data(c, "sociograms", "csv").artifacts) {
        const auto text = read_file(c.paths.output_dir / a);
        CHECK(text.rfind("source,target,weight\n", 0) == 0);
    }

    // feature CSVs: id column plus the modality's feature columns, one row per participant
    const auto feats = export_data(c, "features", "csv");
    CHECK(feats.artifacts.size() == 6);
    for (Modality m : kModalities) {
        const auto text = read_file(c.paths.output_dir / "export" / ("features_real_" + to_string(m) + ".csv"));
        std::istringstream in(text);
        std::string header;
        std::getline(in, header);
        CHECK(static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) == feature_columns(m).size());
        CHECK(count_lines(text) == 1 + 4 * 3);
    }

    const auto sessions = export_data(c, "sessions", "jsonl");
    std::istringstream lines(read_file(c.paths.output_dir / sessions.artifacts.at(0)));
    std::string line;
    std::set<std::string> sources, modalities;
    while (std::getline(lines, line)) {
        const auto j = json::parse(line);
        sources.insert(j.at("source"));
        modalities.insert(j.at("modality"));
    }
    CHECK(sources == std::set<std::string>{"real", "sim"});
    CHECK(modalities == std::set<std::string>{"session", "speaking", "gaze", "location", "interactions"});

    CHECK_FALSE(export_data(c, "reports", "csv").artifacts.empty());
    CHECK(export_data(c, "reports", "jsonl").artifacts.size() == 1);

    const auto m = predict_task(models_path(c), {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}});
    CHECK(m.accuracy >= 0.0);
    CHECK(m.accuracy <= 100.0);
    CHECK(m.completion_time >= 0.0);
}

TEST_CASE("command line") {
    testing::TempDir dir("pipe_cli");
    const auto cfg = write_config(dir.path(), small_config());
    const std::string with = "--config \"" + cfg.string() + "\"";
    const auto out = dir.path() / "out";

    auto r = cli("fit " + with, dir.path());
    CHECK(r.status == 1);
    CHECK(r.err.find("gen-corpus") != std::string::npos);
    CHECK(fs::exists(out / "error.json"));

    REQUIRE(cli("gen-corpus " + with, dir.path()).status == 0);
    r = cli("run " + with, dir.path());
    CHECK(r.status == 0);
    CHECK(r.out.find("manifest.json") != std::string::npos);
    CHECK_FALSE(fs::exists(out / "error.json"));

    r = cli("export " + with + " --what sessions --format dot", dir.path());
    CHECK(r.status == 1);
    CHECK(r.err.find("unsupported export") != std::string::npos);

    r = cli("sociogram " + with + " --kind conversation --tau-turn 1.5", dir.path());
    CHECK(r.status == 0);
    CHECK(count_lines(r.out) == 2 * 4);
    CHECK(cli("sociogram " + with + " --tau-turn 0", dir.path()).status == 1);

    r = cli("predict-task --model \"" + (out / "models.json").string() + "\" --profiles \"0,0,0;1,0,0;0,1,0\"",
            dir.path());
    CHECK(r.status == 0);
    const auto metrics = json::parse(r.out);
    for (const auto& n : task_metric_names()) CHECK(metrics.contains(n));
    CHECK(cli("predict-task --model \"" + (out / "models.json").string() + "\" --profiles 0,0", dir.path()).status ==
          1);

    r = cli("verbs", dir.path());
    CHECK(r.status == 0);
    CHECK(count_lines(r.out) == 9);

    auto bad = small_config();
    bad["corpus"]["groups"] = 3;
    const auto bad_dir = dir.path() / "bad";
    fs::create_directories(bad_dir);
    r = cli("gen-corpus --config \"" + write_config(bad_dir, bad).string() + "\"", dir.path());
    CHECK(r.status == 1);
    CHECK(r.err.find("unknown key 'groups'") != std::string::npos);
    CHECK(cli("no-such-command", dir.path()).status != 0);
}

TEST_CASE("verb mapping") {
    const auto& m = api_verb_mapping();
    std::set<std::string> verbs;
    for (const auto& v : m) {
        verbs.insert(v.api_verb);
        CHECK(v.cli.rfind("collabsim ", 0) == 0);
    }
    CHECK(verbs == std::set<std::string>{"initialize_simulator", "set_behavior_profile", "set_task", "run_simulation",
                                         "get_user_data", "get_group_data", "generate_sociograph",
                                         "calculate_task_performance", "export_data"});
}

TEST_CASE("pipeline output is reproducible") {
    testing::TempDir a("pipe_det_a"), b("pipe_det_b");
    std::map<std::string, std::string> trees[2];
    int i = 0;
    for (const auto* d : {&a, &b}) {
        const auto c = config_from_json(small_config(), d->path());
        run_gen_corpus(c);
        run_pipeline(c, Stage::all);
        trees[i++] = testing::read_tree(d->path());
    }
    CHECK(trees[0].size() > 20);
    CHECK(trees[0] == trees[1]);

    // a different seed changes the corpus but keeps the config hash
    testing::TempDir s("pipe_seed");
    auto j = small_config();
    j["seed"] = 4;
    const auto c = config_from_json(j, s.path());
    run_gen_corpus(c);
    CHECK(testing::read_tree(c.paths.corpus_dir) != testing::read_tree(config_from_json(small_config(), a.path()).paths.corpus_dir));
}
