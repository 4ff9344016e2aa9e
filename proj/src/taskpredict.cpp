#include "collabsim/taskpredict.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "collabsim/common.hpp"

namespace collabsim {

std::vector<std::string> task_metric_names() {
    return {"images_grabbed",   "total_grabs",     "labels_overridden", "images_looked_at",
            "completion_time",  "accuracy",        "label_changes"};
}

Eigen::VectorXd task_metrics_vector(const TaskMetrics& m) {
    Eigen::VectorXd v(7);
    v << static_cast<double>(m.images_grabbed), static_cast<double>(m.total_grabs),
        static_cast<double>(m.labels_overridden), static_cast<double>(m.images_looked_at), m.completion_time,
        m.accuracy, static_cast<double>(m.label_changes);
    return v;
}

GroupConfigEncoding encode_group_config(std::span<const BehaviorProfile> members, const ClusterCounts& counts) {
    if (members.empty()) throw InvalidInput("encode_group_config: need at least one profile");
    if (counts.speaking < 1 || counts.gaze < 1 || counts.location < 1)
        throw InvalidInput("encode_group_config: every modality needs >= 1 cluster");
    auto mode = [&](int BehaviorProfile::*field, int k, const char* name) {
        std::vector<int> tally(static_cast<std::size_t>(k), 0);
        for (const auto& m : members) {
            const int c = m.*field;
            if (c < 0 || c >= k)
                throw InvalidInput(std::string("encode_group_config: ") + name + " cluster " + std::to_string(c) +
                                   " out of range");
            ++tally[static_cast<std::size_t>(c)];
        }
        return static_cast<int>(std::max_element(tally.begin(), tally.end()) - tally.begin());
    };
    GroupConfigEncoding enc;
    enc.representative.speaking_cluster = mode(&BehaviorProfile::speaking_cluster, counts.speaking, "speaking");
    enc.representative.gaze_cluster = mode(&BehaviorProfile::gaze_cluster, counts.gaze, "gaze");
    enc.representative.location_cluster = mode(&BehaviorProfile::location_cluster, counts.location, "location");
    enc.one_hot = Eigen::VectorXd::Zero(counts.total());
    enc.one_hot(enc.representative.speaking_cluster) = 1.0;
    enc.one_hot(counts.speaking + enc.representative.gaze_cluster) = 1.0;
    enc.one_hot(counts.speaking + counts.gaze + enc.representative.location_cluster) = 1.0;
    return enc;
}

double RegressionTree::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (nodes.empty()) throw InvalidInput("predict: empty tree");
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        i = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

namespace {

struct TreeBuilder {
    const Eigen::Ref<const Eigen::MatrixXd>& X;
    const Eigen::VectorXd& y;
    int min_leaf;
    int max_features;
    Rng rng;
    RegressionTree tree;

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    bool constant_on(int f, const std::vector<long>& rows) const {
        for (long r : rows)
            if (X(r, f) != X(rows.front(), f)) return false;
        return true;
    }

    Split best_split_on(int f, const std::vector<long>& rows, double parent_sse) const {
        std::vector<std::pair<double, double>> v;
        v.reserve(rows.size());
        for (long r : rows) v.emplace_back(X(r, f), y(r));
        std::sort(v.begin(), v.end());
        const auto n = static_cast<long>(v.size());
        double total = 0.0, total_sq = 0.0;
        for (const auto& [xv, yv] : v) {
            total += yv;
            total_sq += yv * yv;
        }
        Split best;
        double left = 0.0, left_sq = 0.0;
        for (long i = 0; i + 1 < n; ++i) {
            left += v[static_cast<std::size_t>(i)].second;
            left_sq += v[static_cast<std::size_t>(i)].second * v[static_cast<std::size_t>(i)].second;
            const long nl = i + 1, nr = n - nl;
            if (nl < min_leaf || nr < min_leaf) continue;
            if (!(v[static_cast<std::size_t>(i)].first < v[static_cast<std::size_t>(i + 1)].first)) continue;
            const double right = total - left, right_sq = total_sq - left_sq;
            const double sse = (left_sq - left * left / nl) + (right_sq - right * right / nr);
            const double gain = parent_sse - sse;
            if (gain > best.gain + 1e-12 * std::max(1.0, parent_sse)) {
                best.feature = f;
                best.gain = gain;
                best.threshold = 0.5 * (v[static_cast<std::size_t>(i)].first + v[static_cast<std::size_t>(i + 1)].first);
            }
        }
        return best;
    }

    int build(std::vector<long> rows) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        double sum = 0.0, sum_sq = 0.0;
        for (long r : rows) {
            sum += y(r);
            sum_sq += y(r) * y(r);
        }
        const auto n = static_cast<double>(rows.size());
        tree.nodes[static_cast<std::size_t>(id)].value = sum / n;
        tree.nodes[static_cast<std::size_t>(id)].n_rows = static_cast<long>(rows.size());
        const double sse = std::max(0.0, sum_sq - sum * sum / n);
        if (static_cast<long>(rows.size()) < 2L * min_leaf || sse <= 1e-12 * std::max(1.0, sum_sq)) return id;

        // Candidate features are drawn without replacement. Features constant
        // on the node do not count toward max_features; when a draw yields no
        // valid split, drawing continues through the remaining features.
        std::vector<int> order(static_cast<std::size_t>(X.cols()));
        std::iota(order.begin(), order.end(), 0);
        Split best;
        int visited = 0;
        for (int i = 0; i < static_cast<int>(order.size()); ++i) {
            std::uniform_int_distribution<int> pick(i, static_cast<int>(order.size()) - 1);
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
            const int f = order[static_cast<std::size_t>(i)];
            if (constant_on(f, rows)) continue;
            const Split s = best_split_on(f, rows, sse);
            if (s.feature >= 0 && s.gain > best.gain) best = s;
            if (++visited >= max_features && best.feature >= 0) break;
        }
        if (best.feature < 0) return id;

        std::vector<long> left, right;
        for (long r : rows) (X(r, best.feature) <= best.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        const int l = build(std::move(left));
        const int r = build(std::move(right));
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = r;
        return id;
    }
};

void check_training_data(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::MatrixXd>& Y) {
    if (X.rows() == 0 || X.cols() == 0 || Y.cols() == 0) throw InvalidInput("fit_forest: degenerate input");
    if (X.rows() != Y.rows()) throw InvalidInput("fit_forest: X and Y row counts differ");
    if (X.rows() < 2) throw InvalidInput("fit_forest: need at least 2 rows");
    if (!X.allFinite() || !Y.allFinite()) throw InvalidInput("fit_forest: non-finite input");
}

}  // namespace

RegressionForest fit_forest(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::MatrixXd>& Y,
                            std::uint64_t seed, const ForestConfig& config, std::vector<std::string> target_names) {
    check_training_data(X, Y);
    if (config.n_trees < 1 || config.min_leaf < 1 || config.max_features < 0)
        throw InvalidInput("fit_forest: invalid forest config");
    if (target_names.empty()) {
        for (Eigen::Index t = 0; t < Y.cols(); ++t) target_names.push_back("y" + std::to_string(t));
    }
    if (static_cast<Eigen::Index>(target_names.size()) != Y.cols())
        throw InvalidInput("fit_forest: target name count differs from Y columns");

    RegressionForest forest;
    forest.config = config;
    forest.input_dim = static_cast<int>(X.cols());
    forest.target_names = std::move(target_names);
    const int d = static_cast<int>(X.cols());
    const int mtry = config.max_features > 0 ? std::min(config.max_features, d)
                                             : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
    const long n = X.rows();
    forest.trees.resize(static_cast<std::size_t>(Y.cols()));
    for (Eigen::Index t = 0; t < Y.cols(); ++t) {
        const Eigen::VectorXd y = Y.col(t);
        for (int b = 0; b < config.n_trees; ++b) {
            TreeBuilder builder{X, y, config.min_leaf, mtry,
                                make_rng(seed, {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(b)}), {}};
            std::vector<long> rows(static_cast<std::size_t>(n));
            if (config.bootstrap) {
                std::uniform_int_distribution<long> pick(0, n - 1);
                for (auto& r : rows) r = pick(builder.rng);
                std::sort(rows.begin(), rows.end());
            } else {
                std::iota(rows.begin(), rows.end(), 0L);
            }
            builder.build(std::move(rows));
            forest.trees[static_cast<std::size_t>(t)].push_back(std::move(builder.tree));
        }
    }
    return forest;
}

Eigen::VectorXd predict_raw(const RegressionForest& forest, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != forest.input_dim)
        throw InvalidInput("predict: expected " + std::to_string(forest.input_dim) + " inputs, got " +
                           std::to_string(x.size()));
    Eigen::VectorXd out(static_cast<Eigen::Index>(forest.trees.size()));
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        double sum = 0.0;
        for (const auto& tree : forest.trees[t]) sum += tree.predict(x);
        out(static_cast<Eigen::Index>(t)) = sum / static_cast<double>(forest.trees[t].size());
    }
    return out;
}

TaskMetrics predict_task_metrics(const RegressionForest& forest, const GroupConfigEncoding& x) {
    if (forest.target_names != task_metric_names())
        throw InvalidInput("predict_task_metrics: forest targets are not the task metrics");
    const Eigen::VectorXd p = predict_raw(forest, x.one_hot);
    auto count = [&](int i) { return static_cast<long>(std::llround(std::max(0.0, p(i)))); };
    TaskMetrics m;
    m.images_grabbed = count(0);
    m.total_grabs = count(1);
    m.labels_overridden = count(2);
    m.images_looked_at = count(3);
    m.completion_time = std::max(0.0, p(4));
    m.accuracy = std::clamp(p(5), 0.0, 100.0);
    m.label_changes = count(6);
    return m;
}

double r2_score(std::span<const double> truth, std::span<const double> predicted) {
    if (truth.size() != predicted.size() || truth.empty()) throw InvalidInput("r2_score: size mismatch or empty");
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

double mean_absolute_error(std::span<const double> truth, std::span<const double> predicted) {
    if (truth.size() != predicted.size() || truth.empty())
        throw InvalidInput("mean_absolute_error: size mismatch or empty");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - predicted[i]);
    return s / static_cast<double>(truth.size());
}

ForestEvaluation evaluate_forest_loo(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                     const Eigen::Ref<const Eigen::MatrixXd>& Y, std::uint64_t seed,
                                     const ForestConfig& config, std::vector<std::string> target_names) {
    check_training_data(X, Y);
    if (X.rows() < 3) throw InvalidInput("evaluate_forest_loo: need at least 3 groups");
    const long n = X.rows();
    const Eigen::Index m = Y.cols();
    if (target_names.empty())
        for (Eigen::Index t = 0; t < m; ++t) target_names.push_back("y" + std::to_string(t));

    Eigen::MatrixXd pred(n, m);
    for (long g = 0; g < n; ++g) {
        Eigen::MatrixXd Xt(n - 1, X.cols()), Yt(n - 1, m);
        for (long r = 0, o = 0; r < n; ++r) {
            if (r == g) continue;
            Xt.row(o) = X.row(r);
            Yt.row(o++) = Y.row(r);
        }
        const auto forest = fit_forest(Xt, Yt, derive_seed(seed, {static_cast<std::uint64_t>(g)}), config, target_names);
        pred.row(g) = predict_raw(forest, X.row(g).transpose()).transpose();
    }

    const Eigen::RowVectorXd mean = Y.colwise().mean();
    Eigen::RowVectorXd scale = ((Y.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
    for (Eigen::Index t = 0; t < m; ++t)
        if (!(scale(t) > 0.0)) scale(t) = 1.0;
    std::vector<double> zt, zp, raw_t, raw_p;
    ForestEvaluation ev;
    ev.metric_names = target_names;
    for (Eigen::Index t = 0; t < m; ++t) {
        double abs_sum = 0.0, pct_sum = 0.0;
        for (long g = 0; g < n; ++g) {
            const double truth = Y(g, t), p = pred(g, t);
            zt.push_back((truth - mean(t)) / scale(t));
            zp.push_back((p - mean(t)) / scale(t));
            raw_t.push_back(truth);
            raw_p.push_back(p);
            abs_sum += std::abs(p - truth);
            pct_sum += std::abs(p - truth) / std::max(std::abs(truth), 1e-9) * 100.0;
        }
        ev.mae_raw_per_metric.push_back(abs_sum / static_cast<double>(n));
        ev.percent_error.push_back(pct_sum / static_cast<double>(n));
    }
    ev.mae = mean_absolute_error(zt, zp);
    ev.r2 = r2_score(zt, zp);
    ev.mae_raw = mean_absolute_error(raw_t, raw_p);
    return ev;
}

void to_json(nlohmann::json& j, const RegressionForest& f) {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& trees : f.trees) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& tree : trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : tree.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.n_rows});
            arr.push_back(std::move(nodes));
        }
        targets.push_back(std::move(arr));
    }
    j = {{"config",
          {{"n_trees", f.config.n_trees},
           {"min_leaf", f.config.min_leaf},
           {"max_features", f.config.max_features},
           {"bootstrap", f.config.bootstrap}}},
         {"input_dim", f.input_dim},
         {"target_names", f.target_names},
         {"trees", std::move(targets)}};
}

void from_json(const nlohmann::json& j, RegressionForest& f) {
    f = {};
    const auto& c = j.at("config");
    f.config.n_trees = c.at("n_trees").get<int>();
    f.config.min_leaf = c.at("min_leaf").get<int>();
    f.config.max_features = c.at("max_features").get<int>();
    f.config.bootstrap = c.at("bootstrap").get<bool>();
    f.input_dim = j.at("input_dim").get<int>();
    f.target_names = j.at("target_names").get<std::vector<std::string>>();
    for (const auto& trees : j.at("trees")) {
        std::vector<RegressionTree> ts;
        for (const auto& nodes : trees) {
            RegressionTree tree;
            for (const auto& n : nodes) {
                TreeNode node{n.at(0).get<int>(),    n.at(1).get<double>(), n.at(2).get<int>(),
                              n.at(3).get<int>(),    n.at(4).get<double>(), n.at(5).get<long>()};
                const auto count = static_cast<int>(nodes.size());
                if (node.feature >= f.input_dim || (node.feature >= 0 && (node.left <= 0 || node.left >= count ||
                                                                           node.right <= 0 || node.right >= count)))
                    throw InvalidInput("forest json: invalid node");
                tree.nodes.push_back(node);
            }
            if (tree.nodes.empty()) throw InvalidInput("forest json: empty tree");
            ts.push_back(std::move(tree));
        }
        f.trees.push_back(std::move(ts));
    }
    if (f.trees.size() != f.target_names.size()) throw InvalidInput("forest json: target count mismatch");
}

void to_json(nlohmann::json& j, const ForestEvaluation& e) {
    j = {{"mae_standardized", e.mae},           {"r2_standardized", e.r2},   {"mae_raw", e.mae_raw},
         {"metric_names", e.metric_names},      {"mae_raw_per_metric", e.mae_raw_per_metric},
         {"percent_error", e.percent_error}};
}

}  // namespace collabsim
