#ifndef COLLABSIM_TASKPREDICT_HPP
#define COLLABSIM_TASKPREDICT_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "collabsim/logmodel.hpp"
#include "collabsim/profile.hpp"

namespace collabsim {

/// Target columns in TaskMetrics field order.
std::vector<std::string> task_metric_names();
Eigen::VectorXd task_metrics_vector(const TaskMetrics& m);

struct GroupConfigEncoding {
    BehaviorProfile representative;
    Eigen::VectorXd one_hot;  // speaking block, then gaze, then location
};

/// Per-modality mode of the members' clusters (ties toward the smaller id), one-hot encoded.
GroupConfigEncoding encode_group_config(std::span<const BehaviorProfile> members, const ClusterCounts& counts);

struct ForestConfig {
    int n_trees = 100;
    int min_leaf = 2;
    int max_features = 0;  // 0 selects ceil(sqrt(d))
    bool bootstrap = true;
};

struct TreeNode {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean target of the rows reaching the node
    long n_rows = 0;
    bool operator==(const TreeNode&) const = default;
};

/// CART regression tree stored as a flat node array rooted at index 0.
struct RegressionTree {
    std::vector<TreeNode> nodes;
    double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    bool operator==(const RegressionTree&) const = default;
};

/// One bagged ensemble per target column.
struct RegressionForest {
    ForestConfig config;
    int input_dim = 0;
    std::vector<std::string> target_names;
    std::vector<std::vector<RegressionTree>> trees;  // [target][tree]
    bool operator==(const RegressionForest& o) const {
        return input_dim == o.input_dim && target_names == o.target_names && trees == o.trees &&
               config.n_trees == o.config.n_trees && config.min_leaf == o.config.min_leaf &&
               config.max_features == o.config.max_features && config.bootstrap == o.config.bootstrap;
    }
};

RegressionForest fit_forest(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::MatrixXd>& Y,
                            std::uint64_t seed, const ForestConfig& config = {},
                            std::vector<std::string> target_names = {});

/// Mean of per-tree predictions, per target.
Eigen::VectorXd predict_raw(const RegressionForest& forest, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Forest output mapped onto TaskMetrics: counts rounded to the nearest
/// non-negative integer, accuracy clamped to [0, 100]. The forest must have
/// the seven task-metric targets.
TaskMetrics predict_task_metrics(const RegressionForest& forest, const GroupConfigEncoding& x);

double r2_score(std::span<const double> truth, std::span<const double> predicted);
double mean_absolute_error(std::span<const double> truth, std::span<const double> predicted);

struct ForestEvaluation {
    double mae = 0.0;      // pooled over standardized (group, metric) pairs
    double r2 = 0.0;       // pooled over standardized (group, metric) pairs
    double mae_raw = 0.0;  // pooled over raw (group, metric) pairs
    std::vector<std::string> metric_names;
    std::vector<double> mae_raw_per_metric;
    std::vector<double> percent_error;  // mean |pred - true| / max(|true|, 1e-9) * 100
};

/// Leave-one-group-out cross-validation, one row per group.
ForestEvaluation evaluate_forest_loo(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                     const Eigen::Ref<const Eigen::MatrixXd>& Y, std::uint64_t seed,
                                     const ForestConfig& config = {}, std::vector<std::string> target_names = {});

void to_json(nlohmann::json& j, const RegressionForest& f);
void from_json(const nlohmann::json& j, RegressionForest& f);
void to_json(nlohmann::json& j, const ForestEvaluation& e);

}  // namespace collabsim

#endif  // COLLABSIM_TASKPREDICT_HPP
