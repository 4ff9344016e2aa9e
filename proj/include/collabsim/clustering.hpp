#ifndef COLLABSIM_CLUSTERING_HPP
#define COLLABSIM_CLUSTERING_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace collabsim {

/// Per-restart EM diagnostics handed to GmmConfig::observer.
struct EmTrace {
    int k = 0;
    int restart = 0;
    std::vector<double> log_likelihood;  // total log-likelihood per E-step
    double max_row_sum_error = 0.0;      // max |sum_j r_ij - 1| over all E-steps
    double min_cov_eigenvalue = 0.0;     // smallest eigenvalue after any M-step
};

struct GmmConfig {
    double tol = 1e-4;        // on the per-sample mean log-likelihood
    int max_iter = 200;
    int n_init = 5;
    double reg_covar = 1e-6;  // floor on every covariance eigenvalue
    std::function<void(const EmTrace&)> observer;
};

struct GmmModel {
    int k = 0;
    int d = 0;
    Eigen::VectorXd weights;                   // k
    Eigen::MatrixXd means;                     // k x d
    std::vector<Eigen::MatrixXd> covariances;  // k of d x d
    bool converged = false;
    double final_log_likelihood = 0.0;
    int n_iter = 0;
};

/// EM with full covariances; best of `n_init` k-means++ seeded restarts.
GmmModel fit_gmm(const Eigen::Ref<const Eigen::MatrixXd>& X, int k, std::uint64_t seed, const GmmConfig& config = {});

/// Per-row log density under the mixture.
Eigen::VectorXd log_density(const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X);
double log_likelihood(const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X);

/// Posterior responsibilities, n x k, rows sum to 1.
Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X);

/// Free parameters of a full-covariance mixture: k-1 + k d + k d (d+1) / 2.
long gmm_parameter_count(int k, int d);

double bic(const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X);

/// Argmax posterior per row, ties toward the smaller component index.
std::vector<int> assign_clusters(const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X);

double silhouette_score(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> labels);
double davies_bouldin(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> labels);

enum class SelectionRule { knee, min_bic_fallback };
std::string to_string(SelectionRule rule);

struct KneeResult {
    std::size_t index = 0;
    SelectionRule rule = SelectionRule::knee;
};

inline constexpr double kKneeMinDifference = 0.01;

/// Kneedle on the decreasing part of the curve (up to its first minimum):
/// x and y are normalised to [0,1] and the knee is the point furthest below
/// the chord, (1 - x) - y. Falls back to the first argmin when that distance
/// is below kKneeMinDifference.
KneeResult knee_point(std::span<const double> curve);

struct ModelSelectionReport {
    std::vector<int> k_range;
    std::vector<double> bic_curve;
    std::vector<std::optional<double>> silhouette;  // empty for k = 1 or degenerate assignments
    std::vector<std::optional<double>> dbi;
    int chosen_k = 1;
    SelectionRule selection_rule = SelectionRule::knee;
};

struct ModelSelection {
    GmmModel model;
    ModelSelectionReport report;
};

std::vector<int> default_k_range();  // 1..8

ModelSelection select_model(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<int>& k_range,
                            std::uint64_t seed, const GmmConfig& config = {});

void to_json(nlohmann::json& j, const GmmModel& m);
void from_json(const nlohmann::json& j, GmmModel& m);
void to_json(nlohmann::json& j, const ModelSelectionReport& r);
void from_json(const nlohmann::json& j, ModelSelectionReport& r);

}  // namespace collabsim

#endif  // COLLABSIM_CLUSTERING_HPP
