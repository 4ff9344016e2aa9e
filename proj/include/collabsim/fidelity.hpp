#ifndef COLLABSIM_FIDELITY_HPP
#define COLLABSIM_FIDELITY_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "collabsim/features.hpp"

namespace collabsim {

/// Intersection of the two normalised histograms on common edges over the union range.
double histogram_similarity(std::span<const double> a, std::span<const double> b, int n_bins = 20);

/// 1-D earth mover's distance between the empirical distributions.
double wasserstein1(std::span<const double> a, std::span<const double> b);

struct AutocorrelationProfile {
    Eigen::VectorXd acf;   // lags 0..max_lag, acf(0) = 1
    Eigen::VectorXd pacf;  // lags 0..max_lag, pacf(0) = 1
};

AutocorrelationProfile autocorrelation_profile(const Eigen::Ref<const Eigen::VectorXd>& series, int max_lag = 20);

/// Pearson correlation; empty when either side has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

/// Pearson correlation of the sorted samples; only defined for equal sizes.
std::optional<double> rank_paired_correlation(std::span<const double> a, std::span<const double> b);

struct FeatureFidelity {
    std::string feature;
    double real_mean = 0.0;
    double sim_mean = 0.0;
    double histogram_similarity = 1.0;
    double wasserstein_distance = 0.0;
    double wasserstein_similarity = 1.0;  // 1 / (1 + distance)
    std::optional<double> pearson_correlation;
    bool operator==(const FeatureFidelity&) const = default;
};

struct FidelityReport {
    Modality modality = Modality::speaking;
    std::vector<FeatureFidelity> features;
    /// Pearson correlation of the mean acf (pacf) over lags 1..max_lag of the
    /// real vs simulated binned event series.
    std::optional<double> acf_similarity;
    std::optional<double> pacf_similarity;
    bool operator==(const FidelityReport&) const = default;
};

struct FidelityOptions {
    int n_bins = 20;
    int max_lag = 20;
};

/// Binned event start times (speaking, gaze) or sample times (location), one
/// series per participant.
std::vector<Eigen::VectorXd> event_series(const std::vector<GroupSession>& sessions, Modality m,
                                          int n_bins = kSpectrumBins);

FidelityReport fidelity_report(const FeatureMatrix& real, const FeatureMatrix& sim,
                               const std::vector<Eigen::VectorXd>& real_series,
                               const std::vector<Eigen::VectorXd>& sim_series, const FidelityOptions& options = {});

std::string fidelity_csv(const FidelityReport& report);
void to_json(nlohmann::json& j, const FidelityReport& r);
void from_json(const nlohmann::json& j, FidelityReport& r);

}  // namespace collabsim

#endif  // COLLABSIM_FIDELITY_HPP
