#ifndef COLLABSIM_FEATURES_HPP
#define COLLABSIM_FEATURES_HPP

#include <array>
#include <complex>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "collabsim/logmodel.hpp"

namespace collabsim {

enum class Modality { speaking, gaze, location };

inline constexpr std::array<Modality, 3> kModalities{Modality::speaking, Modality::gaze, Modality::location};

std::string to_string(Modality m);
Modality modality_from_string(const std::string& name);

/// Number of equal-width bins used for timestamp spectra.
inline constexpr int kSpectrumBins = 256;

struct FeatureOptions {
    int n_bins = kSpectrumBins;
    double idle_speed = 0.05;  // units/s
};

// ---------------------------------------------------------------------------
// Spectral helpers

/// Histogram of event start times over [0, duration) in `n_bins` equal bins.
/// Starts at exactly `duration` land in the last bin.
Eigen::VectorXd bin_event_series(std::span<const double> starts, double duration, int n_bins);

/// Unnormalised forward DFT, full spectrum.
Eigen::VectorXcd dft_spectrum(const Eigen::Ref<const Eigen::VectorXd>& series);

/// Unnormalised inverse DFT of a full spectrum (includes the 1/N factor).
Eigen::VectorXd inverse_dft_real(const Eigen::Ref<const Eigen::VectorXcd>& spectrum);

/// |X_1| .. |X_k| of the forward DFT. Requires series.size() >= 2k + 1.
Eigen::VectorXd dft_magnitudes(const Eigen::Ref<const Eigen::VectorXd>& series, int k = 3);

// ---------------------------------------------------------------------------
// Per-participant features. Standard deviations are population (1/n).

struct SpeakingFeatures {
    double instance_count = 0;
    double ts_mean = 0, ts_std = 0;
    double dur_mean = 0, dur_std = 0;
    double fft1 = 0, fft2 = 0, fft3 = 0;

    Eigen::VectorXd to_vector() const;
    static std::vector<std::string> columns();
};

struct GazeFeatures {
    double instance_count = 0;
    double ts_mean = 0, ts_std = 0;
    double dur_mean = 0, dur_std = 0;
    double object_entropy = 0;  // nats
    double fft1 = 0, fft2 = 0, fft3 = 0;

    Eigen::VectorXd to_vector() const;
    static std::vector<std::string> columns();
};

struct LocationFeatures {
    double instance_count = 0;
    double ts_mean = 0, ts_std = 0;
    Eigen::Vector3d pos_mean = Eigen::Vector3d::Zero();
    Eigen::Vector3d pos_std = Eigen::Vector3d::Zero();
    Eigen::Vector3d pos_range = Eigen::Vector3d::Zero();
    double total_distance = 0, total_time = 0;
    double speed_mean = 0, speed_max = 0;
    double accel_mean = 0, accel_max = 0;
    double jerk_mean = 0;
    double tortuosity = 1.0;
    double idle_fraction = 0;
    double fft1 = 0, fft2 = 0, fft3 = 0;

    Eigen::VectorXd to_vector() const;
    static std::vector<std::string> columns();
};

SpeakingFeatures extract_speaking_features(const ParticipantLog& log, double session_duration,
                                           const FeatureOptions& options = {});
GazeFeatures extract_gaze_features(const ParticipantLog& log, double session_duration,
                                   const std::vector<std::string>& catalog, const FeatureOptions& options = {});
LocationFeatures extract_location_features(const ParticipantLog& log, double session_duration,
                                           const FeatureOptions& options = {});

inline constexpr double kTortuosityEpsilon = 1e-6;
inline constexpr double kTortuosityCap = 1e6;

/// Arc length over net displacement, clamped to [1, kTortuosityCap].
double path_tortuosity(std::span<const LocationSample> samples);

// ---------------------------------------------------------------------------
// Feature matrices

struct FeatureMatrix {
    Modality modality = Modality::speaking;
    std::vector<std::string> columns;
    std::vector<std::string> row_ids;  // "<group_id>/<participant_id>"
    Eigen::MatrixXd values;
    /// Filled by standardize(): standardized = (raw - mean) / scale, where a
    /// zero scale marks a constant column that maps to 0.
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

std::vector<std::string> feature_columns(Modality m);

/// One row per participant, in session then participant order.
FeatureMatrix build_feature_matrix(const std::vector<GroupSession>& sessions, Modality m,
                                   const FeatureOptions& options = {});

/// Replaces non-finite entries by the column mean of the finite entries (0 if none).
void impute_non_finite(FeatureMatrix& matrix);

/// Zero mean / unit population std per column; stores the forward transform.
FeatureMatrix standardize(const FeatureMatrix& matrix);

/// Applies a stored standardisation to raw rows with the same column order.
Eigen::MatrixXd apply_standardization(const FeatureMatrix& fitted, const Eigen::Ref<const Eigen::MatrixXd>& raw);
Eigen::MatrixXd inverse_standardization(const FeatureMatrix& fitted, const Eigen::Ref<const Eigen::MatrixXd>& z);

/// Header row of column names followed by one row per participant (row id first).
std::string feature_matrix_csv(const FeatureMatrix& matrix);

}  // namespace collabsim

#endif  // COLLABSIM_FEATURES_HPP
