#include "collabsim/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "collabsim/common.hpp"

namespace collabsim {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::speaking: return "speaking";
        case Modality::gaze: return "gaze";
        case Modality::location: return "location";
    }
    return "speaking";
}

Modality modality_from_string(const std::string& name) {
    if (name == "speaking") return Modality::speaking;
    if (name == "gaze") return Modality::gaze;
    if (name == "location") return Modality::location;
    throw InvalidInput("unknown modality '" + name + "'");
}

Eigen::VectorXd bin_event_series(std::span<const double> starts, double duration, int n_bins) {
    if (n_bins < 2) throw InvalidInput("bin_event_series: n_bins must be >= 2");
    if (!(duration > 0.0)) throw InvalidInput("bin_event_series: duration must be > 0");
    Eigen::VectorXd bins = Eigen::VectorXd::Zero(n_bins);
    const double width = duration / n_bins;
    for (double t : starts) {
        auto i = static_cast<Eigen::Index>(std::floor(t / width));
        bins(std::clamp<Eigen::Index>(i, 0, n_bins - 1)) += 1.0;
    }
    return bins;
}

Eigen::VectorXcd dft_spectrum(const Eigen::Ref<const Eigen::VectorXd>& series) {
    Eigen::FFT<double> fft;
    std::vector<double> in(series.data(), series.data() + series.size());
    std::vector<std::complex<double>> out;
    fft.fwd(out, in);
    return Eigen::Map<Eigen::VectorXcd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

Eigen::VectorXd inverse_dft_real(const Eigen::Ref<const Eigen::VectorXcd>& spectrum) {
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> in(spectrum.data(), spectrum.data() + spectrum.size());
    std::vector<std::complex<double>> out;
    fft.inv(out, in);
    Eigen::VectorXd real(static_cast<Eigen::Index>(out.size()));
    for (std::size_t i = 0; i < out.size(); ++i) real(static_cast<Eigen::Index>(i)) = out[i].real();
    return real;
}

Eigen::VectorXd dft_magnitudes(const Eigen::Ref<const Eigen::VectorXd>& series, int k) {
    if (k < 1 || series.size() < 2 * k + 1) throw InvalidInput("dft_magnitudes: series too short");
    return dft_spectrum(series).segment(1, k).cwiseAbs();
}

namespace {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

template <typename Range, typename Proj>
MeanStd population_stats(const Range& r, Proj proj) {
    MeanStd out;
    const auto n = static_cast<double>(std::size(r));
    if (n == 0) return out;
    for (const auto& e : r) out.mean += proj(e);
    out.mean /= n;
    double ss = 0.0;
    for (const auto& e : r) {
        const double d = proj(e) - out.mean;
        ss += d * d;
    }
    out.std = std::sqrt(ss / n);
    return out;
}

template <typename Events>
Eigen::Vector3d start_spectrum(const Events& events, double duration, const FeatureOptions& options) {
    std::vector<double> starts;
    starts.reserve(events.size());
    for (const auto& e : events) starts.push_back(e.start);
    return dft_magnitudes(bin_event_series(starts, duration, options.n_bins), 3);
}

Eigen::Vector3d position(const LocationSample& s) { return {s.x, s.y, s.z}; }

}  // namespace

SpeakingFeatures extract_speaking_features(const ParticipantLog& log, double session_duration,
                                           const FeatureOptions& options) {
    const auto events = merge_overlapping_events(log.speaking);
    SpeakingFeatures f;
    f.instance_count = static_cast<double>(events.size());
    if (events.empty()) return f;
    const auto ts = population_stats(events, [](const SpeakingEvent& e) { return e.start; });
    const auto dur = population_stats(events, [](const SpeakingEvent& e) { return e.duration; });
    f.ts_mean = ts.mean;
    f.ts_std = ts.std;
    f.dur_mean = dur.mean;
    f.dur_std = dur.std;
    const Eigen::Vector3d m = start_spectrum(events, session_duration, options);
    f.fft1 = m(0);
    f.fft2 = m(1);
    f.fft3 = m(2);
    return f;
}

GazeFeatures extract_gaze_features(const ParticipantLog& log, double session_duration,
                                   const std::vector<std::string>& catalog, const FeatureOptions& options) {
    GazeFeatures f;
    const auto& events = log.gaze;
    f.instance_count = static_cast<double>(events.size());
    if (events.empty()) return f;
    const auto ts = population_stats(events, [](const GazeEvent& e) { return e.start; });
    const auto dur = population_stats(events, [](const GazeEvent& e) { return e.duration; });
    f.ts_mean = ts.mean;
    f.ts_std = ts.std;
    f.dur_mean = dur.mean;
    f.dur_std = dur.std;

    std::map<std::string, double> counts;
    for (const auto& e : events) {
        if (!catalog.empty() && std::find(catalog.begin(), catalog.end(), e.target_object_id) == catalog.end())
            throw InvalidInput("gaze target '" + e.target_object_id + "' not in catalog");
        counts[e.target_object_id] += 1.0;
    }
    double h = 0.0;
    for (const auto& [id, c] : counts) {
        const double p = c / f.instance_count;
        h -= p * std::log(p);
    }
    f.object_entropy = std::max(0.0, h);

    const Eigen::Vector3d m = start_spectrum(events, session_duration, options);
    f.fft1 = m(0);
    f.fft2 = m(1);
    f.fft3 = m(2);
    return f;
}

double path_tortuosity(std::span<const LocationSample> samples) {
    if (samples.size() < 2) throw InvalidInput("path_tortuosity: needs >= 2 samples");
    double arc = 0.0;
    for (std::size_t i = 1; i < samples.size(); ++i) arc += (position(samples[i]) - position(samples[i - 1])).norm();
    const double net = (position(samples.back()) - position(samples.front())).norm();
    return std::clamp(arc / std::max(net, kTortuosityEpsilon), 1.0, kTortuosityCap);
}

LocationFeatures extract_location_features(const ParticipantLog& log, double session_duration,
                                           const FeatureOptions& options) {
    const auto& s = log.locations;
    LocationFeatures f;
    f.instance_count = static_cast<double>(s.size());
    if (s.empty()) return f;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (!(s[i].t > s[i - 1].t)) throw InvalidInput("location timestamps must be strictly increasing");

    const auto n = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixX3d pos(n, 3);
    Eigen::VectorXd t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        pos.row(i) = position(s[static_cast<std::size_t>(i)]).transpose();
        t(i) = s[static_cast<std::size_t>(i)].t;
    }
    f.ts_mean = t.mean();
    f.ts_std = std::sqrt((t.array() - f.ts_mean).square().mean());
    f.pos_mean = pos.colwise().mean().transpose();
    f.pos_std = ((pos.rowwise() - f.pos_mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
    f.pos_range = (pos.colwise().maxCoeff() - pos.colwise().minCoeff()).transpose();

    std::vector<double> starts(t.data(), t.data() + n);
    const Eigen::Vector3d m = dft_magnitudes(bin_event_series(starts, session_duration, options.n_bins), 3);
    f.fft1 = m(0);
    f.fft2 = m(1);
    f.fft3 = m(2);
    if (n < 2) return f;

    // velocity on each interval, located at interval midpoints
    const Eigen::Index nv = n - 1;
    Eigen::MatrixX3d vel(nv, 3);
    Eigen::VectorXd dt(nv), mid(nv), speed(nv);
    for (Eigen::Index i = 0; i < nv; ++i) {
        dt(i) = t(i + 1) - t(i);
        mid(i) = 0.5 * (t(i + 1) + t(i));
        const Eigen::RowVector3d step = pos.row(i + 1) - pos.row(i);
        vel.row(i) = step / dt(i);
        speed(i) = step.norm() / dt(i);
    }
    f.total_distance = (pos.bottomRows(nv) - pos.topRows(nv)).rowwise().norm().sum();
    f.total_time = t(n - 1) - t(0);
    f.speed_mean = speed.mean();
    f.speed_max = speed.maxCoeff();
    double idle_time = 0.0;
    for (Eigen::Index i = 0; i < nv; ++i)
        if (speed(i) < options.idle_speed) idle_time += dt(i);
    f.idle_fraction = std::clamp(idle_time / dt.sum(), 0.0, 1.0);
    f.tortuosity = path_tortuosity(s);

    if (nv >= 2) {
        const Eigen::Index na = nv - 1;
        Eigen::MatrixX3d acc(na, 3);
        Eigen::VectorXd acc_t(na);
        for (Eigen::Index i = 0; i < na; ++i) {
            acc.row(i) = (vel.row(i + 1) - vel.row(i)) / (mid(i + 1) - mid(i));
            acc_t(i) = 0.5 * (mid(i + 1) + mid(i));
        }
        const Eigen::VectorXd acc_mag = acc.rowwise().norm();
        f.accel_mean = acc_mag.mean();
        f.accel_max = acc_mag.maxCoeff();
        if (na >= 2) {
            double jerk = 0.0;
            for (Eigen::Index i = 0; i + 1 < na; ++i)
                jerk += (acc.row(i + 1) - acc.row(i)).norm() / (acc_t(i + 1) - acc_t(i));
            f.jerk_mean = jerk / static_cast<double>(na - 1);
        }
    }
    return f;
}

Eigen::VectorXd SpeakingFeatures::to_vector() const {
    Eigen::VectorXd v(8);
    v << instance_count, ts_mean, ts_std, dur_mean, dur_std, fft1, fft2, fft3;
    return v;
}

std::vector<std::string> SpeakingFeatures::columns() {
    return {"instance_count", "ts_mean", "ts_std", "dur_mean", "dur_std", "fft1", "fft2", "fft3"};
}

Eigen::VectorXd GazeFeatures::to_vector() const {
    Eigen::VectorXd v(9);
    v << instance_count, ts_mean, ts_std, dur_mean, dur_std, object_entropy, fft1, fft2, fft3;
    return v;
}

std::vector<std::string> GazeFeatures::columns() {
    return {"instance_count", "ts_mean", "ts_std", "dur_mean", "dur_std", "object_entropy", "fft1", "fft2", "fft3"};
}

Eigen::VectorXd LocationFeatures::to_vector() const {
    Eigen::VectorXd v(24);
    v << instance_count, ts_mean, ts_std, pos_mean(0), pos_mean(1), pos_mean(2), pos_std(0), pos_std(1), pos_std(2),
        pos_range(0), pos_range(1), pos_range(2), total_distance, total_time, speed_mean, speed_max, accel_mean,
        accel_max, jerk_mean, tortuosity, idle_fraction, fft1, fft2, fft3;
    return v;
}

std::vector<std::string> LocationFeatures::columns() {
    return {"instance_count", "ts_mean",        "ts_std",     "x_mean",     "y_mean",     "z_mean",
            "x_std",          "y_std",          "z_std",      "x_range",    "y_range",    "z_range",
            "total_distance", "total_time",     "speed_mean", "speed_max",  "accel_mean", "accel_max",
            "jerk_mean",      "tortuosity",     "idle_fraction", "fft1",    "fft2",       "fft3"};
}

std::vector<std::string> feature_columns(Modality m) {
    switch (m) {
        case Modality::speaking: return SpeakingFeatures::columns();
        case Modality::gaze: return GazeFeatures::columns();
        case Modality::location: return LocationFeatures::columns();
    }
    return {};
}

FeatureMatrix build_feature_matrix(const std::vector<GroupSession>& sessions, Modality m,
                                   const FeatureOptions& options) {
    FeatureMatrix fm;
    fm.modality = m;
    fm.columns = feature_columns(m);
    std::vector<Eigen::VectorXd> rows;
    for (const auto& s : sessions) {
        for (const auto& p : s.participants) {
            fm.row_ids.push_back(s.group_id + "/" + p.participant_id);
            switch (m) {
                case Modality::speaking:
                    rows.push_back(extract_speaking_features(p, s.duration, options).to_vector());
                    break;
                case Modality::gaze:
                    rows.push_back(extract_gaze_features(p, s.duration, s.object_catalog, options).to_vector());
                    break;
                case Modality::location:
                    rows.push_back(extract_location_features(p, s.duration, options).to_vector());
                    break;
            }
        }
    }
    fm.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(fm.columns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) fm.values.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    impute_non_finite(fm);
    return fm;
}

void impute_non_finite(FeatureMatrix& matrix) {
    auto& v = matrix.values;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        double sum = 0.0;
        int n = 0;
        for (Eigen::Index r = 0; r < v.rows(); ++r)
            if (std::isfinite(v(r, c))) {
                sum += v(r, c);
                ++n;
            }
        const double fill = n > 0 ? sum / n : 0.0;
        for (Eigen::Index r = 0; r < v.rows(); ++r)
            if (!std::isfinite(v(r, c))) v(r, c) = fill;
    }
}

FeatureMatrix standardize(const FeatureMatrix& matrix) {
    if (matrix.rows() < 2) throw InvalidInput("standardize: needs >= 2 rows");
    FeatureMatrix out = matrix;
    out.mean = matrix.values.colwise().mean();
    const Eigen::MatrixXd centered = matrix.values.rowwise() - out.mean;
    const Eigen::RowVectorXd std = (centered.array().square().colwise().mean()).sqrt();
    out.scale = std;
    for (Eigen::Index c = 0; c < std.size(); ++c) {
        if (std(c) < 1e-12) {
            out.scale(c) = 0.0;
            out.values.col(c).setZero();
        } else {
            out.values.col(c) = centered.col(c) / std(c);
        }
    }
    return out;
}

Eigen::MatrixXd apply_standardization(const FeatureMatrix& fitted, const Eigen::Ref<const Eigen::MatrixXd>& raw) {
    if (raw.cols() != fitted.mean.size()) throw InvalidInput("apply_standardization: column count mismatch");
    Eigen::MatrixXd z = raw.rowwise() - fitted.mean;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        if (fitted.scale(c) == 0.0)
            z.col(c).setZero();
        else
            z.col(c) /= fitted.scale(c);
    }
    return z;
}

Eigen::MatrixXd inverse_standardization(const FeatureMatrix& fitted, const Eigen::Ref<const Eigen::MatrixXd>& z) {
    if (z.cols() != fitted.mean.size()) throw InvalidInput("inverse_standardization: column count mismatch");
    return (z.array().rowwise() * fitted.scale.array()).rowwise() + fitted.mean.array();
}

std::string feature_matrix_csv(const FeatureMatrix& matrix) {
    std::ostringstream o;
    o << "row_id";
    for (const auto& c : matrix.columns) o << ',' << c;
    o << '\n';
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        o << (static_cast<std::size_t>(r) < matrix.row_ids.size() ? matrix.row_ids[static_cast<std::size_t>(r)]
                                                                    : std::to_string(r));
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) o << ',' << format_real(matrix.values(r, c));
        o << '\n';
    }
    return o.str();
}

}  // namespace collabsim
