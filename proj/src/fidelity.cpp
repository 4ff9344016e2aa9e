#include "collabsim/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "collabsim/common.hpp"

namespace collabsim {

namespace {

void require_samples(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.empty() || b.empty()) throw InvalidInput(std::string(op) + ": empty sample");
    for (auto s : {a, b})
        for (double v : s)
            if (!std::isfinite(v)) throw InvalidInput(std::string(op) + ": non-finite sample");
}

std::vector<double> sorted_copy(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    std::sort(out.begin(), out.end());
    return out;
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double histogram_similarity(std::span<const double> a, std::span<const double> b, int n_bins) {
    require_samples(a, b, "histogram_similarity");
    if (n_bins < 1) throw InvalidInput("histogram_similarity: need >= 1 bin");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto s : {a, b})
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    auto bin = [&](std::span<const double> s) {
        std::vector<double> p(static_cast<std::size_t>(n_bins), 0.0);
        for (double v : s) {
            long i = hi > lo ? static_cast<long>(std::floor((v - lo) / (hi - lo) * n_bins)) : 0;
            p[static_cast<std::size_t>(std::clamp(i, 0L, static_cast<long>(n_bins) - 1))] += 1.0;
        }
        for (double& x : p) x /= static_cast<double>(s.size());
        return p;
    };
    const auto p = bin(a), q = bin(b);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::min(p[i], q[i]);
    return std::clamp(s, 0.0, 1.0);
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
    require_samples(a, b, "wasserstein1");
    const auto x = sorted_copy(a), y = sorted_copy(b);
    if (x.size() == y.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
        return s / static_cast<double>(x.size());
    }
    // Both quantile functions are step functions with breakpoints i/n and j/m;
    // integrate |Qx - Qy| piece by piece.
    const auto n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double u = 0.0, s = 0.0;
    while (i < x.size() && j < y.size()) {
        const double next_x = static_cast<double>(i + 1) / n, next_y = static_cast<double>(j + 1) / m;
        const double next = std::min(next_x, next_y);
        s += (next - u) * std::abs(x[i] - y[j]);
        u = next;
        if (next_x <= next) ++i;
        if (next_y <= next) ++j;
    }
    return s;
}

AutocorrelationProfile autocorrelation_profile(const Eigen::Ref<const Eigen::VectorXd>& series, int max_lag) {
    if (max_lag < 1) throw InvalidInput("autocorrelation_profile: max_lag must be >= 1");
    if (series.size() <= max_lag + 1) throw InvalidInput("autocorrelation_profile: series too short for max_lag");
    if (!series.allFinite()) throw InvalidInput("autocorrelation_profile: non-finite series");
    const Eigen::VectorXd c = series.array() - series.mean();
    const double denom = c.squaredNorm();
    if (!(denom > 0.0)) throw InvalidInput("autocorrelation_profile: constant series");
    const Eigen::Index n = c.size();

    AutocorrelationProfile p;
    p.acf.resize(max_lag + 1);
    p.acf(0) = 1.0;
    for (int k = 1; k <= max_lag; ++k) p.acf(k) = c.head(n - k).dot(c.tail(n - k)) / denom;

    // Durbin-Levinson
    p.pacf = Eigen::VectorXd::Zero(max_lag + 1);
    p.pacf(0) = 1.0;
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(max_lag + 1), prev = phi;
    for (int k = 1; k <= max_lag; ++k) {
        double num = p.acf(k), den = 1.0;
        for (int j = 1; j < k; ++j) {
            num -= prev(j) * p.acf(k - j);
            den -= prev(j) * p.acf(j);
        }
        if (std::abs(den) < 1e-14) break;
        phi(k) = num / den;
        for (int j = 1; j < k; ++j) phi(j) = prev(j) - phi(k) * prev(k - j);
        p.pacf(k) = phi(k);
        prev = phi;
    }
    return p;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) return std::nullopt;
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> rank_paired_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) return std::nullopt;
    const auto x = sorted_copy(a), y = sorted_copy(b);
    return pearson(x, y);
}

std::vector<Eigen::VectorXd> event_series(const std::vector<GroupSession>& sessions, Modality m, int n_bins) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& s : sessions)
        for (const auto& p : s.participants) {
            std::vector<double> t;
            switch (m) {
                case Modality::speaking:
                    for (const auto& e : p.speaking) t.push_back(e.start);
                    break;
                case Modality::gaze:
                    for (const auto& e : p.gaze) t.push_back(e.start);
                    break;
                case Modality::location:
                    for (const auto& e : p.locations) t.push_back(e.t);
                    break;
            }
            out.push_back(bin_event_series(t, s.duration, n_bins));
        }
    return out;
}

namespace {

// Mean profile over the non-constant series; empty when there are none.
std::optional<AutocorrelationProfile> mean_profile(const std::vector<Eigen::VectorXd>& series, int max_lag) {
    AutocorrelationProfile sum{Eigen::VectorXd::Zero(max_lag + 1), Eigen::VectorXd::Zero(max_lag + 1)};
    int used = 0;
    for (const auto& s : series) {
        if (s.size() <= max_lag + 1 || !((s.array() - s.mean()).matrix().squaredNorm() > 0.0)) continue;
        const auto p = autocorrelation_profile(s, max_lag);
        sum.acf += p.acf;
        sum.pacf += p.pacf;
        ++used;
    }
    if (used == 0) return std::nullopt;
    sum.acf /= used;
    sum.pacf /= used;
    return sum;
}

std::optional<double> lag_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const std::span<const double> x(a.data() + 1, static_cast<std::size_t>(a.size() - 1));
    const std::span<const double> y(b.data() + 1, static_cast<std::size_t>(b.size() - 1));
    if (a == b) return 1.0;
    return pearson(x, y);
}

}  // namespace

FidelityReport fidelity_report(const FeatureMatrix& real, const FeatureMatrix& sim,
                               const std::vector<Eigen::VectorXd>& real_series,
                               const std::vector<Eigen::VectorXd>& sim_series, const FidelityOptions& options) {
    if (real.columns != sim.columns || real.modality != sim.modality)
        throw InvalidInput("fidelity_report: feature columns differ");
    if (real.rows() == 0 || sim.rows() == 0) throw InvalidInput("fidelity_report: empty feature matrix");
    FidelityReport report;
    report.modality = real.modality;
    for (Eigen::Index c = 0; c < real.cols(); ++c) {
        const Eigen::VectorXd a = real.values.col(c), b = sim.values.col(c);
        const std::span<const double> x(a.data(), static_cast<std::size_t>(a.size()));
        const std::span<const double> y(b.data(), static_cast<std::size_t>(b.size()));
        FeatureFidelity f;
        f.feature = real.columns[static_cast<std::size_t>(c)];
        f.real_mean = a.mean();
        f.sim_mean = b.mean();
        f.histogram_similarity = histogram_similarity(x, y, options.n_bins);
        f.wasserstein_distance = wasserstein1(x, y);
        f.wasserstein_similarity = 1.0 / (1.0 + f.wasserstein_distance);
        f.pearson_correlation = rank_paired_correlation(x, y);
        if (!f.pearson_correlation && x.size() == y.size() && sorted_copy(x) == sorted_copy(y))
            f.pearson_correlation = 1.0;
        report.features.push_back(std::move(f));
    }
    const auto pr = mean_profile(real_series, options.max_lag);
    const auto ps = mean_profile(sim_series, options.max_lag);
    if (pr && ps) {
        report.acf_similarity = lag_similarity(pr->acf, ps->acf);
        report.pacf_similarity = lag_similarity(pr->pacf, ps->pacf);
    }
    return report;
}

std::string fidelity_csv(const FidelityReport& report) {
    std::string out =
        "feature,real_mean,sim_mean,histogram_similarity,wasserstein_distance,wasserstein_similarity,"
        "pearson_correlation\n";
    for (const auto& f : report.features) {
        out += f.feature + "," + format_real(f.real_mean) + "," + format_real(f.sim_mean) + "," +
               format_real(f.histogram_similarity) + "," + format_real(f.wasserstein_distance) + "," +
               format_real(f.wasserstein_similarity) + "," +
               (f.pearson_correlation ? format_real(*f.pearson_correlation) : std::string()) + "\n";
    }
    return out;
}

namespace {
nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
std::optional<double> opt_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}
}  // namespace

void to_json(nlohmann::json& j, const FidelityReport& r) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& f : r.features)
        features.push_back({{"feature", f.feature},
                            {"real_mean", f.real_mean},
                            {"sim_mean", f.sim_mean},
                            {"histogram_similarity", f.histogram_similarity},
                            {"wasserstein_distance", f.wasserstein_distance},
                            {"wasserstein_similarity", f.wasserstein_similarity},
                            {"pearson_correlation", opt_json(f.pearson_correlation)}});
    j = {{"modality", to_string(r.modality)},
         {"features", features},
         {"acf_similarity", opt_json(r.acf_similarity)},
         {"pacf_similarity", opt_json(r.pacf_similarity)}};
}

void from_json(const nlohmann::json& j, FidelityReport& r) {
    r = {};
    r.modality = modality_from_string(j.at("modality").get<std::string>());
    for (const auto& f : j.at("features"))
        r.features.push_back({f.at("feature").get<std::string>(), f.at("real_mean").get<double>(),
                              f.at("sim_mean").get<double>(), f.at("histogram_similarity").get<double>(),
                              f.at("wasserstein_distance").get<double>(), f.at("wasserstein_similarity").get<double>(),
                              opt_from(f.at("pearson_correlation"))});
    r.acf_similarity = opt_from(j.at("acf_similarity"));
    r.pacf_similarity = opt_from(j.at("pacf_similarity"));
}

}  // namespace collabsim
