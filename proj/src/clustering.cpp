#include "collabsim/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>

#include "collabsim/common.hpp"

namespace collabsim {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_finite(const Eigen::Ref<const Eigen::MatrixXd>& X, const char* who) {
    if (!X.allFinite()) throw InvalidInput(std::string(who) + ": non-finite input");
}

// log N(x | mu, Sigma) for every row, via Cholesky of Sigma.
Eigen::VectorXd component_log_pdf(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::RowVectorXd& mean,
                                  const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw InvalidInput("covariance is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    const Eigen::MatrixXd centered = (X.rowwise() - mean).transpose();  // d x n
    const Eigen::MatrixXd y = L.triangularView<Eigen::Lower>().solve(centered);
    const Eigen::VectorXd maha = y.colwise().squaredNorm().transpose();
    return (-0.5 * (static_cast<double>(X.cols()) * kLog2Pi + log_det + maha.array())).matrix();
}

// n x k matrix of log w_j + log N_j(x_i).
Eigen::MatrixXd weighted_log_prob(const GmmModel& m, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    Eigen::MatrixXd out(X.rows(), m.k);
    for (int j = 0; j < m.k; ++j)
        out.col(j) = component_log_pdf(X, m.means.row(j), m.covariances[static_cast<std::size_t>(j)]).array() +
                     std::log(m.weights(j));
    return out;
}

Eigen::VectorXd row_logsumexp(const Eigen::MatrixXd& a) {
    const Eigen::VectorXd mx = a.rowwise().maxCoeff();
    return mx.array() + (a.colwise() - mx).array().exp().rowwise().sum().log();
}

void check_model(const GmmModel& m, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    if (m.k < 1 || static_cast<int>(m.covariances.size()) != m.k) throw InvalidInput("GMM model is not fitted");
    if (X.cols() != m.d) throw InvalidInput("dimension mismatch between model and data");
}

// Covariance as eigenvectors and (floored) eigenvalues.
struct CovFactor {
    Eigen::MatrixXd vectors;
    Eigen::VectorXd values;
};

Eigen::MatrixXd weighted_log_prob(const GmmModel& m, const std::vector<CovFactor>& factors,
                                  const Eigen::Ref<const Eigen::MatrixXd>& X) {
    Eigen::MatrixXd out(X.rows(), m.k);
    const double d = static_cast<double>(X.cols());
    for (int j = 0; j < m.k; ++j) {
        const auto& f = factors[static_cast<std::size_t>(j)];
        const Eigen::MatrixXd y = f.vectors.transpose() * (X.rowwise() - m.means.row(j)).transpose();  // d x n
        const Eigen::VectorXd maha = (y.array().colwise() / f.values.array()).cwiseProduct(y.array()).colwise().sum();
        const double log_det = f.values.array().log().sum();
        out.col(j) = (-0.5 * (d * kLog2Pi + log_det + maha.array()) + std::log(m.weights(j))).matrix();
    }
    return out;
}

// M-step; returns the smallest covariance eigenvalue.
double m_step(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::MatrixXd& resp, double reg, GmmModel& m,
              std::vector<CovFactor>& factors) {
    const auto n = static_cast<double>(X.rows());
    const Eigen::RowVectorXd nk = resp.colwise().sum().array() + 10.0 * std::numeric_limits<double>::epsilon();
    m.weights = (nk / n).transpose();
    m.weights /= m.weights.sum();
    m.means = (resp.transpose() * X).array().colwise() / nk.transpose().array();
    double min_eig = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m.k; ++j) {
        const Eigen::MatrixXd centered = X.rowwise() - m.means.row(j);
        Eigen::MatrixXd cov = (centered.transpose() * resp.col(j).asDiagonal() * centered) / nk(j);
        cov = 0.5 * (cov + cov.transpose());
        // Eigenvalues below the floor are raised to it: the constrained
        // maximiser of the expected log-likelihood, so EM stays monotone.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(reg);
        cov = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
        cov = 0.5 * (cov + cov.transpose());
        min_eig = std::min(min_eig, lambda.minCoeff());
        m.covariances[static_cast<std::size_t>(j)] = std::move(cov);
        factors[static_cast<std::size_t>(j)] = {eig.eigenvectors(), lambda};
    }
    return min_eig;
}

// k-means++ seeding, then hard assignment to the nearest seed.
Eigen::MatrixXd kmeanspp_responsibilities(const Eigen::Ref<const Eigen::MatrixXd>& X, int k, Rng& rng) {
    const Eigen::Index n = X.rows();
    std::vector<Eigen::Index> centers;
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centers.push_back(first(rng));
    Eigen::VectorXd d2 = (X.rowwise() - X.row(centers[0])).rowwise().squaredNorm();
    while (static_cast<int>(centers.size()) < k) {
        Eigen::Index next;
        const double total = d2.sum();
        if (total <= 0.0) {
            next = first(rng);
        } else {
            std::discrete_distribution<Eigen::Index> pick(d2.data(), d2.data() + n);
            next = pick(rng);
        }
        centers.push_back(next);
        d2 = d2.cwiseMin((X.rowwise() - X.row(next)).rowwise().squaredNorm());
    }
    Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
            const double d = (X.row(i) - X.row(centers[static_cast<std::size_t>(j)])).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        resp(i, best) = 1.0;
    }
    // a duplicated seed leaves its column empty: give it the seed point
    for (int j = 0; j < k; ++j)
        if (resp.col(j).sum() == 0.0) {
            const Eigen::Index i = centers[static_cast<std::size_t>(j)];
            resp.row(i).setZero();
            resp(i, j) = 1.0;
        }
    return resp;
}

struct RestartResult {
    GmmModel model;
    EmTrace trace;
};

RestartResult run_em(const Eigen::Ref<const Eigen::MatrixXd>& X, int k, Rng& rng, const GmmConfig& cfg) {
    RestartResult r;
    GmmModel& m = r.model;
    m.k = k;
    m.d = static_cast<int>(X.cols());
    m.covariances.assign(static_cast<std::size_t>(k), Eigen::MatrixXd());
    const auto n = static_cast<double>(X.rows());

    Eigen::MatrixXd resp = kmeanspp_responsibilities(X, k, rng);
    std::vector<CovFactor> factors(static_cast<std::size_t>(k));
    r.trace.min_cov_eigenvalue = m_step(X, resp, cfg.reg_covar, m, factors);

    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 1; it <= cfg.max_iter; ++it) {
        const Eigen::MatrixXd wlp = weighted_log_prob(m, factors, X);
        const Eigen::VectorXd lse = row_logsumexp(wlp);
        const double ll = lse.sum();
        resp = (wlp.colwise() - lse).array().exp();
        resp.array().colwise() /= resp.rowwise().sum().array();
        r.trace.max_row_sum_error =
            std::max(r.trace.max_row_sum_error, (resp.rowwise().sum().array() - 1.0).abs().maxCoeff());
        r.trace.log_likelihood.push_back(ll);
        m.final_log_likelihood = ll;
        m.n_iter = it;
        if (it > 1 && (ll - prev) / n < cfg.tol) {
            m.converged = true;
            break;
        }
        prev = ll;
        if (it == cfg.max_iter) break;
        r.trace.min_cov_eigenvalue = std::min(r.trace.min_cov_eigenvalue, m_step(X, resp, cfg.reg_covar, m, factors));
    }
    return r;
}

}  // namespace

GmmModel fit_gmm(const Eigen::Ref<const Eigen::MatrixXd>& X, int k, std::uint64_t seed, const GmmConfig& config) {
    if (k < 1) throw InvalidInput("fit_gmm: k must be >= 1");
    if (X.rows() < k) throw InvalidInput("fit_gmm: fewer rows than components");
    if (X.cols() < 1) throw InvalidInput("fit_gmm: no feature columns");
    check_finite(X, "fit_gmm");
    std::optional<GmmModel> best;
    const int restarts = std::max(1, config.n_init);
    for (int r = 0; r < restarts; ++r) {
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)});
        RestartResult res = run_em(X, k, rng, config);
        res.trace.k = k;
        res.trace.restart = r;
        if (config.observer) config.observer(res.trace);
        if (!best || res.model.final_log_likelihood > best->final_log_likelihood) best = std::move(res.model);
    }
    return *best;
}

Eigen::VectorXd log_density(const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    check_model(model, X);
    return row_logsumexp(weighted_log_prob(model, X));
}

double log_likelihood(const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    return log_density(model, X).sum();
}

Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    check_model(model, X);
    const Eigen::MatrixXd wlp = weighted_log_prob(model, X);
    Eigen::MatrixXd resp = (wlp.colwise() - row_logsumexp(wlp)).array().exp();
    resp.array().colwise() /= resp.rowwise().sum().array();
    return resp;
}

long gmm_parameter_count(int k, int d) {
    const long kk = k, dd = d;
    return (kk - 1) + kk * dd + kk * dd * (dd + 1) / 2;
}

double bic(const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    check_model(model, X);
    const double ll = log_likelihood(model, X);
    return -2.0 * ll + static_cast<double>(gmm_parameter_count(model.k, model.d)) * std::log(static_cast<double>(X.rows()));
}

std::vector<int> assign_clusters(const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    check_model(model, X);
    const Eigen::MatrixXd wlp = weighted_log_prob(model, X);
    std::vector<int> labels(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < model.k; ++j)
            if (wlp(i, j) > wlp(i, best)) best = j;
        labels[static_cast<std::size_t>(i)] = best;
    }
    return labels;
}

namespace {

// Maps arbitrary labels to 0..c-1 in order of first appearance of the sorted label values.
std::vector<int> compact_labels(std::span<const int> labels, int& n_clusters) {
    std::map<int, int> index;
    for (int l : labels) index.emplace(l, 0);
    int next = 0;
    for (auto& [label, idx] : index) idx = next++;
    n_clusters = next;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = index[labels[i]];
    return out;
}

}  // namespace

double silhouette_score(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> labels) {
    if (static_cast<std::size_t>(X.rows()) != labels.size()) throw InvalidInput("silhouette: label count mismatch");
    int c = 0;
    const auto lab = compact_labels(labels, c);
    if (c < 2) throw InvalidInput("silhouette: needs at least two clusters");
    std::vector<int> sizes(static_cast<std::size_t>(c), 0);
    for (int l : lab) ++sizes[static_cast<std::size_t>(l)];
    if (std::all_of(sizes.begin(), sizes.end(), [](int s) { return s == 1; }))
        throw InvalidInput("silhouette: every cluster is a singleton");

    const Eigen::Index n = X.rows();
    double total = 0.0;
    std::vector<double> sum_to(static_cast<std::size_t>(c));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::fill(sum_to.begin(), sum_to.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) sum_to[static_cast<std::size_t>(lab[static_cast<std::size_t>(j)])] += (X.row(i) - X.row(j)).norm();
        const int own = lab[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(own)] == 1) continue;  // s(i) = 0
        const double a = sum_to[static_cast<std::size_t>(own)] / (sizes[static_cast<std::size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int l = 0; l < c; ++l)
            if (l != own) b = std::min(b, sum_to[static_cast<std::size_t>(l)] / sizes[static_cast<std::size_t>(l)]);
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

double davies_bouldin(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> labels) {
    if (static_cast<std::size_t>(X.rows()) != labels.size()) throw InvalidInput("davies_bouldin: label count mismatch");
    int c = 0;
    const auto lab = compact_labels(labels, c);
    if (c < 2) throw InvalidInput("davies_bouldin: needs at least two clusters");
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(c, X.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(c);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        centroids.row(lab[static_cast<std::size_t>(i)]) += X.row(i);
        counts(lab[static_cast<std::size_t>(i)]) += 1.0;
    }
    centroids.array().colwise() /= counts.array();
    Eigen::VectorXd scatter = Eigen::VectorXd::Zero(c);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        scatter(lab[static_cast<std::size_t>(i)]) += (X.row(i) - centroids.row(lab[static_cast<std::size_t>(i)])).norm();
    scatter.array() /= counts.array();

    double total = 0.0;
    for (int i = 0; i < c; ++i) {
        double worst = 0.0;
        for (int j = 0; j < c; ++j) {
            if (i == j) continue;
            const double sep = (centroids.row(i) - centroids.row(j)).norm();
            if (sep == 0.0) throw InvalidInput("davies_bouldin: coincident cluster centroids");
            worst = std::max(worst, (scatter(i) + scatter(j)) / sep);
        }
        total += worst;
    }
    return total / c;
}

std::string to_string(SelectionRule rule) { return rule == SelectionRule::knee ? "knee" : "min_bic_fallback"; }

KneeResult knee_point(std::span<const double> curve) {
    if (curve.size() < 3) throw InvalidInput("knee_point: curve needs >= 3 points");
    for (double v : curve)
        if (!std::isfinite(v)) throw InvalidInput("knee_point: non-finite curve value");
    const auto argmin = static_cast<std::size_t>(std::min_element(curve.begin(), curve.end()) - curve.begin());
    const KneeResult fallback{argmin, SelectionRule::min_bic_fallback};
    const std::size_t len = argmin + 1;
    if (len < 3) return fallback;

    const auto seg = curve.first(len);
    const double lo = *std::min_element(seg.begin(), seg.end());
    const double hi = *std::max_element(seg.begin(), seg.end());
    if (!(hi - lo > 0.0)) return fallback;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < len; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(len - 1);
        const double y = (seg[i] - lo) / (hi - lo);
        const double diff = (1.0 - x) - y;
        if (diff > best) {
            best = diff;
            best_i = i;
        }
    }
    if (best < kKneeMinDifference) return fallback;
    return {best_i, SelectionRule::knee};
}

std::vector<int> default_k_range() { return {1, 2, 3, 4, 5, 6, 7, 8}; }

ModelSelection select_model(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<int>& k_range,
                            std::uint64_t seed, const GmmConfig& config) {
    if (k_range.empty()) throw InvalidInput("select_model: empty k_range");
    if (!std::is_sorted(k_range.begin(), k_range.end()) ||
        std::adjacent_find(k_range.begin(), k_range.end()) != k_range.end() || k_range.front() < 1)
        throw InvalidInput("select_model: k_range must be strictly increasing and >= 1");
    if (X.rows() < k_range.back()) throw InvalidInput("select_model: fewer rows than max(k_range)");

    ModelSelection out;
    out.report.k_range = k_range;
    std::vector<GmmModel> models;
    for (int k : k_range) {
        GmmModel m = fit_gmm(X, k, seed, config);
        out.report.bic_curve.push_back(bic(m, X));
        std::optional<double> sil, db;
        if (k >= 2) {
            const auto labels = assign_clusters(m, X);
            try {
                sil = silhouette_score(X, labels);
                db = davies_bouldin(X, labels);
            } catch (const InvalidInput&) {
                // collapsed to a single hard cluster; diagnostics undefined
            }
        }
        out.report.silhouette.push_back(sil);
        out.report.dbi.push_back(db);
        models.push_back(std::move(m));
    }
    std::size_t chosen = 0;
    if (k_range.size() >= 3) {
        const KneeResult knee = knee_point(out.report.bic_curve);
        chosen = knee.index;
        out.report.selection_rule = knee.rule;
    } else {
        chosen = static_cast<std::size_t>(
            std::min_element(out.report.bic_curve.begin(), out.report.bic_curve.end()) - out.report.bic_curve.begin());
        out.report.selection_rule = SelectionRule::min_bic_fallback;
    }
    out.report.chosen_k = k_range[chosen];
    out.model = std::move(models[chosen]);
    return out;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const GmmModel& m) {
    nlohmann::json means = nlohmann::json::array();
    nlohmann::json covs = nlohmann::json::array();
    for (int c = 0; c < m.k; ++c) {
        means.push_back(std::vector<double>(m.means.row(c).begin(), m.means.row(c).end()));
        nlohmann::json cov = nlohmann::json::array();
        const auto& S = m.covariances[static_cast<std::size_t>(c)];
        for (Eigen::Index r = 0; r < S.rows(); ++r) cov.push_back(std::vector<double>(S.row(r).begin(), S.row(r).end()));
        covs.push_back(std::move(cov));
    }
    j = nlohmann::json{{"k", m.k},
                       {"d", m.d},
                       {"weights", std::vector<double>(m.weights.begin(), m.weights.end())},
                       {"means", std::move(means)},
                       {"covariances", std::move(covs)},
                       {"converged", m.converged},
                       {"final_log_likelihood", m.final_log_likelihood},
                       {"n_iter", m.n_iter}};
}

void from_json(const nlohmann::json& j, GmmModel& m) {
    m.k = j.at("k").get<int>();
    m.d = j.at("d").get<int>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != m.k) throw InvalidInput("GMM json: weights length != k");
    m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), m.k);
    m.means.resize(m.k, m.d);
    m.covariances.assign(static_cast<std::size_t>(m.k), Eigen::MatrixXd(m.d, m.d));
    for (int c = 0; c < m.k; ++c) {
        const auto mu = j.at("means").at(static_cast<std::size_t>(c)).get<std::vector<double>>();
        if (static_cast<int>(mu.size()) != m.d) throw InvalidInput("GMM json: mean length != d");
        m.means.row(c) = Eigen::Map<const Eigen::RowVectorXd>(mu.data(), m.d);
        for (int r = 0; r < m.d; ++r) {
            const auto row = j.at("covariances").at(static_cast<std::size_t>(c)).at(static_cast<std::size_t>(r)).get<std::vector<double>>();
            if (static_cast<int>(row.size()) != m.d) throw InvalidInput("GMM json: covariance shape");
            m.covariances[static_cast<std::size_t>(c)].row(r) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), m.d);
        }
    }
    m.converged = j.at("converged").get<bool>();
    m.final_log_likelihood = j.at("final_log_likelihood").get<double>();
    m.n_iter = j.at("n_iter").get<int>();
}

void to_json(nlohmann::json& j, const ModelSelectionReport& r) {
    auto opt = [](const std::vector<std::optional<double>>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& x : v) a.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
        return a;
    };
    j = nlohmann::json{{"k_range", r.k_range},       {"bic_curve", r.bic_curve},
                       {"silhouette", opt(r.silhouette)}, {"dbi", opt(r.dbi)},
                       {"chosen_k", r.chosen_k},     {"selection_rule", to_string(r.selection_rule)}};
}

void from_json(const nlohmann::json& j, ModelSelectionReport& r) {
    auto opt = [](const nlohmann::json& a) {
        std::vector<std::optional<double>> v;
        for (const auto& x : a) v.push_back(x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()));
        return v;
    };
    r.k_range = j.at("k_range").get<std::vector<int>>();
    r.bic_curve = j.at("bic_curve").get<std::vector<double>>();
    r.silhouette = opt(j.at("silhouette"));
    r.dbi = opt(j.at("dbi"));
    r.chosen_k = j.at("chosen_k").get<int>();
    r.selection_rule =
        j.at("selection_rule").get<std::string>() == "knee" ? SelectionRule::knee : SelectionRule::min_bic_fallback;
}

}  // namespace collabsim
