// Independent reference implementations used by the tests. Deliberately
// naive: nothing here shares code with the library.
#ifndef COLLABSIM_TESTS_ORACLES_HPP
#define COLLABSIM_TESTS_ORACLES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cctype>
#include <complex>
#include <stdexcept>
#include <string>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "collabsim/logmodel.hpp"

namespace oracle {

inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> s = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double a = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
            s += x[t] * std::complex<double>(std::cos(a), std::sin(a));
        }
        out[k] = s;
    }
    return out;
}

// Hungarian algorithm (shortest augmenting path, O(n^3)) on a square cost matrix.
inline double min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
    return total;
}

// Optimal transport between two uniform empirical measures: every a_i is
// split into m units and every b_j into n units, which turns the transport
// LP into an assignment problem of size n*m.
inline double brute_force_w1(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<double> left, right;
    for (double x : a)
        for (std::size_t r = 0; r < m; ++r) left.push_back(x);
    for (double y : b)
        for (std::size_t r = 0; r < n; ++r) right.push_back(y);
    std::vector<std::vector<double>> cost(left.size(), std::vector<double>(right.size()));
    for (std::size_t i = 0; i < left.size(); ++i)
        for (std::size_t j = 0; j < right.size(); ++j) cost[i][j] = std::abs(left[i] - right[j]);
    return min_cost_assignment(cost) / static_cast<double>(n * m);
}

// Grid cells of width `step` whose midpoint lies inside any interval.
inline std::vector<bool> coverage(const std::vector<std::pair<double, double>>& intervals, double horizon,
                                  double step = 0.01) {
    const auto cells = static_cast<std::size_t>(std::ceil(horizon / step));
    std::vector<bool> out(cells, false);
    for (std::size_t c = 0; c < cells; ++c) {
        const double t = (static_cast<double>(c) + 0.5) * step;
        for (const auto& [s, e] : intervals)
            if (t >= s && t <= e) out[c] = true;
    }
    return out;
}

inline std::vector<std::pair<double, double>> spans(const std::vector<collabsim::SpeakingEvent>& events) {
    std::vector<std::pair<double, double>> out;
    for (const auto& e : events) out.emplace_back(e.start, e.start + e.duration);
    return out;
}

inline double gaussian_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    const auto d = static_cast<double>(x.size());
    const Eigen::VectorXd r = x - mean;
    const double q = r.dot(cov.inverse() * r);
    return std::exp(-0.5 * q) / std::sqrt(std::pow(2.0 * std::numbers::pi, d) * cov.determinant());
}

struct Kinematics {
    double total_distance = 0, total_time = 0, speed_mean = 0, speed_max = 0;
    double accel_mean = 0, accel_max = 0, jerk_mean = 0, idle_fraction = 0, tortuosity = 1;
};

// Finite differences of position at sample times, velocity at interval
// midpoints, acceleration at midpoints of those.
inline Kinematics kinematics(const std::vector<collabsim::LocationSample>& s, double idle_speed) {
    Kinematics k;
    const std::size_t n = s.size();
    if (n < 2) return k;
    std::vector<std::array<double, 3>> vel;
    std::vector<double> vt;
    double speed_sum = 0, idle = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double dt = s[i + 1].t - s[i].t;
        const double dx = s[i + 1].x - s[i].x, dy = s[i + 1].y - s[i].y, dz = s[i + 1].z - s[i].z;
        const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
        k.total_distance += dist;
        const double sp = dist / dt;
        speed_sum += sp;
        k.speed_max = std::max(k.speed_max, sp);
        if (sp < idle_speed) idle += dt;
        vel.push_back({dx / dt, dy / dt, dz / dt});
        vt.push_back((s[i].t + s[i + 1].t) / 2);
    }
    k.total_time = s.back().t - s.front().t;
    k.speed_mean = speed_sum / static_cast<double>(n - 1);
    k.idle_fraction = idle / k.total_time;
    const double ex = s.back().x - s.front().x, ey = s.back().y - s.front().y, ez = s.back().z - s.front().z;
    const double net = std::sqrt(ex * ex + ey * ey + ez * ez);
    k.tortuosity = std::min(std::max(k.total_distance / std::max(net, 1e-6), 1.0), 1e6);

    std::vector<std::array<double, 3>> acc;
    std::vector<double> at;
    double acc_sum = 0;
    for (std::size_t i = 0; i + 1 < vel.size(); ++i) {
        const double dt = vt[i + 1] - vt[i];
        std::array<double, 3> a{};
        double norm2 = 0;
        for (int c = 0; c < 3; ++c) {
            a[c] = (vel[i + 1][c] - vel[i][c]) / dt;
            norm2 += a[c] * a[c];
        }
        acc.push_back(a);
        at.push_back((vt[i] + vt[i + 1]) / 2);
        acc_sum += std::sqrt(norm2);
        k.accel_max = std::max(k.accel_max, std::sqrt(norm2));
    }
    if (!acc.empty()) k.accel_mean = acc_sum / static_cast<double>(acc.size());
    double jerk_sum = 0;
    for (std::size_t i = 0; i + 1 < acc.size(); ++i) {
        double norm2 = 0;
        for (int c = 0; c < 3; ++c) norm2 += std::pow(acc[i + 1][c] - acc[i][c], 2);
        jerk_sum += std::sqrt(norm2) / (at[i + 1] - at[i]);
    }
    if (acc.size() >= 2) k.jerk_mean = jerk_sum / static_cast<double>(acc.size() - 1);
    return k;
}

// Hand-worked 6-point fixtures for silhouette and Davies-Bouldin.
struct ClusterFixture {
    Eigen::MatrixXd X;
    std::vector<int> labels;
    double silhouette;
    double dbi;
};

inline std::vector<ClusterFixture> cluster_fixtures() {
    std::vector<ClusterFixture> out;
    {
        // 1-D: {0,1,2} and {10,11,12}
        // a: 1.5, 1, 1.5 ; b: 11, 10, 9 (mirror for the other cluster)
        // s = 9.5/11, 9/10, 7.5/9 twice
        // centroid scatter 2/3 each, centroid distance 10 -> R = (4/3)/10
        ClusterFixture f;
        f.X.resize(6, 1);
        f.X << 0, 1, 2, 10, 11, 12;
        f.labels = {0, 0, 0, 1, 1, 1};
        f.silhouette = (9.5 / 11 + 0.9 + 7.5 / 9) / 3;
        f.dbi = 2.0 / 15.0;
        out.push_back(f);
    }
    {
        // 2-D, unequal sizes: A = (0,0),(2,0) ; B = (0,4),(2,4),(1,6),(1,5)
        // A point (0,0): a = 2, b = mean(4, sqrt(20), sqrt(37), sqrt(26))
        // A point (2,0): a = 2, b = mean(sqrt(20), 4, sqrt(37), sqrt(26))
        // B (0,4): a = mean(2, sqrt(5), sqrt(2)), b = mean(4, sqrt(20))
        // B (2,4): same distances as (0,4) by symmetry
        // B (1,6): a = mean(sqrt(5), sqrt(5), 1), b = mean(sqrt(37), sqrt(37))
        // B (1,5): a = mean(sqrt(2), sqrt(2), 1), b = mean(sqrt(26), sqrt(26))
        ClusterFixture f;
        f.X.resize(6, 2);
        f.X << 0, 0, 2, 0, 0, 4, 2, 4, 1, 6, 1, 5;
        f.labels = {0, 0, 1, 1, 1, 1};
        const double r2 = std::sqrt(2.0), r5 = std::sqrt(5.0), r20 = std::sqrt(20.0), r26 = std::sqrt(26.0),
                     r37 = std::sqrt(37.0);
        auto s = [](double a, double b) { return (b - a) / std::max(a, b); };
        const double bA = (4 + r20 + r37 + r26) / 4;
        const double sA = s(2, bA);
        const double sB1 = s((2 + r5 + r2) / 3, (4 + r20) / 2);
        const double sB3 = s((2 * r5 + 1) / 3, r37);
        const double sB4 = s((2 * r2 + 1) / 3, r26);
        f.silhouette = (2 * sA + 2 * sB1 + sB3 + sB4) / 6;
        // centroids: A (1,0), B (1,4.75)
        // scatter A = 1 ; scatter B = (3 * 1.25 + 0.25) / 4 = 1
        // DBI = (1 + 1) / 4.75 for both clusters
        f.dbi = 2.0 / 4.75;
        out.push_back(f);
    }
    return out;
}

// Recursive-descent check of the DOT subset: (graph|digraph) [ID] { stmt* }
// with stmt := ID = ID | node_id [attr_list] | node_id edgeop node_id [attr_list],
// each optionally terminated by ';'.
class DotChecker {
public:
    explicit DotChecker(const std::string& text) : s_(text) {}

    bool valid() {
        try {
            skip();
            const auto head = id();
            if (head != "graph" && head != "digraph") return false;
            directed_ = head == "digraph";
            skip();
            if (peek() != '{') id();
            expect('{');
            while (true) {
                skip();
                if (peek() == '}') break;
                statement();
            }
            expect('}');
            skip();
            return pos_ == s_.size();
        } catch (const std::exception&) {
            return false;
        }
    }

private:
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    void expect(char c) {
        skip();
        if (peek() != c) throw std::runtime_error("expected token");
        ++pos_;
    }
    std::string id() {
        skip();
        if (peek() == '"') {
            std::string out;
            ++pos_;
            while (pos_ < s_.size() && s_[pos_] != '"') {
                if (s_[pos_] == '\\') ++pos_;
                out += s_[pos_++];
            }
            expect('"');
            return out;
        }
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                    s_[pos_] == '.' || s_[pos_] == '-' || s_[pos_] == '+'))
            ++pos_;
        if (start == pos_) throw std::runtime_error("expected id");
        const auto tok = s_.substr(start, pos_ - start);
        // numerals may carry a sign and exponent; plain ids must not start with a digit-less '-'
        if (!std::isalpha(static_cast<unsigned char>(tok[0])) && tok[0] != '_') {
            std::size_t used = 0;
            std::stod(tok, &used);
            if (used != tok.size()) throw std::runtime_error("bad numeral");
        }
        return tok;
    }
    void attr_list() {
        expect('[');
        while (true) {
            skip();
            if (peek() == ']') break;
            id();
            expect('=');
            id();
            skip();
            if (peek() == ',' || peek() == ';') ++pos_;
        }
        expect(']');
    }
    void statement() {
        id();
        skip();
        if (peek() == '=') {
            ++pos_;
            id();
        } else {
            if (s_.compare(pos_, 2, "->") == 0 || s_.compare(pos_, 2, "--") == 0) {
                if ((s_[pos_ + 1] == '>') != directed_) throw std::runtime_error("wrong edge operator");
                pos_ += 2;
                id();
                skip();
            }
            if (peek() == '[') attr_list();
        }
        skip();
        if (peek() == ';') ++pos_;
    }

    std::string s_;
    std::size_t pos_ = 0;
    bool directed_ = false;
};

inline bool valid_dot(const std::string& text) { return DotChecker(text).valid(); }

}  // namespace oracle

#endif  // COLLABSIM_TESTS_ORACLES_HPP
