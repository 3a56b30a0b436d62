#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "satmle/dataset.hpp"
#include "satmle/math.hpp"
#include "satmle/rng.hpp"

namespace satmle::dgp {

struct DgpConfig {
    double alpha1 = 0.8;     // confounding strength
    double gamma0 = 0.5;     // censoring severity
    int n_clusters = 50;     // J
    int cluster_size = 20;   // m
    double sigma_b_sq = 0.034;
    std::uint64_t seed = 2024;

    bool valid() const {
        return n_clusters >= 2 && cluster_size >= 1 && sigma_b_sq >= 0.0;
    }
};

/// Structural coefficients of the generating equations.  Defaults match the
/// simulated cohort; tests zero out treatment pathways to exercise the
/// counterfactual oracle.
struct DgpCoefs {
    // S | A, W, b ~ N(mean, s_sd^2)
    double s_a = 0.8, s_w1 = 0.4, s_w2 = -0.3, s_w3 = 0.2, s_b = 0.6, s_sd = 0.5;
    // Delta | S, A, W ~ Bern(expit(gamma0 + ...))
    double d_s = 0.4, d_a = 0.3, d_w3 = -0.2;
    // Y | S, A, W, b ~ N(mean, y_sd^2)
    double y_0 = 0.5, y_a = -0.28, y_s = 0.5, y_w1 = 0.4, y_w2 = -0.2,
           y_w3 = 0.3, y_aw1 = 0.15, y_sd = 0.8;
};

enum class Draw : std::uint64_t {
    ClusterEffect = 1,
    W1 = 2,
    W2 = 3,
    W3 = 4,
    A = 5,
    SNoise = 6,
    Delta = 7,
    YNoise = 8,
};

inline std::uint64_t draw_key(std::uint64_t seed, int cluster, int unit, Draw tag) {
    return rng::key(seed, static_cast<std::uint64_t>(cluster),
                    static_cast<std::uint64_t>(unit),
                    static_cast<std::uint64_t>(tag));
}

inline double unit_uniform(std::uint64_t seed, int cluster, int unit, Draw tag) {
    return rng::uniform(draw_key(seed, cluster, unit, tag));
}

inline double unit_normal(std::uint64_t seed, int cluster, int unit, Draw tag) {
    return rng::normal(draw_key(seed, cluster, unit, tag));
}

/// Treatment propensity of the generating process.
inline double true_g_a(int a, double w1, double alpha1) {
    const double p1 = expit(alpha1 * w1 + 0.3 * w1 * w1);
    return a == 1 ? p1 : 1.0 - p1;
}

/// Analytic average treatment effect of the default coefficients.
inline double true_ate() { return 0.12; }

struct GeneratedData {
    Dataset data;
    std::vector<double> latent_y; // outcome draw for every unit, observed or not
};

inline GeneratedData generate_with_latent(const DgpConfig& cfg,
                                          const DgpCoefs& coefs = {}) {
    GeneratedData out;
    out.data.records.reserve(static_cast<std::size_t>(cfg.n_clusters) * cfg.cluster_size);
    out.latent_y.reserve(out.data.records.capacity());
    const double sigma_b = std::sqrt(cfg.sigma_b_sq);
    for (int j = 0; j < cfg.n_clusters; ++j) {
        const double b = sigma_b * unit_normal(cfg.seed, j, 0, Draw::ClusterEffect);
        for (int i = 0; i < cfg.cluster_size; ++i) {
            ObservationRecord r;
            r.cluster_id = j;
            r.w1 = unit_normal(cfg.seed, j, i, Draw::W1);
            r.w2 = unit_uniform(cfg.seed, j, i, Draw::W2) < 0.4 ? 1 : 0;
            r.w3 = unit_uniform(cfg.seed, j, i, Draw::W3);
            r.a = unit_uniform(cfg.seed, j, i, Draw::A) <
                          expit(cfg.alpha1 * r.w1 + 0.3 * r.w1 * r.w1)
                      ? 1
                      : 0;
            const double zs = unit_normal(cfg.seed, j, i, Draw::SNoise);
            r.s = coefs.s_a * r.a + coefs.s_w1 * r.w1 + coefs.s_w2 * r.w2 +
                  coefs.s_w3 * r.w3 + coefs.s_b * b + coefs.s_sd * zs;
            r.delta = unit_uniform(cfg.seed, j, i, Draw::Delta) <
                              expit(cfg.gamma0 + coefs.d_s * r.s + coefs.d_a * r.a +
                                    coefs.d_w3 * r.w3)
                          ? 1
                          : 0;
            const double zy = unit_normal(cfg.seed, j, i, Draw::YNoise);
            const double y = coefs.y_0 + coefs.y_a * r.a + coefs.y_s * r.s +
                             coefs.y_w1 * r.w1 + coefs.y_w2 * r.w2 +
                             coefs.y_w3 * r.w3 + coefs.y_aw1 * r.a * r.w1 + b +
                             coefs.y_sd * zy;
            r.y = r.delta == 1 ? y : 0.0;
            out.latent_y.push_back(y);
            out.data.records.push_back(r);
        }
    }
    out.data.rebuild_index();
    return out;
}

inline Dataset generate_dataset(const DgpConfig& cfg, const DgpCoefs& coefs = {}) {
    return generate_with_latent(cfg, coefs).data;
}

/// Brute-force counterfactual oracle: both arms forced with shared unit-level
/// noise; returns the sample mean of Y(1) - Y(0).
inline double mc_counterfactual_ate(const DgpConfig& cfg, const DgpCoefs& coefs = {}) {
    const double sigma_b = std::sqrt(cfg.sigma_b_sq);
    double sum = 0.0;
    std::size_t n = 0;
    for (int j = 0; j < cfg.n_clusters; ++j) {
        const double b = sigma_b * unit_normal(cfg.seed, j, 0, Draw::ClusterEffect);
        for (int i = 0; i < cfg.cluster_size; ++i) {
            const double w1 = unit_normal(cfg.seed, j, i, Draw::W1);
            const double w2 = unit_uniform(cfg.seed, j, i, Draw::W2) < 0.4 ? 1.0 : 0.0;
            const double w3 = unit_uniform(cfg.seed, j, i, Draw::W3);
            const double zs = unit_normal(cfg.seed, j, i, Draw::SNoise);
            const double zy = unit_normal(cfg.seed, j, i, Draw::YNoise);
            double y_arm[2];
            for (int a = 0; a <= 1; ++a) {
                const double s = coefs.s_a * a + coefs.s_w1 * w1 + coefs.s_w2 * w2 +
                                 coefs.s_w3 * w3 + coefs.s_b * b + coefs.s_sd * zs;
                y_arm[a] = coefs.y_0 + coefs.y_a * a + coefs.y_s * s +
                           coefs.y_w1 * w1 + coefs.y_w2 * w2 + coefs.y_w3 * w3 +
                           coefs.y_aw1 * a * w1 + b + coefs.y_sd * zy;
            }
            sum += y_arm[1] - y_arm[0];
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

inline double censoring_rate(const Dataset& data) {
    double censored = 0.0;
    for (const auto& r : data.records) censored += (r.delta == 0) ? 1.0 : 0.0;
    return censored / static_cast<double>(data.size());
}

// CSV export: header cluster_id,w1,w2,w3,a,s,delta,y ; y blank when delta = 0.
inline void write_dataset_csv(const Dataset& data, std::ostream& os) {
    os << "cluster_id,w1,w2,w3,a,s,delta,y\n";
    os.precision(17);
    for (const auto& r : data.records) {
        os << r.cluster_id << ',' << r.w1 << ',' << r.w2 << ',' << r.w3 << ','
           << r.a << ',' << r.s << ',' << r.delta << ',';
        if (r.delta == 1) os << r.y;
        os << '\n';
    }
}

inline void write_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream os(path, std::ios::binary); // binary: keep LF line endings
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_dataset_csv(data, os);
}

inline Dataset read_dataset_csv(std::istream& is) {
    Dataset data;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty dataset CSV");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::stringstream ss(line);
        std::string field;
        ObservationRecord r;
        auto next = [&]() {
            if (!std::getline(ss, field, ',')) field.clear();
            return field;
        };
        r.cluster_id = std::stoi(next());
        r.w1 = std::stod(next());
        r.w2 = std::stoi(next());
        r.w3 = std::stod(next());
        r.a = std::stoi(next());
        r.s = std::stod(next());
        r.delta = std::stoi(next());
        next();
        r.y = (r.delta == 1 && !field.empty()) ? std::stod(field) : 0.0;
        data.records.push_back(r);
    }
    data.rebuild_index();
    return data;
}

inline Dataset read_dataset_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open dataset CSV: " + path);
    return read_dataset_csv(is);
}

} // namespace satmle::dgp
