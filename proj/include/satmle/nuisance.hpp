#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "satmle/dataset.hpp"
#include "satmle/errors.hpp"
#include "satmle/glm.hpp"
#include "satmle/math.hpp"
#include "satmle/rng.hpp"

namespace satmle {

/// Nuisance specification: correctly specified (C), treatment propensity
/// missing the quadratic term (MgA), outcome and intermediate regressions
/// missing the treatment-by-W1 interaction (MQ).
enum class SpecVariant { C, MgA, MQ };

inline std::string to_string(SpecVariant v) {
    switch (v) {
        case SpecVariant::C: return "C";
        case SpecVariant::MgA: return "M_gA";
        case SpecVariant::MQ: return "M_Q";
    }
    return "?";
}

inline DesignSpec ga_design(SpecVariant v) {
    if (v == SpecVariant::MgA) return {{Term::Intercept, Term::W1}};
    return {{Term::Intercept, Term::W1, Term::W1Sq}};
}

inline DesignSpec gdelta_design(SpecVariant) {
    // always correctly specified
    return {{Term::Intercept, Term::S, Term::A, Term::W3}};
}

inline DesignSpec qy_design(SpecVariant v) {
    if (v == SpecVariant::MQ)
        return {{Term::Intercept, Term::A, Term::S, Term::W1, Term::W2, Term::W3}};
    return {{Term::Intercept, Term::A, Term::W1, Term::AxW1, Term::S, Term::W2,
             Term::W3}};
}

/// Design of the intermediate regression.  Contains no S term and no
/// propensity input: the initial fit consumes only (A, W).
inline DesignSpec qint_design(SpecVariant v) {
    if (v == SpecVariant::MQ)
        return {{Term::Intercept, Term::A, Term::W1, Term::W2, Term::W3}};
    return {{Term::Intercept, Term::A, Term::W1, Term::AxW1, Term::W2, Term::W3}};
}

inline constexpr double kPropensityFloor = 0.025;

inline double truncate_propensity(double p) {
    return std::clamp(p, kPropensityFloor, 1.0 - kPropensityFloor);
}

struct FoldAssignment {
    std::map<int, int> fold_of_cluster; // cluster id -> fold in [0, V)
    int n_folds = 0;

    /// Same assignment minus one cluster, with fold indices compacted so that
    /// every remaining fold is non-empty.  Used by the leave-one-cluster-out
    /// jackknife so that LOO refits differ from the full fit only by the
    /// deleted cluster, not by a fresh fold randomization.
    FoldAssignment without_cluster(int cluster_id) const {
        FoldAssignment out;
        out.fold_of_cluster = fold_of_cluster;
        out.fold_of_cluster.erase(cluster_id);
        std::vector<int> count(n_folds, 0);
        for (const auto& [cid, v] : out.fold_of_cluster) ++count[v];
        std::vector<int> remap(n_folds, -1);
        int next = 0;
        for (int v = 0; v < n_folds; ++v)
            if (count[v] > 0) remap[v] = next++;
        for (auto& [cid, v] : out.fold_of_cluster) v = remap[v];
        out.n_folds = next;
        return out;
    }
};

/// Clusters are randomly permuted then dealt round-robin into V folds.
inline FoldAssignment assign_folds(const Dataset& data, int V, std::uint64_t seed) {
    const auto J = static_cast<int>(data.n_clusters());
    if (V < 2 || V > J) {
        throw TooFewClustersError("assign_folds: need 2 <= V <= J, got V=" +
                                  std::to_string(V) + ", J=" + std::to_string(J));
    }
    std::vector<int> ids = data.cluster_ids();
    // keyed Fisher-Yates, independent of library shuffle internals
    for (int i = J - 1; i > 0; --i) {
        const double u = rng::uniform(
            rng::key(seed, 0x5AFF1EULL, static_cast<std::uint64_t>(i)));
        const int k = std::min(i, static_cast<int>(u * (i + 1)));
        std::swap(ids[i], ids[k]);
    }
    FoldAssignment out;
    out.n_folds = V;
    for (int i = 0; i < J; ++i) out.fold_of_cluster[ids[i]] = i % V;
    return out;
}

struct ScaleParams {
    double y_min = 0.0;
    double y_max = 1.0;
    static constexpr double headroom = 0.2;
    static constexpr double delta_clamp = 0.005;

    double to_unit(double y) const {
        return clamp_unit((y - y_min) / (y_max - y_min), delta_clamp);
    }
    double from_unit(double u) const { return y_min + u * (y_max - y_min); }
};

/// Min-max scale with the headroom split symmetrically (10% per side).
inline ScaleParams fit_scale(std::span<const double> values) {
    if (values.empty()) throw DegenerateRangeError("fit_scale: no values");
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= lo) throw DegenerateRangeError("fit_scale: all values equal");
    const double range = hi - lo;
    return {lo - 0.5 * ScaleParams::headroom * range,
            hi + 0.5 * ScaleParams::headroom * range};
}

using PropensityFn = std::function<double(int arm, const ObservationRecord&)>;

struct NuisancePredictions {
    // indexed [arm][observation]
    std::array<std::vector<double>, 2> g_a;     // truncated
    std::array<std::vector<double>, 2> g_delta; // truncated
    std::array<std::vector<double>, 2> q_y;     // natural scale
    std::vector<int> fold_of;                   // producing fold per observation
    std::vector<ScaleParams> y_scale;           // per fold, fit on training rows
    DesignSpec ga_terms, gdelta_terms, qy_terms, qint_terms;

    double q_y_scaled(std::size_t i, int arm) const {
        return y_scale[fold_of[i]].to_unit(q_y[arm][i]);
    }
};

namespace detail {

inline void split_train_valid(const Dataset& data, const FoldAssignment& folds, int v,
                              std::vector<std::size_t>& train,
                              std::vector<std::size_t>& valid) {
    train.clear();
    valid.clear();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int f = folds.fold_of_cluster.at(data.records[i].cluster_id);
        (f == v ? valid : train).push_back(i);
    }
}

inline bool training_classes_ok(const Dataset& data,
                                std::span<const std::size_t> train) {
    int a1 = 0, a0 = 0, d1 = 0, d0 = 0;
    for (std::size_t i : train) {
        const auto& r = data.records[i];
        (r.a == 1 ? a1 : a0)++;
        (r.delta == 1 ? d1 : d0)++;
    }
    return a1 > 0 && a0 > 0 && d1 > 0 && d0 > 0;
}

} // namespace detail

/// Fold assignment with the minimum-class guard: if some training complement
/// lacks a treatment arm or a Delta class, re-deal with an incremented seed,
/// at most 10 attempts.
inline FoldAssignment assign_folds_checked(const Dataset& data, int V,
                                           std::uint64_t seed) {
    std::vector<std::size_t> train, valid;
    for (int attempt = 0; attempt < 10; ++attempt) {
        FoldAssignment folds = assign_folds(data, V, seed + attempt);
        bool ok = true;
        for (int v = 0; v < V && ok; ++v) {
            detail::split_train_valid(data, folds, v, train, valid);
            ok = detail::training_classes_ok(data, train);
        }
        if (ok) return folds;
    }
    throw EmptyCellError("assign_folds_checked: no valid deal in 10 attempts");
}

/// Cross-fitted nuisance estimation: for each fold, fit on the complement and
/// predict on the held-out clusters, under both counterfactual arms.
inline NuisancePredictions fit_nuisances(const Dataset& data,
                                         const FoldAssignment& folds,
                                         SpecVariant variant,
                                         const PropensityFn& ga_override = nullptr) {
    const std::size_t n = data.size();
    NuisancePredictions out;
    out.ga_terms = ga_design(variant);
    out.gdelta_terms = gdelta_design(variant);
    out.qy_terms = qy_design(variant);
    out.qint_terms = qint_design(variant);
    for (int arm = 0; arm < 2; ++arm) {
        out.g_a[arm].assign(n, 0.0);
        out.g_delta[arm].assign(n, 0.0);
        out.q_y[arm].assign(n, 0.0);
    }
    out.fold_of.assign(n, -1);
    out.y_scale.resize(folds.n_folds);

    std::vector<std::size_t> train, valid, train_obs;
    for (int v = 0; v < folds.n_folds; ++v) {
        detail::split_train_valid(data, folds, v, train, valid);

        FitResult ga_fit, gd_fit, qy_fit;
        try {
            Eigen::VectorXd a_resp(train.size()), d_resp(train.size());
            for (std::size_t k = 0; k < train.size(); ++k) {
                a_resp(k) = data.records[train[k]].a;
                d_resp(k) = data.records[train[k]].delta;
            }
            if (!ga_override) {
                ga_fit = fit_logistic_irls(out.ga_terms, data, train, a_resp);
            }
            gd_fit = fit_logistic_irls(out.gdelta_terms, data, train, d_resp);

            train_obs.clear();
            std::vector<double> y_obs;
            for (std::size_t i : train) {
                if (data.records[i].delta == 1) {
                    train_obs.push_back(i);
                    y_obs.push_back(data.records[i].y);
                }
            }
            qy_fit = fit_ols(out.qy_terms, data, train_obs,
                             Eigen::Map<const Eigen::VectorXd>(
                                 y_obs.data(), static_cast<Eigen::Index>(y_obs.size())));
            out.y_scale[v] = fit_scale(y_obs);
        } catch (const EstimationError& e) {
            throw EstimationError("nuisance fit failed in fold " + std::to_string(v) +
                                  ": " + e.what());
        }

        for (std::size_t i : valid) {
            const auto& r = data.records[i];
            out.fold_of[i] = v;
            double p1;
            if (ga_override) {
                p1 = ga_override(1, r);
            } else {
                p1 = expit(ga_fit.linear_predictor(r));
            }
            out.g_a[1][i] = truncate_propensity(p1);
            out.g_a[0][i] = truncate_propensity(1.0 - p1);
            for (int arm = 0; arm < 2; ++arm) {
                out.g_delta[arm][i] =
                    truncate_propensity(expit(gd_fit.linear_predictor(r, arm)));
                out.q_y[arm][i] = qy_fit.linear_predictor(r, arm);
            }
        }
    }
    return out;
}

} // namespace satmle
