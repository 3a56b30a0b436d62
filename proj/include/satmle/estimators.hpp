#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "satmle/dataset.hpp"
#include "satmle/nuisance.hpp"
#include "satmle/targeting.hpp"

namespace satmle {

enum class EstimatorKind { SaTmle, Aipw, GComp };

inline std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::SaTmle: return "satmle";
        case EstimatorKind::Aipw: return "aipw";
        case EstimatorKind::GComp: return "gcomp";
    }
    return "?";
}

/// Per-cluster influence contribution on the estimate scale: the within-
/// cluster sum of D* divided by the mean cluster size N/J, so that the
/// average of eif_sum over clusters equals the empirical mean of D*.
struct ClusterEif {
    int cluster_id = 0;
    double eif_sum = 0.0;
};

inline std::array<double, 2> arm_means(const std::array<std::vector<double>, 2>& qint,
                                       std::size_t n) {
    std::array<double, 2> psi{0.0, 0.0};
    for (int arm = 0; arm < 2; ++arm) {
        for (std::size_t i = 0; i < n; ++i) psi[arm] += qint[arm][i];
        psi[arm] /= static_cast<double>(n);
    }
    return psi;
}

/// Point estimate: pooled mean contrast of the targeted intermediate
/// regression across validation sets.
inline double satmle_point(const TargetedPredictions& t, const Dataset& data) {
    const auto psi = arm_means(t.qint_star, data.size());
    return psi[1] - psi[0];
}

namespace detail {

template <class PerObservation>
std::vector<ClusterEif> cluster_sums(const Dataset& data, PerObservation d_star) {
    const double mean_cluster_size =
        static_cast<double>(data.size()) / static_cast<double>(data.n_clusters());
    std::vector<ClusterEif> out;
    out.reserve(data.n_clusters());
    for (const auto& [cid, rows] : data.cluster_index) {
        double sum = 0.0;
        for (std::size_t i : rows) sum += d_star(i);
        out.push_back({cid, sum / mean_cluster_size});
    }
    return out;
}

} // namespace detail

/// Efficient influence curve of the nested-functional estimator, summed
/// within cluster.
inline std::vector<ClusterEif> compute_eic(const TargetedPredictions& t,
                                           const NuisancePredictions& preds,
                                           const Dataset& data,
                                           const std::array<double, 2>& psi_by_arm) {
    return detail::cluster_sums(data, [&](std::size_t i) {
        const auto& r = data.records[i];
        // Each residual is formed on the scale its score equation was solved
        // on: the outcome residual uses Y clipped to the fold's outcome scale,
        // and the intermediate residual uses the stage-1 prediction clipped to
        // the fold's intermediate scale.  This keeps the per-cell empirical
        // mean of each component at exactly zero.
        const ScaleParams& ysc = preds.y_scale[preds.fold_of[i]];
        double d = 0.0;
        for (int arm = 0; arm < 2; ++arm) {
            const double sign = arm == 1 ? 1.0 : -1.0;
            double term = t.qint_star[arm][i] - psi_by_arm[arm];
            if (r.a == arm) {
                const double inv_ga = 1.0 / preds.g_a[arm][i];
                term += inv_ga * (t.qy_star_int[arm][i] - t.qint_star[arm][i]);
                if (r.delta == 1) {
                    const double y_eff = ysc.from_unit(ysc.to_unit(r.y));
                    term += inv_ga / preds.g_delta[arm][i] *
                            (y_eff - t.qy_star[arm][i]);
                }
            }
            d += sign * term;
        }
        return d;
    });
}

/// Single-stage AIPW influence curve: the composite inverse weight multiplies
/// the residual to the intermediate regression directly.  Shares the SA-TMLE
/// point estimate.
inline std::vector<ClusterEif> aipw_eic(const TargetedPredictions& t,
                                        const NuisancePredictions& preds,
                                        const Dataset& data,
                                        const std::array<double, 2>& psi_by_arm) {
    return detail::cluster_sums(data, [&](std::size_t i) {
        const auto& r = data.records[i];
        double d = 0.0;
        for (int arm = 0; arm < 2; ++arm) {
            const double sign = arm == 1 ? 1.0 : -1.0;
            double term = t.qint_star[arm][i] - psi_by_arm[arm];
            if (r.a == arm && r.delta == 1) {
                term += (r.y - t.qint_star[arm][i]) /
                        (preds.g_a[arm][i] * preds.g_delta[arm][i]);
            }
            d += sign * term;
        }
        return d;
    });
}

struct GcompResult {
    double psi = 0.0;
    std::array<double, 2> psi_by_arm{0.0, 0.0};
    std::array<std::vector<double>, 2> qint; // untargeted intermediate predictions
};

/// G-computation plug-in: the untargeted outcome regression at the observed
/// arm is regressed on the intermediate design, no augmentation.
inline GcompResult gcomp_point(const NuisancePredictions& preds, const Dataset& data,
                               const FoldAssignment& folds) {
    const std::size_t n = data.size();
    std::vector<double> response(n);
    for (std::size_t i = 0; i < n; ++i) response[i] = preds.q_y[data.records[i].a][i];
    GcompResult out;
    out.qint = detail::crossfit_intermediate(data, folds, preds.qint_terms, response);
    out.psi_by_arm = arm_means(out.qint, n);
    out.psi = out.psi_by_arm[1] - out.psi_by_arm[0];
    return out;
}

/// Plug-in deviation EIC for G-computation's sandwich.
inline std::vector<ClusterEif> gcomp_eic(const GcompResult& g, const Dataset& data) {
    return detail::cluster_sums(data, [&](std::size_t i) {
        return g.qint[1][i] - g.qint[0][i] - g.psi;
    });
}

} // namespace satmle
