#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "satmle/errors.hpp"
#include "satmle/estimators.hpp"
#include "satmle/pipeline.hpp"

namespace satmle {

/// Cluster-robust sandwich: [J(J-1)]^-1 sum_j (EIF_j - mean)^2.
inline double sandwich_variance(const std::vector<ClusterEif>& eifs) {
    const auto J = static_cast<double>(eifs.size());
    if (eifs.size() < 2) {
        throw DegenerateClustersError("sandwich_variance: need at least 2 clusters");
    }
    double mean = 0.0;
    for (const auto& e : eifs) mean += e.eif_sum;
    mean /= J;
    double ss = 0.0;
    for (const auto& e : eifs) ss += (e.eif_sum - mean) * (e.eif_sum - mean);
    return ss / (J * (J - 1.0));
}

inline double t_critical(int J, double alpha) {
    const boost::math::students_t_distribution<double> dist(J - 1);
    return boost::math::quantile(dist, 1.0 - alpha / 2.0);
}

/// Two-sided t interval with J-1 degrees of freedom.
inline std::pair<double, double> confidence_interval(double psi, double v, int J,
                                                     double alpha = 0.05) {
    const double half = t_critical(J, alpha) * std::sqrt(v);
    return {psi - half, psi + half};
}

inline double jackknife_variance(const std::vector<double>& loo) {
    const auto J = static_cast<double>(loo.size());
    double mean = 0.0;
    for (double p : loo) mean += p;
    mean /= J;
    double ss = 0.0;
    for (double p : loo) ss += (p - mean) * (p - mean);
    return (J - 1.0) / J * ss;
}

struct JackknifeResult {
    // leave-one-cluster-out point estimates, one per cluster, in cluster order
    std::map<EstimatorKind, std::vector<double>> loo;
    int failures = 0;

    std::optional<double> variance(EstimatorKind k) const {
        if (failures > 0) return std::nullopt;
        return jackknife_variance(loo.at(k));
    }
};

/// Leave-one-cluster-out jackknife: the entire pipeline (nuisance fitting,
/// both targeting stages, point estimates) is rerun on the dataset minus each
/// cluster.  Each refit inherits the parent run's fold assignment restricted
/// to the remaining clusters (hence V_j = min(V, J-1) automatically), so the
/// leave-one-out spread measures the deletion effect alone rather than fold
/// randomization noise.
inline JackknifeResult jackknife(const Dataset& data, const PipelineOptions& opts,
                                 const FoldAssignment& parent_folds) {
    const auto J = static_cast<int>(data.n_clusters());
    if (J < 3) throw DegenerateClustersError("jackknife: need at least 3 clusters");
    JackknifeResult out;
    for (EstimatorKind k :
         {EstimatorKind::SaTmle, EstimatorKind::Aipw, EstimatorKind::GComp}) {
        out.loo[k] = {};
    }
    for (int cid : data.cluster_ids()) {
        const Dataset sub = data.without_cluster(cid);
        PipelineOptions loo_opts = opts;
        loo_opts.preset_folds = parent_folds.without_cluster(cid);
        loo_opts.n_folds = loo_opts.preset_folds->n_folds;
        try {
            const PipelineResult r = run_pipeline(sub, loo_opts);
            out.loo[EstimatorKind::SaTmle].push_back(r.psi);
            out.loo[EstimatorKind::Aipw].push_back(r.psi);
            out.loo[EstimatorKind::GComp].push_back(r.psi_gcomp);
        } catch (const EstimationError&) {
            ++out.failures;
        }
    }
    return out;
}

struct EstimateResult {
    double psi_hat = 0.0;
    double v_sand = 0.0;
    std::optional<double> v_jk;
    std::pair<double, double> ci_sand{0.0, 0.0};
    std::optional<std::pair<double, double>> ci_jk;
    std::optional<double> rho;
    std::vector<double> loo_estimates;
    std::vector<ClusterEif> cluster_eifs;
    bool converged = true;
};

/// Assemble point estimate, sandwich, optional jackknife, t intervals and the
/// rho diagnostic for one estimator from a completed pipeline run.
inline EstimateResult summarize(const PipelineResult& pipe, EstimatorKind kind,
                                int J, double alpha = 0.05,
                                const JackknifeResult* jk = nullptr) {
    EstimateResult out;
    out.psi_hat = pipe.point(kind);
    out.cluster_eifs = pipe.eif(kind);
    out.v_sand = sandwich_variance(out.cluster_eifs);
    out.ci_sand = confidence_interval(out.psi_hat, out.v_sand, J, alpha);
    out.converged = pipe.targeting_converged;
    if (jk) {
        out.v_jk = jk->variance(kind);
        if (out.v_jk) {
            out.loo_estimates = jk->loo.at(kind);
            out.ci_jk = confidence_interval(out.psi_hat, *out.v_jk, J, alpha);
            if (out.v_sand > 0.0) out.rho = *out.v_jk / out.v_sand;
        }
    }
    return out;
}

} // namespace satmle
