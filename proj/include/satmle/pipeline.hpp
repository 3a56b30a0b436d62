#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "satmle/dataset.hpp"
#include "satmle/errors.hpp"
#include "satmle/estimators.hpp"
#include "satmle/nuisance.hpp"
#include "satmle/targeting.hpp"

namespace satmle {

struct PipelineOptions {
    SpecVariant variant = SpecVariant::C;
    int n_folds = 10;
    std::uint64_t fold_seed = 0;
    PropensityFn ga_override; // null: estimate g_A; otherwise oracle mode
    // When set, use this fold assignment instead of drawing a fresh one
    // (leave-one-out refits inherit the parent run's folds).
    std::optional<FoldAssignment> preset_folds;
};

struct PipelineResult {
    FoldAssignment folds;
    NuisancePredictions nuisances;
    TargetedPredictions targeted;
    std::array<double, 2> psi_by_arm{0.0, 0.0};
    double psi = 0.0;       // shared by SA-TMLE and AIPW
    double psi_gcomp = 0.0;
    std::vector<ClusterEif> eif_satmle;
    std::vector<ClusterEif> eif_aipw;
    std::vector<ClusterEif> eif_gcomp;
    bool targeting_converged = true; // false when any cell used the fallback
    double eic_mean = 0.0;

    double point(EstimatorKind k) const {
        return k == EstimatorKind::GComp ? psi_gcomp : psi;
    }
    const std::vector<ClusterEif>& eif(EstimatorKind k) const {
        switch (k) {
            case EstimatorKind::Aipw: return eif_aipw;
            case EstimatorKind::GComp: return eif_gcomp;
            default: return eif_satmle;
        }
    }
};

inline constexpr double kCellScoreTolerance = 1e-6;
inline constexpr double kEicMeanTolerance = 1e-4;

/// Full estimation procedure: cluster-level fold assignment, cross-fitted
/// nuisances, two-stage targeting, point estimates and cluster EICs.
inline PipelineResult run_pipeline(const Dataset& data, const PipelineOptions& opts) {
    PipelineResult res;
    res.folds = opts.preset_folds
                    ? *opts.preset_folds
                    : assign_folds_checked(data, opts.n_folds, opts.fold_seed);
    res.nuisances = fit_nuisances(data, res.folds, opts.variant, opts.ga_override);
    res.targeted = run_targeting(data, res.folds, res.nuisances);

    res.targeting_converged =
        res.targeted.stage1.all_converged() && res.targeted.stage2.all_converged();
    if (res.targeting_converged) {
        const double worst = std::max(res.targeted.stage1.max_abs_score(),
                                      res.targeted.stage2.max_abs_score());
        if (worst > kCellScoreTolerance) {
            throw EstimationError("targeting score equation violated: " +
                                  std::to_string(worst));
        }
    }

    res.psi_by_arm = arm_means(res.targeted.qint_star, data.size());
    res.psi = res.psi_by_arm[1] - res.psi_by_arm[0];
    res.eif_satmle = compute_eic(res.targeted, res.nuisances, data, res.psi_by_arm);
    res.eif_aipw = aipw_eic(res.targeted, res.nuisances, data, res.psi_by_arm);

    double mean = 0.0;
    for (const auto& e : res.eif_satmle) mean += e.eif_sum;
    res.eic_mean = mean / static_cast<double>(res.eif_satmle.size());
    if (res.targeting_converged && std::abs(res.eic_mean) > kEicMeanTolerance) {
        throw EstimationError("EIC empirical mean too large after targeting: " +
                              std::to_string(res.eic_mean));
    }

    const GcompResult g = gcomp_point(res.nuisances, data, res.folds);
    res.psi_gcomp = g.psi;
    res.eif_gcomp = gcomp_eic(g, data);
    return res;
}

} // namespace satmle
