#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "satmle/dataset.hpp"
#include "satmle/errors.hpp"
#include "satmle/glm.hpp"
#include "satmle/math.hpp"
#include "satmle/nuisance.hpp"

namespace satmle {

struct CellFluctuation {
    int arm = 0;
    int fold = 0;
    FluctuationFit fit;
};

struct FluctuationResult {
    std::vector<CellFluctuation> cells;

    bool all_converged() const {
        for (const auto& c : cells)
            if (c.fit.method != FluctuationMethod::ConvergedNewton) return false;
        return true;
    }
    double max_abs_score() const {
        double m = 0.0;
        for (const auto& c : cells) m = std::max(m, std::abs(c.fit.score_residual));
        return m;
    }
};

struct TargetedPredictions {
    // indexed [arm][observation], natural outcome scale
    std::array<std::vector<double>, 2> qy_star;
    // qy_star clipped to the intermediate scale's representable range; this
    // is the response the stage-2 score equation actually solves, and the EIC
    // uses it so the per-cell score identities carry to the natural scale
    std::array<std::vector<double>, 2> qy_star_int;
    std::array<std::vector<double>, 2> qint_init;
    std::array<std::vector<double>, 2> qint_star;
    std::vector<ScaleParams> int_scale; // per fold, fit on stage-1 outputs
    FluctuationResult stage1;
    FluctuationResult stage2;
};

namespace detail {

/// Cross-fitted OLS of a per-observation response on the intermediate
/// (A, W) design: per fold, fit on the complement, predict held-out rows
/// under both arms.  Optionally exposes the training responses per fold
/// (for scale fitting).
inline std::array<std::vector<double>, 2> crossfit_intermediate(
    const Dataset& data, const FoldAssignment& folds, const DesignSpec& design,
    const std::vector<double>& response,
    std::vector<std::vector<double>>* train_values = nullptr) {
    const std::size_t n = data.size();
    std::array<std::vector<double>, 2> pred;
    pred[0].assign(n, 0.0);
    pred[1].assign(n, 0.0);
    if (train_values) train_values->assign(folds.n_folds, {});

    std::vector<std::size_t> train, valid;
    for (int v = 0; v < folds.n_folds; ++v) {
        split_train_valid(data, folds, v, train, valid);
        Eigen::VectorXd resp(train.size());
        for (std::size_t k = 0; k < train.size(); ++k) resp(k) = response[train[k]];
        const FitResult fit = fit_ols(design, data, train, resp);
        if (train_values) {
            (*train_values)[v].assign(resp.data(), resp.data() + resp.size());
        }
        for (std::size_t i : valid) {
            for (int arm = 0; arm < 2; ++arm) {
                pred[arm][i] = fit.linear_predictor(data.records[i], arm);
            }
        }
    }
    return pred;
}

} // namespace detail

/// Stage 1: per (arm, fold) cell, fluctuate the scaled outcome regression on
/// observed rows of that arm with clever covariate 1/(g_A * g_Delta), then
/// evaluate the targeted prediction for every row of the fold under both arms.
inline void stage1_target(const Dataset& data, const FoldAssignment& folds,
                          const NuisancePredictions& preds, TargetedPredictions& t) {
    const std::size_t n = data.size();
    t.qy_star[0].assign(n, 0.0);
    t.qy_star[1].assign(n, 0.0);

    std::vector<std::size_t> fold_rows;
    std::vector<double> offsets, clever, resp;
    for (int v = 0; v < folds.n_folds; ++v) {
        fold_rows.clear();
        for (std::size_t i = 0; i < n; ++i)
            if (preds.fold_of[i] == v) fold_rows.push_back(i);
        const ScaleParams& sc = preds.y_scale[v];

        for (int arm = 0; arm < 2; ++arm) {
            offsets.clear();
            clever.clear();
            resp.clear();
            for (std::size_t i : fold_rows) {
                const auto& r = data.records[i];
                if (r.delta != 1 || r.a != arm) continue;
                offsets.push_back(logit(preds.q_y_scaled(i, arm)));
                clever.push_back(1.0 / (preds.g_a[arm][i] * preds.g_delta[arm][i]));
                resp.push_back(sc.to_unit(r.y));
            }
            if (offsets.empty()) {
                throw EmptyCellError("stage1: empty (arm " + std::to_string(arm) +
                                     ", fold " + std::to_string(v) + ") cell");
            }
            const FluctuationFit fit = fit_offset_fluctuation(offsets, clever, resp);
            t.stage1.cells.push_back({arm, v, fit});

            // No clamp on the fitted mean: the solved score equation uses the
            // raw expit, and the EIC residuals must match it exactly.
            for (std::size_t i : fold_rows) {
                const double h = 1.0 / (preds.g_a[arm][i] * preds.g_delta[arm][i]);
                const double u = expit(logit(preds.q_y_scaled(i, arm)) + fit.epsilon * h);
                t.qy_star[arm][i] = sc.from_unit(u);
            }
        }
    }
}

/// Stage 2: fit the initial intermediate regression (targeted outcome
/// predictions at the observed arm, regressed on the (A, W) design without
/// any propensity input), then fluctuate it per (arm, fold) cell with clever
/// covariate 1/g_A.
inline void stage2_target(const Dataset& data, const FoldAssignment& folds,
                          const NuisancePredictions& preds, TargetedPredictions& t) {
    const std::size_t n = data.size();

    std::vector<double> response(n);
    for (std::size_t i = 0; i < n; ++i) response[i] = t.qy_star[data.records[i].a][i];

    std::vector<std::vector<double>> train_values;
    t.qint_init = detail::crossfit_intermediate(data, folds, preds.qint_terms,
                                                response, &train_values);
    t.int_scale.resize(folds.n_folds);
    for (int v = 0; v < folds.n_folds; ++v) t.int_scale[v] = fit_scale(train_values[v]);

    t.qint_star[0].assign(n, 0.0);
    t.qint_star[1].assign(n, 0.0);
    t.qy_star_int[0].assign(n, 0.0);
    t.qy_star_int[1].assign(n, 0.0);

    std::vector<std::size_t> fold_rows;
    std::vector<double> offsets, clever, resp;
    for (int v = 0; v < folds.n_folds; ++v) {
        fold_rows.clear();
        for (std::size_t i = 0; i < n; ++i)
            if (preds.fold_of[i] == v) fold_rows.push_back(i);
        const ScaleParams& sc = t.int_scale[v];

        for (int arm = 0; arm < 2; ++arm) {
            offsets.clear();
            clever.clear();
            resp.clear();
            for (std::size_t i : fold_rows) {
                if (data.records[i].a != arm) continue;
                offsets.push_back(logit(sc.to_unit(t.qint_init[arm][i])));
                clever.push_back(1.0 / preds.g_a[arm][i]);
                resp.push_back(sc.to_unit(t.qy_star[arm][i]));
            }
            if (offsets.empty()) {
                throw EmptyCellError("stage2: empty (arm " + std::to_string(arm) +
                                     ", fold " + std::to_string(v) + ") cell");
            }
            const FluctuationFit fit = fit_offset_fluctuation(offsets, clever, resp);
            t.stage2.cells.push_back({arm, v, fit});

            for (std::size_t i : fold_rows) {
                const double h = 1.0 / preds.g_a[arm][i];
                const double u =
                    expit(logit(sc.to_unit(t.qint_init[arm][i])) + fit.epsilon * h);
                t.qint_star[arm][i] = sc.from_unit(u);
                t.qy_star_int[arm][i] = sc.from_unit(sc.to_unit(t.qy_star[arm][i]));
            }
        }
    }
}

inline TargetedPredictions run_targeting(const Dataset& data,
                                         const FoldAssignment& folds,
                                         const NuisancePredictions& preds) {
    TargetedPredictions t;
    stage1_target(data, folds, preds, t);
    stage2_target(data, folds, preds, t);
    return t;
}

} // namespace satmle
