#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "satmle/dataset.hpp"
#include "satmle/errors.hpp"
#include "satmle/math.hpp"

namespace satmle {

// Regression terms available to the nuisance formulas.  Counterfactual
// predictions substitute the forced arm into every A-dependent term.
enum class Term { Intercept, W1, W1Sq, W2, W3, A, S, AxW1 };

struct DesignSpec {
    std::vector<Term> terms;

    bool contains(Term t) const {
        for (Term u : terms)
            if (u == t) return true;
        return false;
    }
};

inline double term_value(Term t, const ObservationRecord& r,
                         std::optional<int> arm = std::nullopt) {
    const double a = arm ? static_cast<double>(*arm) : static_cast<double>(r.a);
    switch (t) {
        case Term::Intercept: return 1.0;
        case Term::W1: return r.w1;
        case Term::W1Sq: return r.w1 * r.w1;
        case Term::W2: return static_cast<double>(r.w2);
        case Term::W3: return r.w3;
        case Term::A: return a;
        case Term::S: return r.s;
        case Term::AxW1: return a * r.w1;
    }
    return 0.0;
}

inline Eigen::MatrixXd design_matrix(const DesignSpec& design, const Dataset& data,
                                     std::span<const std::size_t> rows) {
    Eigen::MatrixXd x(rows.size(), design.terms.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = data.records[rows[i]];
        for (std::size_t k = 0; k < design.terms.size(); ++k) {
            x(i, k) = term_value(design.terms[k], r);
        }
    }
    return x;
}

struct FitResult {
    DesignSpec design;
    Eigen::VectorXd coefficients;
    bool converged = true;
    int iterations = 0;

    double linear_predictor(const ObservationRecord& r,
                            std::optional<int> arm = std::nullopt) const {
        double eta = 0.0;
        for (std::size_t k = 0; k < design.terms.size(); ++k) {
            eta += coefficients(k) * term_value(design.terms[k], r, arm);
        }
        return eta;
    }
};

inline constexpr double kPivotTolerance = 1e-10;
inline constexpr double kScoreTolerance = 1e-8;
inline constexpr double kSeparationBound = 30.0;
inline constexpr int kIrlsMaxIterations = 50;

/// Ordinary least squares via column-pivoted QR with rank check.
inline FitResult fit_ols(const DesignSpec& design, const Dataset& data,
                         std::span<const std::size_t> rows,
                         const Eigen::VectorXd& response) {
    const auto p = static_cast<Eigen::Index>(design.terms.size());
    if (static_cast<Eigen::Index>(rows.size()) < p) {
        throw RankDeficientError("fit_ols: fewer rows than design terms");
    }
    const Eigen::MatrixXd x = design_matrix(design, data, rows);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(kPivotTolerance);
    if (qr.rank() < p) {
        throw RankDeficientError("fit_ols: design matrix is rank deficient");
    }
    FitResult fit;
    fit.design = design;
    fit.coefficients = qr.solve(response);
    return fit;
}

/// Logistic regression by iteratively reweighted least squares.
inline FitResult fit_logistic_irls(const DesignSpec& design, const Dataset& data,
                                   std::span<const std::size_t> rows,
                                   const Eigen::VectorXd& response) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(design.terms.size());
    const Eigen::MatrixXd x = design_matrix(design, data, rows);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);

    FitResult fit;
    fit.design = design;
    for (int iter = 1; iter <= kIrlsMaxIterations; ++iter) {
        Eigen::VectorXd eta = x * beta;
        Eigen::VectorXd prob(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            prob(i) = expit(eta(i));
            w(i) = prob(i) * (1.0 - prob(i));
        }
        const Eigen::VectorXd score = x.transpose() * (response - prob);
        if (score.cwiseAbs().maxCoeff() < kScoreTolerance) {
            // A vanishing score with a saturated linear predictor means the
            // residuals underflowed, not that a finite optimum was reached.
            if (eta.cwiseAbs().maxCoeff() > kSeparationBound) {
                throw SeparationError(
                    "fit_logistic_irls: linear predictor saturated at convergence");
            }
            fit.coefficients = beta;
            fit.converged = true;
            fit.iterations = iter - 1;
            return fit;
        }
        const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success) {
            throw RankDeficientError("fit_logistic_irls: singular information matrix");
        }
        beta += ldlt.solve(score);
        if (beta.cwiseAbs().maxCoeff() > kSeparationBound) {
            throw SeparationError("fit_logistic_irls: coefficient exceeded separation bound");
        }
    }
    throw NoConvergenceError("fit_logistic_irls: no convergence after 50 iterations");
}

enum class FluctuationMethod { ConvergedNewton, OneStepFallback };

struct FluctuationFit {
    double epsilon = 0.0;
    FluctuationMethod method = FluctuationMethod::ConvergedNewton;
    double score_residual = 0.0;
    int iterations = 0;
};

inline constexpr double kCurvatureFloor = 1e-12;
inline constexpr int kFluctuationMaxIterations = 25;

/// One-parameter quasi-binomial offset fluctuation: solves
///   sum_i H_i (y_i - expit(offset_i + eps * H_i)) = 0
/// by damped Newton; falls back to a single undamped Newton step from 0
/// when the damped loop does not converge.
inline FluctuationFit fit_offset_fluctuation(std::span<const double> offset_logits,
                                             std::span<const double> clever_covariate,
                                             std::span<const double> responses) {
    const std::size_t n = offset_logits.size();
    auto score = [&](double eps) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += clever_covariate[i] *
                 (responses[i] - expit(offset_logits[i] + eps * clever_covariate[i]));
        }
        return s;
    };
    auto curvature = [&](double eps) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = expit(offset_logits[i] + eps * clever_covariate[i]);
            c += clever_covariate[i] * clever_covariate[i] * p * (1.0 - p);
        }
        return c;
    };

    const double score0 = score(0.0);
    const double curv0 = curvature(0.0);
    if (curv0 < kCurvatureFloor) {
        throw DegenerateCurvatureError("fit_offset_fluctuation: degenerate curvature at origin");
    }

    double eps = 0.0;
    double s = score0;
    for (int iter = 1; iter <= kFluctuationMaxIterations; ++iter) {
        if (std::abs(s) < kScoreTolerance) {
            return {eps, FluctuationMethod::ConvergedNewton, s, iter - 1};
        }
        const double c = curvature(eps);
        if (c < kCurvatureFloor) break;
        const double step = s / c;
        double t = 1.0;
        double s_new = score(eps + step);
        int halvings = 0;
        while (std::abs(s_new) > std::abs(s) && halvings < kFluctuationMaxIterations) {
            t *= 0.5;
            s_new = score(eps + t * step);
            ++halvings;
        }
        eps += t * step;
        s = s_new;
    }
    if (std::abs(s) < kScoreTolerance) {
        return {eps, FluctuationMethod::ConvergedNewton, s, kFluctuationMaxIterations};
    }
    const double eps_fb = score0 / curv0;
    return {eps_fb, FluctuationMethod::OneStepFallback, score(eps_fb),
            kFluctuationMaxIterations};
}

} // namespace satmle
