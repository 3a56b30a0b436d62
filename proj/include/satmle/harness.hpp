#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "satmle/dgp.hpp"
#include "satmle/pipeline.hpp"
#include "satmle/variance.hpp"

namespace satmle::harness {

enum class Block { I, II, III, IV };

inline std::string to_string(Block b) {
    switch (b) {
        case Block::I: return "I";
        case Block::II: return "II";
        case Block::III: return "III";
        case Block::IV: return "IV";
    }
    return "?";
}

struct HarnessOptions {
    std::uint64_t seed = 2024;
    int r_sandwich = 200;  // paper scale: 500
    int r_jackknife = 100; // paper scale: 200
    std::optional<int> j_override;
    int m = 20;
    double alpha = 0.05;
    int threads = 1;
};

struct CellSpec {
    double alpha1 = 0.8;
    double gamma0 = 0.5;
    int n_clusters = 50;
    int cluster_size = 20;
    SpecVariant config = SpecVariant::C;
    std::vector<EstimatorKind> estimators{EstimatorKind::SaTmle};
    bool oracle = false;
};

/// Replicate data seed depends only on the DGP parameters, so nuisance
/// configurations within a cell see identical datasets and comparisons
/// across configs are paired.
inline std::uint64_t replicate_data_seed(std::uint64_t seed, const CellSpec& cell,
                                         int replicate) {
    return rng::key(seed, std::bit_cast<std::uint64_t>(cell.alpha1),
                    std::bit_cast<std::uint64_t>(cell.gamma0),
                    static_cast<std::uint64_t>(cell.n_clusters),
                    static_cast<std::uint64_t>(cell.cluster_size),
                    static_cast<std::uint64_t>(replicate));
}

struct EstimatorStats {
    double psi = 0.0;
    double v_sand = 0.0;
    std::optional<double> v_jk;
};

struct ReplicateOutcome {
    bool ok = false;
    std::string error;
    double cens_rate = 0.0;
    bool jackknife_attempted = false;
    std::map<EstimatorKind, EstimatorStats> regular;
    std::map<EstimatorKind, EstimatorStats> oracle;
    bool oracle_ok = true;
};

namespace detail {

inline void run_one_variant(const Dataset& data, const PipelineOptions& opts,
                            const std::vector<EstimatorKind>& estimators,
                            bool with_jackknife,
                            std::map<EstimatorKind, EstimatorStats>& out) {
    const PipelineResult pipe = run_pipeline(data, opts);
    std::optional<JackknifeResult> jk;
    if (with_jackknife) jk = jackknife(data, opts, pipe.folds);
    for (EstimatorKind k : estimators) {
        EstimatorStats st;
        st.psi = pipe.point(k);
        st.v_sand = sandwich_variance(pipe.eif(k));
        if (jk) st.v_jk = jk->variance(k);
        out[k] = st;
    }
}

} // namespace detail

inline ReplicateOutcome run_replicate(const CellSpec& cell, const HarnessOptions& opts,
                                      int replicate) {
    ReplicateOutcome out;
    out.jackknife_attempted = replicate < opts.r_jackknife;

    dgp::DgpConfig cfg;
    cfg.alpha1 = cell.alpha1;
    cfg.gamma0 = cell.gamma0;
    cfg.n_clusters = cell.n_clusters;
    cfg.cluster_size = cell.cluster_size;
    cfg.seed = replicate_data_seed(opts.seed, cell, replicate);
    const Dataset data = dgp::generate_dataset(cfg);
    out.cens_rate = dgp::censoring_rate(data);

    PipelineOptions popts;
    popts.variant = cell.config;
    popts.n_folds = std::min(10, cell.n_clusters);
    popts.fold_seed = rng::mix(cfg.seed, 0xF01D5ULL);

    try {
        detail::run_one_variant(data, popts, cell.estimators, out.jackknife_attempted,
                                out.regular);
        out.ok = true;
    } catch (const EstimationError& e) {
        out.error = e.what();
        return out;
    }

    if (cell.oracle) {
        PipelineOptions oracle_opts = popts;
        const double alpha1 = cell.alpha1;
        oracle_opts.ga_override = [alpha1](int arm, const ObservationRecord& r) {
            return dgp::true_g_a(arm, r.w1, alpha1);
        };
        try {
            detail::run_one_variant(data, oracle_opts, cell.estimators,
                                    out.jackknife_attempted, out.oracle);
        } catch (const EstimationError& e) {
            out.oracle_ok = false;
            out.error = e.what();
        }
    }
    return out;
}

/// One report row: metrics for a cell x estimator combination.
struct RowMetrics {
    Block block = Block::I;
    double alpha1 = 0.0, gamma0 = 0.0;
    int n_clusters = 0;
    SpecVariant config = SpecVariant::C;
    std::string estimator;
    int r_sandwich = 0, r_jackknife = 0;
    double bias = 0.0;
    double cp_sand = 0.0, cp_jk = 0.0;
    double width_sand = 0.0, width_jk = 0.0;
    double power_jk = 0.0;
    double rho_bar = 0.0;
    double cens_rate = 0.0;
    int fail_sandwich = 0, fail_jackknife = 0;
};

struct BlockReport {
    Block block = Block::I;
    std::vector<RowMetrics> rows;
    bool complete = true;
};

namespace detail {

inline RowMetrics aggregate(const CellSpec& cell, const HarnessOptions& opts,
                            Block block,
                            const std::vector<ReplicateOutcome>& outcomes,
                            EstimatorKind kind, bool use_oracle,
                            const std::string& label) {
    RowMetrics row;
    row.block = block;
    row.alpha1 = cell.alpha1;
    row.gamma0 = cell.gamma0;
    row.n_clusters = cell.n_clusters;
    row.config = cell.config;
    row.estimator = label;
    row.r_sandwich = opts.r_sandwich;
    row.r_jackknife = opts.r_jackknife;

    const double truth = dgp::true_ate();
    const int J = cell.n_clusters;
    double psi_sum = 0.0, cens_sum = 0.0, width_s_sum = 0.0;
    int n_s = 0, cover_s = 0;
    double vjk_sum = 0.0, vsand_jk_sum = 0.0, width_jk_sum = 0.0;
    int n_jk = 0, cover_jk = 0, reject_jk = 0;

    for (const auto& o : outcomes) {
        const bool run_ok = use_oracle ? (o.ok && o.oracle_ok) : o.ok;
        if (!run_ok) {
            ++row.fail_sandwich;
            if (o.jackknife_attempted) ++row.fail_jackknife;
            continue;
        }
        const auto& st = (use_oracle ? o.oracle : o.regular).at(kind);
        ++n_s;
        psi_sum += st.psi;
        cens_sum += o.cens_rate;
        const auto ci_s = confidence_interval(st.psi, st.v_sand, J, opts.alpha);
        width_s_sum += ci_s.second - ci_s.first;
        if (ci_s.first <= truth && truth <= ci_s.second) ++cover_s;
        if (o.jackknife_attempted) {
            if (!st.v_jk) {
                ++row.fail_jackknife;
                continue;
            }
            ++n_jk;
            vjk_sum += *st.v_jk;
            vsand_jk_sum += st.v_sand;
            const auto ci = confidence_interval(st.psi, *st.v_jk, J, opts.alpha);
            width_jk_sum += ci.second - ci.first;
            if (ci.first <= truth && truth <= ci.second) ++cover_jk;
            if (ci.first > 0.0 || ci.second < 0.0) ++reject_jk;
        }
    }

    if (n_s > 0) {
        row.bias = psi_sum / n_s - truth;
        row.cp_sand = static_cast<double>(cover_s) / n_s;
        row.width_sand = width_s_sum / n_s;
        row.cens_rate = cens_sum / n_s;
    }
    if (n_jk > 0) {
        row.cp_jk = static_cast<double>(cover_jk) / n_jk;
        row.width_jk = width_jk_sum / n_jk;
        row.power_jk = static_cast<double>(reject_jk) / n_jk;
        // ratio of Monte Carlo mean variances over the jackknife subset
        row.rho_bar = vsand_jk_sum > 0.0 ? vjk_sum / vsand_jk_sum : 0.0;
    }
    return row;
}

template <class Fn>
void parallel_for(int n, int threads, Fn fn) {
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace detail

/// Run all replicates of one scenario cell and aggregate one row per
/// requested estimator (plus an oracle row when enabled).
inline std::vector<RowMetrics> run_cell(const CellSpec& cell,
                                        const HarnessOptions& opts, Block block) {
    std::vector<ReplicateOutcome> outcomes(opts.r_sandwich);
    detail::parallel_for(opts.r_sandwich, opts.threads, [&](int r) {
        outcomes[r] = run_replicate(cell, opts, r);
    });
    std::vector<RowMetrics> rows;
    for (EstimatorKind k : cell.estimators) {
        rows.push_back(detail::aggregate(cell, opts, block, outcomes, k, false,
                                         satmle::to_string(k)));
        if (cell.oracle) {
            rows.push_back(detail::aggregate(cell, opts, block, outcomes, k, true,
                                             satmle::to_string(k) + "_oracle"));
        }
    }
    return rows;
}

inline std::vector<CellSpec> block_cells(Block block, const HarnessOptions& opts) {
    const std::vector<EstimatorKind> satmle_only{EstimatorKind::SaTmle};
    const std::vector<EstimatorKind> all_three{
        EstimatorKind::SaTmle, EstimatorKind::Aipw, EstimatorKind::GComp};
    const std::vector<EstimatorKind> no_gcomp{EstimatorKind::SaTmle,
                                              EstimatorKind::Aipw};
    const int J = opts.j_override.value_or(50);
    std::vector<CellSpec> cells;
    auto cell = [&](double a1, double g0, int j, SpecVariant cfg,
                    const std::vector<EstimatorKind>& est, bool oracle = false) {
        CellSpec c;
        c.alpha1 = a1;
        c.gamma0 = g0;
        c.n_clusters = j;
        c.cluster_size = opts.m;
        c.config = cfg;
        c.estimators = est;
        c.oracle = oracle;
        return c;
    };
    switch (block) {
        case Block::I:
            for (double g0 : {2.0, 0.5, -0.5})
                for (double a1 : {0.3, 0.8, 1.5})
                    cells.push_back(cell(a1, g0, J, SpecVariant::C, satmle_only));
            break;
        case Block::II:
            // Table layout: no G-computation row under M_gA (it would
            // duplicate config C, which never consumes g_A)
            cells.push_back(cell(0.8, 0.5, J, SpecVariant::C, all_three));
            cells.push_back(cell(0.8, 0.5, J, SpecVariant::MgA, no_gcomp));
            cells.push_back(cell(0.8, 0.5, J, SpecVariant::MQ, all_three));
            break;
        case Block::III:
            // the J grid is the point of this block; --j does not apply
            for (int j : {10, 50, 100})
                cells.push_back(cell(0.8, 0.5, j, SpecVariant::C, satmle_only));
            break;
        case Block::IV:
            for (double g0 : {2.0, 0.5, -0.5})
                cells.push_back(
                    cell(1.5, g0, J, SpecVariant::MgA, satmle_only, true));
            break;
    }
    return cells;
}

inline BlockReport run_block(Block block, const HarnessOptions& opts) {
    BlockReport report;
    report.block = block;
    for (const CellSpec& cell : block_cells(block, opts)) {
        for (auto& row : run_cell(cell, opts, block)) {
            if (row.fail_sandwich > 0 || row.fail_jackknife > 0)
                report.complete = false;
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

inline constexpr const char* kReportHeader =
    "block,alpha1,gamma0,J,config,estimator,R_s,R_jk,bias,cp_s,cp_jk,width_s,"
    "width_jk,power_jk,rho_bar,cens_rate,fail_s,fail_jk";

inline void write_report_csv(const BlockReport& report, std::ostream& os) {
    os << kReportHeader << '\n';
    os << std::setprecision(6);
    for (const auto& r : report.rows) {
        os << to_string(r.block) << ',' << r.alpha1 << ',' << r.gamma0 << ','
           << r.n_clusters << ',' << satmle::to_string(r.config) << ','
           << r.estimator << ',' << r.r_sandwich << ',' << r.r_jackknife << ','
           << r.bias << ',' << r.cp_sand << ',' << r.cp_jk << ',' << r.width_sand
           << ',' << r.width_jk << ',' << r.power_jk << ',' << r.rho_bar << ','
           << r.cens_rate << ',' << r.fail_sandwich << ',' << r.fail_jackknife
           << '\n';
    }
}

inline void write_report(const BlockReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open report for writing: " + path);
    write_report_csv(report, os);
}

inline void print_report(const BlockReport& report, std::ostream& os) {
    os << "Block " << to_string(report.block) << " ("
       << (report.complete ? "complete" : "partial") << ")\n";
    os << std::left << std::setw(7) << "a1" << std::setw(7) << "g0" << std::setw(5)
       << "J" << std::setw(6) << "cfg" << std::setw(15) << "estimator"
       << std::right << std::setw(9) << "bias" << std::setw(8) << "cp_s"
       << std::setw(8) << "cp_jk" << std::setw(9) << "w_s" << std::setw(9)
       << "w_jk" << std::setw(8) << "pow" << std::setw(10) << "rho" << std::setw(8)
       << "cens" << std::setw(6) << "fS" << std::setw(6) << "fJK" << '\n';
    os << std::fixed;
    for (const auto& r : report.rows) {
        os << std::left << std::setw(7) << std::setprecision(1) << r.alpha1
           << std::setw(7) << r.gamma0 << std::setw(5) << r.n_clusters
           << std::setw(6) << satmle::to_string(r.config) << std::setw(15)
           << r.estimator << std::right << std::setprecision(4) << std::setw(9)
           << r.bias << std::setprecision(3) << std::setw(8) << r.cp_sand
           << std::setw(8) << r.cp_jk << std::setw(9) << r.width_sand
           << std::setw(9) << r.width_jk << std::setw(8) << r.power_jk
           << std::setw(10) << r.rho_bar << std::setw(8) << r.cens_rate
           << std::setw(6) << r.fail_sandwich << std::setw(6) << r.fail_jackknife
           << '\n';
    }
    os.unsetf(std::ios::fixed);
}

} // namespace satmle::harness
