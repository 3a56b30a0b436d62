// Simulation driver and single-dataset estimation CLI.

#include <cstdint>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "satmle/dgp.hpp"
#include "satmle/harness.hpp"
#include "satmle/pipeline.hpp"
#include "satmle/variance.hpp"

namespace {

int cmd_run(const std::string& block_name, const std::string& out_path,
            satmle::harness::HarnessOptions opts, bool paper_scale) {
    using satmle::harness::Block;
    const std::map<std::string, Block> blocks{
        {"I", Block::I}, {"II", Block::II}, {"III", Block::III}, {"IV", Block::IV}};
    if (paper_scale) {
        opts.r_sandwich = 500;
        opts.r_jackknife = 200;
    }
    const auto report = satmle::harness::run_block(blocks.at(block_name), opts);
    satmle::harness::write_report(report, out_path);
    satmle::harness::print_report(report, std::cout);
    std::cout << "report written to " << out_path << "\n";
    return report.complete ? 0 : 2;
}

int cmd_simulate(double alpha1, double gamma0, int j, int m, std::uint64_t seed,
                 const std::string& out_path) {
    satmle::dgp::DgpConfig cfg;
    cfg.alpha1 = alpha1;
    cfg.gamma0 = gamma0;
    cfg.n_clusters = j;
    cfg.cluster_size = m;
    cfg.seed = seed;
    if (!cfg.valid()) {
        std::cerr << "invalid DGP configuration\n";
        return 1;
    }
    const auto data = satmle::dgp::generate_dataset(cfg);
    satmle::dgp::write_dataset_csv(data, out_path);
    std::cout << "wrote " << data.size() << " records (" << data.n_clusters()
              << " clusters, censoring rate " << satmle::dgp::censoring_rate(data)
              << ") to " << out_path << "\n";
    return 0;
}

int cmd_estimate(const std::string& data_path, const std::string& config_name,
                 const std::string& estimator_name, bool with_jackknife,
                 std::uint64_t seed) {
    const std::map<std::string, satmle::SpecVariant> configs{
        {"C", satmle::SpecVariant::C},
        {"M_gA", satmle::SpecVariant::MgA},
        {"M_Q", satmle::SpecVariant::MQ}};
    const std::map<std::string, satmle::EstimatorKind> estimators{
        {"satmle", satmle::EstimatorKind::SaTmle},
        {"aipw", satmle::EstimatorKind::Aipw},
        {"gcomp", satmle::EstimatorKind::GComp}};

    const auto data = satmle::dgp::read_dataset_csv(data_path);
    const auto J = static_cast<int>(data.n_clusters());

    satmle::PipelineOptions opts;
    opts.variant = configs.at(config_name);
    opts.n_folds = std::min(10, J);
    opts.fold_seed = satmle::rng::key(seed, 0xE577ULL);

    const auto pipe = satmle::run_pipeline(data, opts);
    std::optional<satmle::JackknifeResult> jk;
    if (with_jackknife) jk = satmle::jackknife(data, opts, pipe.folds);
    const auto kind = estimators.at(estimator_name);
    const auto res =
        satmle::summarize(pipe, kind, J, 0.05, jk ? &*jk : nullptr);

    std::cout.precision(6);
    std::cout << "estimator:    " << estimator_name << " (config " << config_name
              << ", V=" << opts.n_folds << ", J=" << J << ", N=" << data.size()
              << ")\n";
    std::cout << "psi_hat:      " << res.psi_hat << "\n";
    std::cout << "v_sand:       " << res.v_sand << "\n";
    std::cout << "ci_sand:      [" << res.ci_sand.first << ", "
              << res.ci_sand.second << "]\n";
    if (res.v_jk) {
        std::cout << "v_jk:         " << *res.v_jk << "\n";
        std::cout << "ci_jk:        [" << res.ci_jk->first << ", "
                  << res.ci_jk->second << "]\n";
        if (res.rho) std::cout << "rho:          " << *res.rho << "\n";
    } else if (with_jackknife) {
        std::cout << "v_jk:         unavailable (" << jk->failures
                  << " leave-one-out refits failed)\n";
    }
    std::cout << "converged:    " << (res.converged ? "yes" : "fallback used")
              << "\n";
    if (with_jackknife && jk->failures > 0) return 2;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nested-functional targeted estimation with cluster-robust "
                 "sandwich and jackknife inference"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a simulation block");
    std::string block_name, run_out;
    satmle::harness::HarnessOptions hopts;
    bool paper_scale = false;
    int j_flag = 0;
    run->add_option("--block", block_name, "Block id")
        ->required()
        ->check(CLI::IsMember({"I", "II", "III", "IV"}));
    run->add_option("--out", run_out, "Report CSV path")->required();
    run->add_option("--seed", hopts.seed, "Global seed (default 2024)");
    run->add_option("--r-sandwich", hopts.r_sandwich, "Sandwich replicates");
    run->add_option("--r-jackknife", hopts.r_jackknife, "Jackknife replicates");
    run->add_option("--j", j_flag, "Override cluster count");
    run->add_option("--threads", hopts.threads, "Worker threads");
    run->add_flag("--paper-scale", paper_scale, "Use R = 500/200");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Export a generated dataset as CSV");
    double alpha1 = 0.8, gamma0 = 0.5;
    int sim_j = 50, sim_m = 20;
    std::uint64_t sim_seed = 2024;
    std::string sim_out;
    sim->add_option("--alpha1", alpha1, "Confounding strength");
    sim->add_option("--gamma0", gamma0, "Censoring severity");
    sim->add_option("--j", sim_j, "Number of clusters");
    sim->add_option("--m", sim_m, "Cluster size");
    sim->add_option("--seed", sim_seed, "Seed");
    sim->add_option("--out", sim_out, "Output CSV path")->required();

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate from a dataset CSV");
    std::string data_path, config_name = "C", estimator_name = "satmle";
    bool with_jackknife = false;
    std::uint64_t est_seed = 2024;
    est->add_option("--data", data_path, "Dataset CSV path")->required();
    est->add_option("--config", config_name, "Nuisance configuration")
        ->check(CLI::IsMember({"C", "M_gA", "M_Q"}));
    est->add_option("--estimator", estimator_name, "Estimator")
        ->check(CLI::IsMember({"satmle", "aipw", "gcomp"}));
    est->add_flag("--jackknife", with_jackknife, "Also run the jackknife");
    est->add_option("--seed", est_seed, "Fold-assignment seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            if (j_flag > 0) hopts.j_override = j_flag;
            if (hopts.r_jackknife > hopts.r_sandwich) {
                std::cerr << "r-jackknife must not exceed r-sandwich\n";
                return 1;
            }
            return cmd_run(block_name, run_out, hopts, paper_scale);
        }
        if (*sim) return cmd_simulate(alpha1, gamma0, sim_j, sim_m, sim_seed, sim_out);
        if (*est)
            return cmd_estimate(data_path, config_name, estimator_name,
                                with_jackknife, est_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
