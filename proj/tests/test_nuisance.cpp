#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "satmle/dgp.hpp"
#include "satmle/nuisance.hpp"

using namespace satmle;

TEST_CASE("nuisance designs match the three specification configurations") {
    // treatment propensity: quadratic when correct, linear under M_gA
    CHECK(ga_design(SpecVariant::C).contains(Term::W1Sq));
    CHECK(ga_design(SpecVariant::MQ).contains(Term::W1Sq));
    CHECK_FALSE(ga_design(SpecVariant::MgA).contains(Term::W1Sq));
    // censoring model is always correctly specified
    for (SpecVariant v : {SpecVariant::C, SpecVariant::MgA, SpecVariant::MQ}) {
        CHECK(gdelta_design(v).contains(Term::S));
        CHECK(gdelta_design(v).contains(Term::A));
        CHECK(gdelta_design(v).contains(Term::W3));
    }
    // outcome model: interaction dropped under M_Q
    CHECK(qy_design(SpecVariant::C).contains(Term::AxW1));
    CHECK(qy_design(SpecVariant::MgA).contains(Term::AxW1));
    CHECK_FALSE(qy_design(SpecVariant::MQ).contains(Term::AxW1));
    CHECK(to_string(SpecVariant::C) == "C");
    CHECK(to_string(SpecVariant::MgA) == "M_gA");
    CHECK(to_string(SpecVariant::MQ) == "M_Q");
}

TEST_CASE("intermediate regression consumes no intermediate or propensity input") {
    // structural requirement: the initial intermediate fit sees only (A, W)
    for (SpecVariant v : {SpecVariant::C, SpecVariant::MgA, SpecVariant::MQ}) {
        CHECK_FALSE(qint_design(v).contains(Term::S));
        CHECK(qint_design(v).contains(Term::A));
    }
}

TEST_CASE("propensity truncation clamps to [0.025, 0.975] and is idempotent") {
    CHECK(truncate_propensity(0.001) == 0.025);
    CHECK(truncate_propensity(0.5) == 0.5);
    CHECK(truncate_propensity(0.99) == 0.975);
    for (double p : {0.0, 0.01, 0.025, 0.3, 0.975, 1.0}) {
        CHECK(truncate_propensity(truncate_propensity(p)) == truncate_propensity(p));
    }
}

TEST_CASE("fold assignment deals clusters round-robin after a keyed shuffle") {
    dgp::DgpConfig cfg;
    const Dataset d = dgp::generate_dataset(cfg); // J = 50
    const FoldAssignment folds = assign_folds(d, 10, 7);
    REQUIRE(folds.n_folds == 10);
    std::vector<int> count(10, 0);
    for (const auto& [cid, v] : folds.fold_of_cluster) {
        REQUIRE(v >= 0);
        REQUIRE(v < 10);
        ++count[v];
    }
    for (int c : count) CHECK(c == 5);
    CHECK(folds.fold_of_cluster.size() == 50);
    // deterministic in the seed, sensitive to it
    CHECK(assign_folds(d, 10, 7).fold_of_cluster == folds.fold_of_cluster);
    CHECK(assign_folds(d, 10, 8).fold_of_cluster != folds.fold_of_cluster);
}

TEST_CASE("leave-one-out fold counts follow min(V, J-1)") {
    dgp::DgpConfig cfg;
    cfg.n_clusters = 7;
    const Dataset d = dgp::generate_dataset(cfg);
    const FoldAssignment folds = assign_folds(d, std::min(10, 7 - 1), 3);
    REQUIRE(folds.n_folds == 6);
    std::map<int, int> sizes;
    for (const auto& [cid, v] : folds.fold_of_cluster) ++sizes[v];
    std::vector<int> sorted;
    for (const auto& [v, c] : sizes) sorted.push_back(c);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    CHECK(sorted == std::vector<int>{2, 1, 1, 1, 1, 1});
}

TEST_CASE("too few clusters for the requested folds is an error") {
    dgp::DgpConfig cfg;
    cfg.n_clusters = 3;
    const Dataset d = dgp::generate_dataset(cfg);
    CHECK_THROWS_AS(assign_folds(d, 5, 1), TooFewClustersError);
    CHECK_THROWS_AS(assign_folds(d, 1, 1), TooFewClustersError);
}

TEST_CASE("removing a cluster from an assignment preserves the others") {
    dgp::DgpConfig cfg;
    const Dataset d = dgp::generate_dataset(cfg);
    const FoldAssignment folds = assign_folds(d, 10, 42);
    const FoldAssignment loo = folds.without_cluster(3);
    CHECK(loo.fold_of_cluster.size() == 49);
    CHECK(loo.n_folds == 10); // fold had 5 clusters, stays non-empty
    CHECK(loo.fold_of_cluster.count(3) == 0);
    for (const auto& [cid, v] : loo.fold_of_cluster) {
        CHECK(v == folds.fold_of_cluster.at(cid)); // no compaction needed here
    }
}

TEST_CASE("removing the only cluster of a fold compacts the fold indices") {
    dgp::DgpConfig cfg;
    cfg.n_clusters = 10;
    const Dataset d = dgp::generate_dataset(cfg);
    const FoldAssignment folds = assign_folds(d, 10, 5); // one cluster per fold
    int some_cluster = folds.fold_of_cluster.begin()->first;
    const FoldAssignment loo = folds.without_cluster(some_cluster);
    CHECK(loo.n_folds == 9);
    std::vector<int> count(9, 0);
    for (const auto& [cid, v] : loo.fold_of_cluster) {
        REQUIRE(v >= 0);
        REQUIRE(v < 9);
        ++count[v];
    }
    for (int c : count) CHECK(c == 1);
}

TEST_CASE("outcome scaling adds symmetric headroom and clamps") {
    std::vector<double> train{0.0, 1.0};
    const ScaleParams sc = fit_scale(train);
    CHECK_THAT(sc.y_min, Catch::Matchers::WithinAbs(-0.1, 1e-12));
    CHECK_THAT(sc.y_max, Catch::Matchers::WithinAbs(1.1, 1e-12));
    CHECK_THAT(sc.to_unit(0.5), Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT(sc.to_unit(1.0), Catch::Matchers::WithinAbs(11.0 / 12.0, 1e-12));
    CHECK(sc.to_unit(3.0) == 0.995);  // far above training max: clamp ceiling
    CHECK(sc.to_unit(-3.0) == 0.005); // clamp floor
    CHECK_THAT(sc.from_unit(sc.to_unit(0.731)),
               Catch::Matchers::WithinAbs(0.731, 1e-12));
    CHECK_THROWS_AS(fit_scale(std::vector<double>{}), DegenerateRangeError);
    CHECK_THROWS_AS(fit_scale(std::vector<double>{2.0, 2.0}), DegenerateRangeError);
}

TEST_CASE("cross-fitted nuisances: fold bookkeeping and truncation hold") {
    dgp::DgpConfig cfg;
    const Dataset d = dgp::generate_dataset(cfg);
    const FoldAssignment folds = assign_folds_checked(d, 10, 1);
    const NuisancePredictions preds = fit_nuisances(d, folds, SpecVariant::C);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(preds.fold_of[i] ==
              folds.fold_of_cluster.at(d.records[i].cluster_id));
        for (int arm = 0; arm < 2; ++arm) {
            CHECK(preds.g_a[arm][i] >= 0.025);
            CHECK(preds.g_a[arm][i] <= 0.975);
            CHECK(preds.g_delta[arm][i] >= 0.025);
            CHECK(preds.g_delta[arm][i] <= 0.975);
            CHECK(std::isfinite(preds.q_y[arm][i]));
        }
    }
}

TEST_CASE("propensity override is an exact truncated passthrough") {
    dgp::DgpConfig cfg;
    const Dataset d = dgp::generate_dataset(cfg);
    const FoldAssignment folds = assign_folds_checked(d, 10, 1);
    const double alpha1 = cfg.alpha1;
    const NuisancePredictions preds = fit_nuisances(
        d, folds, SpecVariant::C,
        [alpha1](int arm, const ObservationRecord& r) {
            return dgp::true_g_a(arm, r.w1, alpha1);
        });
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double p1 = dgp::true_g_a(1, d.records[i].w1, alpha1);
        CHECK(preds.g_a[1][i] == truncate_propensity(p1));
        CHECK(preds.g_a[0][i] == truncate_propensity(1.0 - p1));
    }
}

TEST_CASE("correct propensity model tracks the truth; misspecified one does not") {
    dgp::DgpConfig cfg;
    cfg.n_clusters = 200; // n = 4000
    cfg.alpha1 = 1.5;
    const Dataset d = dgp::generate_dataset(cfg);
    const FoldAssignment folds = assign_folds_checked(d, 10, 2);
    const NuisancePredictions c = fit_nuisances(d, folds, SpecVariant::C);
    const NuisancePredictions m = fit_nuisances(d, folds, SpecVariant::MgA);
    double sse_c = 0.0, sse_m = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double truth =
            truncate_propensity(dgp::true_g_a(1, d.records[i].w1, cfg.alpha1));
        sse_c += (c.g_a[1][i] - truth) * (c.g_a[1][i] - truth);
        sse_m += (m.g_a[1][i] - truth) * (m.g_a[1][i] - truth);
    }
    const double rmse_c = std::sqrt(sse_c / d.size());
    const double rmse_m = std::sqrt(sse_m / d.size());
    CHECK(rmse_c < 0.02);
    CHECK(rmse_m > rmse_c);
}

TEST_CASE("every prediction comes from models trained on other folds") {
    // hold-out integrity: perturbing the outcomes of one fold's clusters must
    // not move that fold's outcome-regression predictions
    dgp::DgpConfig cfg;
    cfg.n_clusters = 20;
    Dataset d = dgp::generate_dataset(cfg);
    const FoldAssignment folds = assign_folds_checked(d, 5, 3);
    const NuisancePredictions before = fit_nuisances(d, folds, SpecVariant::C);

    Dataset tweaked = d;
    for (auto& r : tweaked.records) {
        if (folds.fold_of_cluster.at(r.cluster_id) == 2 && r.delta == 1) {
            r.y += 100.0;
        }
    }
    const NuisancePredictions after = fit_nuisances(tweaked, folds, SpecVariant::C);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (before.fold_of[i] == 2) {
            CHECK(before.q_y[0][i] == after.q_y[0][i]);
            CHECK(before.q_y[1][i] == after.q_y[1][i]);
        }
    }
}
