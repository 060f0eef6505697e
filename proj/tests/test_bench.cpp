#include <debinet/bench.hpp>
#include <debinet/config_json.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace debinet;

namespace {
ExperimentConfig small_table2(std::vector<std::string> methods, int reps) {
    ExperimentConfig c = scenario_defaults(Scenario::table2_high_low);
    c.n = 200;
    c.p = 400;
    c.k = 5;
    c.replicates = reps;
    c.methods = std::move(methods);
    c.seed = 11;
    c.nn.width = 100;
    c.nn.train.max_epochs = 50;
    c.nn.train.learning_rate = 1e-3;
    return c;
}
} // namespace

TEST(RunExperiment, SingleOlsPostReplicateIsFinite) {
    ExperimentResult r = run_experiment(small_table2({"ols-post"}, 1));
    ASSERT_EQ(r.rows.size(), 1u);
    const MetricsRow& row = r.rows[0];
    EXPECT_TRUE(row.ok) << row.error;
    EXPECT_TRUE(std::isfinite(row.estimation_mse) && row.estimation_mse >= 0.0);
    EXPECT_TRUE(std::isfinite(row.train_mse) && row.train_mse >= 0.0);
    EXPECT_TRUE(std::isfinite(row.test_mse) && row.test_mse >= 0.0);
    ASSERT_TRUE(row.coverage.has_value());
    EXPECT_GE(*row.coverage, 0.0);
    EXPECT_LE(*row.coverage, 1.0);
}

TEST(RunExperiment, RerunsAndWorkerCountsGiveIdenticalCsv) {
    ExperimentConfig c = small_table2({"debinet", "ols-post", "nw-post", "debiased-lasso"}, 3);
    std::string a = metrics_csv(run_experiment(c));
    std::string b = metrics_csv(run_experiment(c));
    c.workers = 3;
    std::string w = metrics_csv(run_experiment(c));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, w);
}

TEST(RunExperiment, AggregatesMatchRecomputation) {
    ExperimentResult r = run_experiment(small_table2({"ols-post", "nw-post"}, 4));
    for (const auto& s : r.summary) {
        std::vector<double> v;
        for (const auto& row : r.rows)
            if (row.method == s.method && row.ok) v.push_back(row.test_mse);
        ASSERT_EQ(static_cast<int>(v.size()), s.n_ok);
        double m = 0.0;
        for (double x : v) m += x / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        EXPECT_NEAR(s.test_mean, m, 1e-12);
        EXPECT_NEAR(s.test_sd, sd, 1e-12);
    }
}

TEST(RunExperiment, RowsSortedByReplicateThenMethod) {
    ExperimentConfig c = small_table2({"ols-post", "nw-post"}, 3);
    c.workers = 2;
    ExperimentResult r = run_experiment(c);
    ASSERT_EQ(r.rows.size(), 6u);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        EXPECT_EQ(r.rows[i].replicate, static_cast<int>(i / 2));
        EXPECT_EQ(r.rows[i].method, c.methods[i % 2]);
    }
}

TEST(RunExperiment, MethodFailuresAreIsolated) {
    ExperimentConfig c = small_table2({"ols-post", "nw-post"}, 2);
    c.selector.lambda = 1e9;
    c.selector.max_active_fraction = 0.0;
    ExperimentResult r = run_experiment(c);
    ASSERT_EQ(r.rows.size(), 4u);
    for (const auto& row : r.rows) {
        EXPECT_FALSE(row.ok);
        EXPECT_FALSE(row.error.empty());
    }
    EXPECT_EQ(r.summary[0].n_failed, 2);
    EXPECT_NE(metrics_csv(r).find("failed"), std::string::npos);
}

TEST(RunExperiment, InvalidConfigRejected) {
    ExperimentConfig c = small_table2({"plm-nn"}, 1);
    EXPECT_THROW(run_experiment(c), Error);
    c = small_table2({"ols-post"}, 0);
    EXPECT_THROW(run_experiment(c), Error);
    c = small_table2({"ols-post"}, 1);
    c.k = 500;
    EXPECT_THROW(run_experiment(c), Error);
}

TEST(ComparePlms, SharedDataAndDeterminism) {
    ExperimentConfig c = scenario_defaults(Scenario::table1);
    c.n = 300;
    c.replicates = 2;
    c.nn.width = 100;
    c.nn.train.max_epochs = 30;
    c.methods = {"plm-nn", "plm-nw", "dml-lasso"};
    ExperimentResult a = compare_plms(c), b = compare_plms(c);
    EXPECT_EQ(metrics_csv(a), metrics_csv(b));
    ASSERT_EQ(a.rows.size(), 6u);
    for (const auto& row : a.rows) EXPECT_TRUE(row.ok) << row.method << ": " << row.error;

    ExperimentConfig bad = scenario_defaults(Scenario::table2_high_low);
    EXPECT_THROW(compare_plms(bad), Error);
}

TEST(EmitConvergence, ZeroEpochsGiveSingleRow) {
    NtkFigureConfig c;
    c.n = 20;
    c.width = 200;
    c.epochs = 0;
    ConvergenceResult r = emit_convergence(c, 1);
    std::string csv = convergence_csv(r);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(EmitConvergence, ShortRunHasNegativeSlope) {
    NtkFigureConfig c;
    c.epochs = 200;
    ConvergenceResult r = emit_convergence(c, 0);
    EXPECT_LT(r.rate.slope, 0.0);
    EXPECT_GT(r.lambda0_emp, 0.0);
    EXPECT_LT(r.final_loss, r.initial_loss);
}

TEST(ConfigJson, ReadsOverridesOnTopOfDefaults) {
    Json j = Json::parse(R"({
        "scenario": "table2_high_low",
        "replicates": 3,
        "scale": {"n": 250, "p": 300},
        "methods": ["ols-post"],
        "seed": 9,
        "nn": {"width": 64, "train": {"optimizer": "sgd", "learning_rate": 0.5}},
        "selector": {"lambda_preset": "fig3_p500"}
    })");
    ExperimentConfig c = experiment_from_json(j);
    EXPECT_EQ(c.scenario, Scenario::table2_high_low);
    EXPECT_EQ(c.replicates, 3);
    EXPECT_EQ(c.n, 250);
    EXPECT_EQ(c.p, 300);
    EXPECT_EQ(c.k, 10);
    EXPECT_EQ(c.methods, (std::vector<std::string>{"ols-post"}));
    EXPECT_EQ(c.nn.width, 64);
    EXPECT_EQ(c.nn.train.optimizer, Optimizer::sgd);
    EXPECT_DOUBLE_EQ(c.nn.train.learning_rate, 0.5);
    EXPECT_DOUBLE_EQ(c.selector.lambda, 1.0);
    EXPECT_THROW(experiment_from_json(Json::parse(R"({"replicates": 2})")), Error);
    EXPECT_THROW(experiment_from_json(Json::parse(R"({"scenario": "nope"})")), Error);
}

TEST(ConfigJson, TrainConfigRoundTrip) {
    TrainConfig t;
    t.optimizer = Optimizer::nesterov;
    t.learning_rate = 0.003;
    t.max_epochs = 17;
    t.loss = {LossKind::huber, 0.5};
    t.early_stop = EarlyStop{0.2, 7, 1e-3};
    t.freeze_second_layer = true;
    t.seed = 42;
    TrainConfig u;
    read_train_config(write_train_config(t), u);
    EXPECT_EQ(u.optimizer, t.optimizer);
    EXPECT_EQ(u.learning_rate, t.learning_rate);
    EXPECT_EQ(u.max_epochs, t.max_epochs);
    EXPECT_EQ(u.loss.kind, LossKind::huber);
    EXPECT_EQ(u.loss.delta, 0.5);
    ASSERT_TRUE(u.early_stop.has_value());
    EXPECT_EQ(u.early_stop->patience, 7);
    EXPECT_TRUE(u.freeze_second_layer);
    EXPECT_EQ(u.seed, 42u);
}
