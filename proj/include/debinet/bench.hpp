#pragma once

#include "debias.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "ntk_lab.hpp"
#include "plm_core.hpp"
#include "rng.hpp"
#include "selection.hpp"
#include "synth_data.hpp"
#include "widenet.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace debinet {

enum class Scenario { table1, table2_high_high, table2_high_low, table2_low_high, table4, ntk_figure };

inline const char* scenario_name(Scenario s) {
    switch (s) {
    case Scenario::table1: return "table1";
    case Scenario::table2_high_high: return "table2_high_high";
    case Scenario::table2_high_low: return "table2_high_low";
    case Scenario::table2_low_high: return "table2_low_high";
    case Scenario::table4: return "table4";
    case Scenario::ntk_figure: return "ntk_figure";
    }
    return "?";
}

inline Scenario parse_scenario(const std::string& s) {
    for (Scenario c : {Scenario::table1, Scenario::table2_high_high, Scenario::table2_high_low, Scenario::table2_low_high,
                       Scenario::table4, Scenario::ntk_figure})
        if (s == scenario_name(c)) return c;
    throw Error(Errc::invalid_config, "unknown scenario '" + s + "'");
}

inline bool is_table2(Scenario s) {
    return s == Scenario::table2_high_high || s == Scenario::table2_high_low || s == Scenario::table2_low_high;
}

struct NtkFigureConfig {
    Index n = 100;
    Index width = 5000;
    double learning_rate = 0.01;
    int epochs = 2000;
    double rho = 0.9;
    double slack = 1.5;
    double lemma_c = 1.0;
    double lemma_delta = 0.1;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::table2_high_low;
    int replicates = 1;
    Index n = 0, p = 0, k = 0; // 0 keeps the scenario default
    std::vector<std::string> methods;
    std::uint64_t seed = 0;
    std::string output;
    double train_fraction = 0.5;
    int workers = 1;
    double level = 0.95;
    NnPlmConfig nn;
    LassoSelectorConfig selector;
    NwLearnerConfig nw;
    DmlConfig dml;
    DebiasedLassoOptions debiased;
    NtkFigureConfig ntk;
};

inline NnPlmConfig default_nn_config(Scenario s) {
    NnPlmConfig c;
    c.width = (s == Scenario::table1 || s == Scenario::table4) ? 10000 : 1000;
    c.input_scaling = is_table2(s) ? InputScaling::unit_rows : InputScaling::none;
    return c;
}

// Scenario defaults: sizes, method list and learner settings.
inline ExperimentConfig scenario_defaults(Scenario s) {
    ExperimentConfig c;
    c.scenario = s;
    c.nn = default_nn_config(s);
    switch (s) {
    case Scenario::table2_high_high: c.n = 1000; c.p = 3000; c.k = 300; break;
    case Scenario::table2_high_low: c.n = 1000; c.p = 3000; c.k = 10; break;
    case Scenario::table2_low_high: c.n = 1000; c.p = 500; c.k = 400; break;
    case Scenario::table1:
    case Scenario::table4: c.n = 2000; c.p = s == Scenario::table1 ? 11 : 6; break;
    case Scenario::ntk_figure: c.n = 100; c.p = 11; break;
    }
    if (is_table2(s)) c.methods = {"debinet", "ols-post", "debiased-lasso", "nw-post"};
    else if (s != Scenario::ntk_figure) c.methods = {"plm-nn", "plm-nw", "dml-lasso"};
    c.nw.grid = {};
    return c;
}

inline void validate(const ExperimentConfig& c) {
    require(c.replicates >= 1, Errc::invalid_config, "replicates must be >= 1");
    require(c.train_fraction > 0.0 && c.train_fraction < 1.0, Errc::invalid_config, "train_fraction must lie in (0, 1)");
    require(c.workers >= 1, Errc::invalid_config, "workers must be >= 1");
    require(c.n >= 2, Errc::invalid_config, "n must be >= 2");
    if (is_table2(c.scenario)) {
        require(c.p >= 1, Errc::invalid_config, "p must be >= 1");
        require(c.k >= 1 && c.k <= c.p, Errc::invalid_config, "need 1 <= k <= p");
    }
    static const std::vector<std::string> t2 = {"debinet", "ols-post", "debiased-lasso", "nw-post"};
    static const std::vector<std::string> t1 = {"plm-nn", "plm-nw", "dml-lasso", "dml-nw", "dml-nn"};
    const auto& allowed = is_table2(c.scenario) ? t2 : t1;
    for (const auto& m : c.methods)
        require(std::find(allowed.begin(), allowed.end(), m) != allowed.end(), Errc::invalid_config,
                "method '" + m + "' is not available for scenario " + scenario_name(c.scenario));
}

struct MetricsRow {
    int replicate = 0;
    std::string method;
    bool ok = true;
    std::string error;
    Index p_L = 0;
    double estimation_mse = 0.0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    std::optional<double> coverage;
    long covered = 0;
    long intervals = 0;
    double true_positive_rate = 0.0;
    double seconds = 0.0;
};

struct MethodSummary {
    std::string method;
    int n_ok = 0;
    int n_failed = 0;
    double est_mean = 0, est_sd = 0, train_mean = 0, train_sd = 0, test_mean = 0, test_sd = 0;
    double coverage_pooled = std::numeric_limits<double>::quiet_NaN();
    double coverage_mean = std::numeric_limits<double>::quiet_NaN();
    double coverage_sd = std::numeric_limits<double>::quiet_NaN();
    double seconds_mean = 0;
    double p_L_mean = 0;
};

struct ExperimentResult {
    std::vector<MetricsRow> rows; // sorted by (replicate, method order)
    std::vector<MethodSummary> summary;
};

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2) return {m, 0.0};
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, std::sqrt(s / static_cast<double>(v.size() - 1))};
}

inline std::vector<MethodSummary> summarize(const std::vector<MetricsRow>& rows, const std::vector<std::string>& methods) {
    std::vector<MethodSummary> out;
    for (const auto& name : methods) {
        MethodSummary s;
        s.method = name;
        std::vector<double> est, trn, tst, cov, sec, pl;
        long hit = 0, tot = 0;
        for (const auto& r : rows) {
            if (r.method != name) continue;
            if (!r.ok) {
                ++s.n_failed;
                continue;
            }
            ++s.n_ok;
            est.push_back(r.estimation_mse);
            trn.push_back(r.train_mse);
            tst.push_back(r.test_mse);
            sec.push_back(r.seconds);
            pl.push_back(static_cast<double>(r.p_L));
            if (r.coverage) {
                cov.push_back(*r.coverage);
                hit += r.covered;
                tot += r.intervals;
            }
        }
        std::tie(s.est_mean, s.est_sd) = mean_sd(est);
        std::tie(s.train_mean, s.train_sd) = mean_sd(trn);
        std::tie(s.test_mean, s.test_sd) = mean_sd(tst);
        s.seconds_mean = mean_sd(sec).first;
        s.p_L_mean = mean_sd(pl).first;
        if (!cov.empty()) {
            std::tie(s.coverage_mean, s.coverage_sd) = mean_sd(cov);
            if (tot > 0) s.coverage_pooled = static_cast<double>(hit) / static_cast<double>(tot);
        }
        out.push_back(s);
    }
    return out;
}

namespace detail {
struct TrainTestSplit {
    IndexList train, test;
};

inline TrainTestSplit split_rows(Index n, double train_fraction, std::uint64_t seed) {
    Rng rng(seed);
    auto perm = rng.permutation(n);
    Index nt = std::clamp<Index>(static_cast<Index>(std::llround(train_fraction * static_cast<double>(n))), 1, n - 1);
    TrainTestSplit s;
    s.train.assign(perm.begin(), perm.begin() + nt);
    s.test.assign(perm.begin() + nt, perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

inline double mse(const Vec& a, const Vec& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

inline void fill_intervals(MetricsRow& row, const Vec& lo, const Vec& hi, const Vec& truth) {
    row.intervals = truth.size();
    row.covered = 0;
    for (Index j = 0; j < truth.size(); ++j)
        if (lo(j) <= truth(j) && truth(j) <= hi(j)) ++row.covered;
    if (row.intervals > 0) row.coverage = static_cast<double>(row.covered) / static_cast<double>(row.intervals);
}

template <class F>
inline MetricsRow timed_row(int rep, const std::string& method, F&& body) {
    MetricsRow row;
    row.replicate = rep;
    row.method = method;
    auto t0 = std::chrono::steady_clock::now();
    try {
        body(row);
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

inline std::vector<MetricsRow> run_table2_replicate(const ExperimentConfig& cfg, int rep) {
    const std::uint64_t rs = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
    Dataset ds = gen_table2(cfg.n, cfg.p, cfg.k, rs);
    TrainTestSplit sp = split_rows(cfg.n, cfg.train_fraction, derive_seed(rs, 101));
    const Mat Xtr = take_rows(ds.X, sp.train), Xte = take_rows(ds.X, sp.test);
    const Vec ytr = take_rows(ds.y, sp.train), yte = take_rows(ds.y, sp.test);
    const Vec& beta = *ds.beta_true;

    std::optional<SelectionOutcome> sel;
    std::string sel_error;
    try {
        sel = lasso_select(Xtr, ytr, cfg.selector);
    } catch (const std::exception& e) {
        sel_error = e.what();
    }
    NnPlmConfig nn = cfg.nn;
    nn.init_seed = derive_seed(rs, 201);
    nn.train.seed = derive_seed(rs, 202);
    NwLearnerConfig nw = cfg.nw;
    nw.cv_seed = derive_seed(rs, 203);

    std::vector<MetricsRow> rows;
    for (const auto& method : cfg.methods) {
        rows.push_back(timed_row(rep, method, [&](MetricsRow& row) {
            if (!sel) throw Error(Errc::nothing_selected, "selection failed: " + sel_error);
            const IndexList& S = sel->fit.active_set;
            DebiasResult res;
            if (method == "debinet") {
                SplitDesign sd = partition_design(Xtr, S);
                res = detail::from_estimate(DebiasMethod::debinet, cfg.p, sd.S, plm_nn_fit(sd.D, sd.Z, ytr, nn), cfg.level);
            } else if (method == "ols-post") {
                res = ols_post(Xtr, ytr, S, cfg.level);
            } else if (method == "nw-post") {
                res = nw_post(Xtr, ytr, S, nw, cfg.level);
            } else {
                res = debiased_lasso(Xtr, ytr, sel->fit, cfg.debiased, cfg.level);
            }
            const Vec truth = beta(res.active_set);
            row.p_L = static_cast<Index>(res.active_set.size());
            row.estimation_mse = row.p_L > 0 ? mse(res.beta_hat, truth) : 0.0;
            row.train_mse = mse(res.predict(Xtr), ytr);
            row.test_mse = mse(res.predict(Xte), yte);
            fill_intervals(row, res.ci_low, res.ci_high, truth);
            long tp = 0;
            for (Index j : res.active_set)
                if (beta(j) != 0.0) ++tp;
            row.true_positive_rate = static_cast<double>(tp) / static_cast<double>(cfg.k);
        }));
    }
    return rows;
}

inline std::vector<MetricsRow> run_plm_replicate(const ExperimentConfig& cfg, int rep) {
    const std::uint64_t rs = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
    PlmData data = cfg.scenario == Scenario::table1 ? gen_table1(cfg.n, rs) : gen_complex(cfg.n, rs);
    TrainTestSplit sp = split_rows(cfg.n, cfg.train_fraction, derive_seed(rs, 101));
    const Mat Dtr = take_rows(data.D, sp.train), Dte = take_rows(data.D, sp.test);
    const Mat Ztr = take_rows(data.Z, sp.train), Zte = take_rows(data.Z, sp.test);
    const Vec ytr = take_rows(data.y, sp.train), yte = take_rows(data.y, sp.test);

    NnPlmConfig nn = cfg.nn;
    nn.init_seed = derive_seed(rs, 201);
    nn.train.seed = derive_seed(rs, 202);
    NwLearnerConfig nw = cfg.nw;
    nw.cv_seed = derive_seed(rs, 203);
    DmlConfig dml = cfg.dml;
    dml.seed = derive_seed(rs, 204);
    dml.nn = nn;
    dml.nw = nw;

    std::vector<MetricsRow> rows;
    for (const auto& method : cfg.methods) {
        rows.push_back(timed_row(rep, method, [&](MetricsRow& row) {
            PlmEstimate est;
            if (method == "plm-nn") est = plm_nn_fit(Dtr, Ztr, ytr, nn);
            else if (method == "plm-nw") est = plm_nw_fit_cv(Dtr, Ztr, ytr, nw);
            else {
                DmlConfig d = dml;
                d.learner = method == "dml-lasso" ? DmlLearner::lasso : method == "dml-nw" ? DmlLearner::nw : DmlLearner::widenet;
                est = dml_fit(Dtr, Ztr, ytr, d);
            }
            row.p_L = est.beta_hat.size();
            row.estimation_mse = mse(est.beta_hat, data.beta_true);
            row.train_mse = mse(plm_predict(est, Dtr, Ztr), ytr);
            row.test_mse = mse(plm_predict(est, Dte, Zte), yte);
            auto ci = confidence_intervals(est.beta_hat, est.cov_beta, cfg.level);
            fill_intervals(row, ci.first, ci.second, data.beta_true);
            row.true_positive_rate = 1.0;
        }));
    }
    return rows;
}
} // namespace detail

inline int workers_from_env(int fallback = 1) {
    if (const char* v = std::getenv("DEBINET_WORKERS")) {
        int w = std::atoi(v);
        if (w >= 1) return w;
    }
    return fallback;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    require(cfg.scenario != Scenario::ntk_figure, Errc::invalid_config, "use emit_convergence for ntk_figure");
    std::vector<std::vector<MetricsRow>> per_rep(static_cast<std::size_t>(cfg.replicates));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int r = next++; r < cfg.replicates; r = next++) {
            per_rep[static_cast<std::size_t>(r)] =
                is_table2(cfg.scenario) ? detail::run_table2_replicate(cfg, r) : detail::run_plm_replicate(cfg, r);
        }
    };
    const int nw = std::min(cfg.workers, cfg.replicates);
    if (nw <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    ExperimentResult res;
    for (auto& v : per_rep)
        for (auto& r : v) res.rows.push_back(std::move(r));
    res.summary = summarize(res.rows, cfg.methods);
    return res;
}

inline ExperimentResult compare_plms(ExperimentConfig cfg) {
    require(cfg.scenario == Scenario::table1 || cfg.scenario == Scenario::table4, Errc::invalid_config,
            "compare_plms runs the table1 or table4 scenario");
    if (cfg.methods.empty()) cfg.methods = {"plm-nn", "plm-nw", "dml-lasso"};
    return run_experiment(cfg);
}

// ---- convergence trace -----------------------------------------------------------------

struct ConvergenceResult {
    TrainTrace trace;
    RateReport rate;
    LazyReport lazy;
    double lambda0_emp = 0.0;
    double lambda0_inf = 0.0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> per_output_initial;
};

// Unit-norm Table-1 inputs (D and y are computed from the normalized rows), i.i.d.
// initialization, full-batch gradient descent with a frozen second layer.
inline ConvergenceResult emit_convergence(const NtkFigureConfig& c, std::uint64_t seed) {
    Rng rz(derive_seed(seed, 0));
    PlmData data = table1_from_inputs(normalize_rows(rz.normal_matrix(c.n, 10)), seed);
    const Mat M = stack_targets(data.y, data.D);
    WideNet net0 = init_network(10, c.width, 1, {}, derive_seed(seed, 5));
    TrainConfig tc;
    tc.optimizer = Optimizer::gd;
    tc.learning_rate = c.learning_rate;
    tc.max_epochs = c.epochs;
    tc.freeze_second_layer = true;
    ConvergenceResult out;
    out.lambda0_emp = least_eigenvalue(ntk_empirical(net0, data.Z));
    out.lambda0_inf = least_eigenvalue(ntk_infinite_block(data.Z));
    const Mat R0 = forward_batch(net0, data.Z) - M;
    for (Index s = 0; s < M.cols(); ++s) out.per_output_initial.push_back(0.5 * R0.col(s).squaredNorm());
    TrainResult tr = train(net0, data.Z, M, tc);
    out.trace = std::move(tr.trace);
    out.rate = verify_rate(out.trace, out.lambda0_emp, c.learning_rate, out.per_output_initial, c.rho, c.slack);
    out.lazy = lazy_check(out.trace, net0, data.Z, M, out.lambda0_emp, c.lemma_c, c.lemma_delta);
    out.initial_loss = out.trace.loss_per_epoch.front();
    out.final_loss = out.trace.loss_per_epoch.back();
    return out;
}

// ---- output ----------------------------------------------------------------------------

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string metrics_csv(const ExperimentResult& res) {
    std::ostringstream out;
    out << "replicate,method,status,p_L,estimation_mse,train_mse,test_mse,coverage,true_positive_rate\n";
    for (const auto& r : res.rows) {
        out << r.replicate << ',' << r.method << ',' << (r.ok ? "ok" : "failed") << ',' << r.p_L << ','
            << (r.ok ? fmt_double(r.estimation_mse) : "") << ',' << (r.ok ? fmt_double(r.train_mse) : "") << ','
            << (r.ok ? fmt_double(r.test_mse) : "") << ',' << (r.ok && r.coverage ? fmt_double(*r.coverage) : "") << ','
            << (r.ok ? fmt_double(r.true_positive_rate) : "") << '\n';
    }
    return out.str();
}

inline std::string timings_csv(const ExperimentResult& res) {
    std::ostringstream out;
    out << "replicate,method,seconds\n";
    for (const auto& r : res.rows) out << r.replicate << ',' << r.method << ',' << fmt_double(r.seconds) << '\n';
    return out.str();
}

inline std::string summary_csv(const ExperimentResult& res) {
    std::ostringstream out;
    out << "method,n_ok,n_failed,estimation_mse_mean,estimation_mse_sd,train_mse_mean,train_mse_sd,test_mse_mean,"
           "test_mse_sd,coverage_pooled,coverage_mean,coverage_sd,p_L_mean\n";
    for (const auto& s : res.summary)
        out << s.method << ',' << s.n_ok << ',' << s.n_failed << ',' << fmt_double(s.est_mean) << ','
            << fmt_double(s.est_sd) << ',' << fmt_double(s.train_mean) << ',' << fmt_double(s.train_sd) << ','
            << fmt_double(s.test_mean) << ',' << fmt_double(s.test_sd) << ',' << fmt_double(s.coverage_pooled) << ','
            << fmt_double(s.coverage_mean) << ',' << fmt_double(s.coverage_sd) << ',' << fmt_double(s.p_L_mean) << '\n';
    return out.str();
}

inline std::string convergence_csv(const ConvergenceResult& c) {
    std::ostringstream out;
    out << "epoch,loss,log_loss,drift\n";
    for (std::size_t e = 0; e < c.trace.loss_per_epoch.size(); ++e)
        out << e << ',' << fmt_double(c.trace.loss_per_epoch[e]) << ',' << fmt_double(std::log(c.trace.loss_per_epoch[e]))
            << ',' << fmt_double(c.trace.weight_drift_per_epoch[e]) << '\n';
    return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::missing_file, "cannot write " + path);
    f << text;
}

// ---- checks -------------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

inline const MethodSummary* find_summary(const ExperimentResult& r, const std::string& m) {
    for (const auto& s : r.summary)
        if (s.method == m) return &s;
    return nullptr;
}

inline std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Fraction of replicates (where both succeeded) with a's estimation MSE <= b's.
inline double fraction_not_worse(const ExperimentResult& r, const std::string& a, const std::string& b, int* count = nullptr) {
    std::map<int, double> ea, eb;
    for (const auto& row : r.rows) {
        if (!row.ok) continue;
        if (row.method == a) ea[row.replicate] = row.estimation_mse;
        if (row.method == b) eb[row.replicate] = row.estimation_mse;
    }
    int tot = 0, good = 0;
    for (const auto& [rep, v] : ea) {
        auto it = eb.find(rep);
        if (it == eb.end()) continue;
        ++tot;
        if (v <= it->second) ++good;
    }
    if (count) *count = tot;
    return tot ? static_cast<double>(good) / tot : std::numeric_limits<double>::quiet_NaN();
}

inline std::vector<CheckResult> low_sparsity_checks(const ExperimentResult& r) {
    std::vector<CheckResult> out;
    const MethodSummary* d = find_summary(r, "debinet");
    const MethodSummary* o = find_summary(r, "ols-post");
    if (!d || d->n_ok == 0) return {{"debinet ran", false, "no successful debinet replicates"}};
    out.push_back({"debinet mean estimation MSE <= 0.01", d->est_mean <= 0.01, "mean " + fmt_short(d->est_mean)});
    out.push_back({"debinet coverage in [0.88, 1.0]", d->coverage_pooled >= 0.88 && d->coverage_pooled <= 1.0,
                   "pooled coverage " + fmt_short(d->coverage_pooled)});
    if (o && o->n_ok > 0)
        out.push_back({"debinet test MSE <= 1.2 x ols-post test MSE", d->test_mean <= 1.2 * o->test_mean,
                       "debinet " + fmt_short(d->test_mean) + ", ols-post " + fmt_short(o->test_mean) + ", ratio " +
                           fmt_short(d->test_mean / o->test_mean)});
    return out;
}

inline std::vector<CheckResult> high_sparsity_checks(const ExperimentResult& r) {
    int cnt = 0;
    double f = fraction_not_worse(r, "debinet", "ols-post", &cnt);
    const MethodSummary* d = find_summary(r, "debinet");
    const MethodSummary* o = find_summary(r, "ols-post");
    std::string detail = "fraction " + fmt_short(f) + " over " + std::to_string(cnt) + " replicates";
    if (d && o) detail += "; mean MSE debinet " + fmt_short(d->est_mean) + ", ols-post " + fmt_short(o->est_mean);
    return {{"debinet estimation MSE <= ols-post in >= 70% of replicates", cnt > 0 && f >= 0.7, detail}};
}

inline std::vector<CheckResult> table1_checks(const ExperimentResult& r) {
    const MethodSummary* nn = find_summary(r, "plm-nn");
    const MethodSummary* nw = find_summary(r, "plm-nw");
    if (!nn || nn->n_ok == 0) return {{"plm-nn ran", false, "no successful plm-nn replicates"}};
    std::vector<CheckResult> out;
    out.push_back({"plm-nn mean estimation MSE <= 1e-3", nn->est_mean <= 1e-3, "mean " + fmt_short(nn->est_mean)});
    if (nw && nw->n_ok > 0)
        out.push_back({"plm-nn test MSE <= 1.3 x plm-nw test MSE", nn->test_mean <= 1.3 * nw->test_mean,
                       "plm-nn " + fmt_short(nn->test_mean) + ", plm-nw " + fmt_short(nw->test_mean) + ", ratio " +
                           fmt_short(nn->test_mean / nw->test_mean)});
    return out;
}

inline std::vector<CheckResult> table4_checks(const ExperimentResult& r) {
    std::vector<CheckResult> out;
    for (const auto& s : r.summary)
        out.push_back({s.method + " mean estimation MSE <= 1e-2", s.n_ok > 0 && s.est_mean <= 1e-2,
                       "mean " + fmt_short(s.est_mean) + " (" + std::to_string(s.n_failed) + " failed)"});
    return out;
}

inline std::vector<CheckResult> convergence_checks(const ConvergenceResult& c) {
    return {
        {"final loss <= 1e-5", c.final_loss <= 1e-5, "final " + fmt_short(c.final_loss) + " from " + fmt_short(c.initial_loss)},
        {"log-loss linear fit R^2 >= 0.95", c.rate.r2 >= 0.95,
         "R^2 " + fmt_short(c.rate.r2) + " over " + std::to_string(c.rate.fit_points) + " epochs"},
        {"rate bound holds at every epoch", c.rate.passed,
         std::to_string(c.rate.violations) + " violations, lambda0 " + fmt_short(c.lambda0_emp)},
        {"drift within R' at every epoch", c.lazy.bound_satisfied,
         "max drift " + fmt_short(c.lazy.max_drift) + ", R' " + fmt_short(c.lazy.R_prime)},
    };
}

inline std::vector<CheckResult> scenario_checks(const ExperimentConfig& cfg, const ExperimentResult& r) {
    switch (cfg.scenario) {
    case Scenario::table2_high_low: return low_sparsity_checks(r);
    case Scenario::table2_high_high:
    case Scenario::table2_low_high: return high_sparsity_checks(r);
    case Scenario::table1: return table1_checks(r);
    case Scenario::table4: return table4_checks(r);
    case Scenario::ntk_figure: break;
    }
    return {};
}

} // namespace debinet
