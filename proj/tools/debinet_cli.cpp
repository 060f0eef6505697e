#include <debinet/config_json.hpp>
#include <debinet/debinet.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace debinet;

namespace {

struct DataFlags {
    std::string csv;
    std::string target = "y";
    std::string regime;
    long n = 1000, p = 100, k = 10;
    std::uint64_t seed = 0;
    std::vector<std::string> d_columns;

    void add(CLI::App* app, bool with_split) {
        app->add_option("--data", csv, "CSV file with a header row");
        app->add_option("--target", target, "response column name")->capture_default_str();
        app->add_option("--regime", regime, "synthetic regime instead of --data: table1, table2, complex");
        app->add_option("--n", n, "rows for synthetic data")->capture_default_str();
        app->add_option("--p", p, "columns (table2)")->capture_default_str();
        app->add_option("--k", k, "sparsity (table2)")->capture_default_str();
        app->add_option("--seed", seed, "generator seed")->capture_default_str();
        if (with_split) app->add_option("--d-columns", d_columns, "CSV columns forming D (the rest form Z)")->delimiter(',');
    }

    Regime parsed_regime() const {
        if (regime == "table1") return Regime::table1;
        if (regime == "table2") return Regime::table2;
        if (regime == "complex") return Regime::complex;
        throw Error(Errc::invalid_parameter, "unknown regime '" + regime + "'");
    }

    Dataset dataset() const {
        if (!csv.empty()) return load_csv(csv, target);
        require(!regime.empty(), Errc::invalid_parameter, "give --data or --regime");
        return generate({parsed_regime(), n, p, k, seed, 1.0});
    }

    PlmData plm_data() const {
        if (csv.empty()) {
            Regime r = parsed_regime();
            require(r != Regime::table2, Errc::invalid_parameter, "table2 has no fixed D/Z split; use --data with --d-columns");
            return r == Regime::table1 ? gen_table1(n, seed) : gen_complex(n, seed);
        }
        Dataset ds = load_csv(csv, target);
        IndexList S;
        for (const auto& name : d_columns) {
            auto it = std::find(ds.column_names.begin(), ds.column_names.end(), name);
            if (it == ds.column_names.end()) throw Error(Errc::missing_column, "no column '" + name + "'");
            S.push_back(static_cast<Index>(it - ds.column_names.begin()));
        }
        require(!S.empty(), Errc::invalid_parameter, "--d-columns is required with --data");
        SplitDesign sd = partition_design(ds.X, S);
        PlmData out;
        out.D = sd.D;
        out.Z = sd.Z;
        out.y = ds.y;
        return out;
    }
};

Json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Json estimate_json(const PlmEstimate& est, double level) {
    auto ci = confidence_intervals(est.beta_hat, est.cov_beta, level);
    Json j = {{"beta_hat", vec_json(est.beta_hat)},
              {"standard_errors", vec_json(est.cov_beta.diagonal().cwiseMax(0.0).cwiseSqrt())},
              {"ci_low", vec_json(ci.first)},
              {"ci_high", vec_json(ci.second)},
              {"level", level},
              {"sigma2_hat", est.sigma2_hat},
              {"learner", est.nuisance.learner_tag}};
    if (!est.fold_betas.empty()) {
        Json fb = Json::array();
        for (const auto& b : est.fold_betas) fb.push_back(vec_json(b));
        j["fold_betas"] = fb;
    }
    if (!est.nuisance.bandwidths.empty()) j["bandwidths"] = est.nuisance.bandwidths;
    if (est.nuisance.trace) j["best_epoch"] = est.nuisance.trace->best_epoch;
    return j;
}

void write_residuals(const std::string& path, const PlmEstimate& est) {
    std::ostringstream out;
    out << "Y_resid";
    for (Index j = 0; j < est.X_resid.cols(); ++j) out << ",X_resid" << j;
    out << '\n';
    for (Index i = 0; i < est.Y_resid.size(); ++i) {
        out << fmt_double(est.Y_resid(i));
        for (Index j = 0; j < est.X_resid.cols(); ++j) out << ',' << fmt_double(est.X_resid(i, j));
        out << '\n';
    }
    write_text(path, out.str());
}

void emit(const Json& j, const std::string& path) {
    if (path.empty()) std::cout << j.dump(2) << '\n';
    else write_text(path, j.dump(2) + "\n");
}

Json checks_json(const std::vector<CheckResult>& checks, bool& all_ok) {
    Json arr = Json::array();
    for (const auto& c : checks) {
        all_ok = all_ok && c.passed;
        arr.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    }
    return arr;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DebiNet: partially linear models with wide-network nuisances, baselines and benchmarks"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset as CSV");
    DataFlags gen_flags;
    std::string gen_out;
    double gen_noise = 1.0;
    gen->add_option("--regime", gen_flags.regime, "table1, table2 or complex")->required();
    gen->add_option("--n", gen_flags.n)->capture_default_str();
    gen->add_option("--p", gen_flags.p)->capture_default_str();
    gen->add_option("--k", gen_flags.k)->capture_default_str();
    gen->add_option("--seed", gen_flags.seed)->capture_default_str();
    gen->add_option("--noise-sd", gen_noise)->capture_default_str();
    gen->add_option("--out", gen_out, "output CSV path")->required();

    // lasso
    auto* las = app.add_subcommand("lasso", "fit the Lasso by coordinate descent");
    DataFlags las_flags;
    las_flags.add(las, false);
    double las_lambda = -1, las_c = 2.0;
    std::string las_preset, las_out;
    LassoOptions las_opt;
    las->add_option("--lambda", las_lambda, "penalty (objective 1/2||X theta - y||^2 + lambda||theta||_1)");
    las->add_option("--lambda-preset", las_preset, "named penalty: fig3_p3000, fig3_p500");
    las->add_option("--universal-c", las_c, "multiplier of sqrt(2 n log p) when no lambda is given")->capture_default_str();
    las->add_option("--tol", las_opt.tol)->capture_default_str();
    las->add_option("--kkt-tol", las_opt.kkt_tol)->capture_default_str();
    las->add_option("--max-sweeps", las_opt.max_sweeps)->capture_default_str();
    las->add_option("--out", las_out, "JSON output path (stdout if omitted)");

    // plm-nn / plm-nw / dml
    auto* pnn = app.add_subcommand("plm-nn", "partially linear model with a wide-network joint nuisance");
    auto* pnw = app.add_subcommand("plm-nw", "partially linear model with Nadaraya-Watson nuisances");
    auto* dml = app.add_subcommand("dml", "cross-fitted partially linear model");
    DataFlags plm_flags;
    std::string plm_out, plm_resid, plm_config;
    double level = 0.95;
    NnPlmConfig nn_cfg = default_nn_config(Scenario::table1);
    long epochs = -1;
    double lr = -1;
    std::string input_scaling = "none";
    for (auto* sc : {pnn, pnw, dml}) {
        plm_flags.add(sc, true);
        sc->add_option("--out", plm_out, "JSON output path");
        sc->add_option("--residuals", plm_resid, "CSV path for the residualized design and response");
        sc->add_option("--level", level)->capture_default_str();
    }
    for (auto* sc : {pnn, dml}) {
        sc->add_option("--width", nn_cfg.width)->capture_default_str();
        sc->add_option("--epochs", epochs, "maximum training epochs");
        sc->add_option("--lr", lr, "learning rate");
        sc->add_option("--input-scaling", input_scaling, "none or unit_rows")->capture_default_str();
        sc->add_option("--nn-config", plm_config, "JSON file with network settings");
    }
    double h_y = -1, h_D = -1;
    int cv_folds = 5;
    for (auto* sc : {pnw, dml}) {
        sc->add_option("--h-y", h_y, "response bandwidth (cross-validated if omitted)");
        sc->add_option("--h-d", h_D, "D bandwidth (cross-validated if omitted)");
        sc->add_option("--cv-folds", cv_folds)->capture_default_str();
    }
    std::string dml_learner = "lasso";
    int dml_K = 5;
    dml->add_option("--learner", dml_learner, "lasso, nw, widenet or mean")->capture_default_str();
    dml->add_option("--folds", dml_K)->capture_default_str();

    // debias
    auto* deb = app.add_subcommand("debias", "post-selection estimation and confidence intervals");
    DataFlags deb_flags;
    deb_flags.add(deb, false);
    std::string deb_method = "debinet", deb_out;
    double deb_lambda = -1, deb_c = 2.0, deb_node = -1;
    deb->add_option("--method", deb_method, "debinet, ols-post, debiased-lasso or nw-post")->capture_default_str();
    deb->add_option("--lambda", deb_lambda, "selection penalty");
    deb->add_option("--universal-c", deb_c)->capture_default_str();
    deb->add_option("--lambda-node", deb_node, "nodewise penalty (per-sample scale)");
    deb->add_option("--level", level)->capture_default_str();
    deb->add_option("--out", deb_out, "JSON output path");
    NnPlmConfig deb_nn = default_nn_config(Scenario::table2_high_low);
    deb->add_option("--width", deb_nn.width)->capture_default_str();

    // ntk
    auto* ntk = app.add_subcommand("ntk", "NTK concentration sweep on unit-norm inputs");
    long ntk_n = 50, ntk_pl = 1, ntk_dim = 10;
    std::vector<long> ntk_widths = {256, 1024, 4096};
    int ntk_seeds = 5;
    std::uint64_t ntk_seed = 0;
    std::string ntk_out;
    ntk->add_option("--n", ntk_n)->capture_default_str();
    ntk->add_option("--dim", ntk_dim, "input dimension")->capture_default_str();
    ntk->add_option("--p-l", ntk_pl, "selected-feature count (outputs = 1 + p_L)")->capture_default_str();
    ntk->add_option("--widths", ntk_widths)->delimiter(',')->capture_default_str();
    ntk->add_option("--seeds", ntk_seeds)->capture_default_str();
    ntk->add_option("--seed", ntk_seed)->capture_default_str();
    ntk->add_option("--out", ntk_out, "CSV output path");

    // bench
    auto* bench = app.add_subcommand("bench", "experiment runner");
    bench->require_subcommand(1);
    auto* brun = bench->add_subcommand("run", "run a configured experiment");
    std::string cfg_path, out_prefix;
    bool do_check = false;
    brun->add_option("--config", cfg_path, "experiment JSON")->required()->check(CLI::ExistingFile);
    brun->add_option("--output", out_prefix, "output path prefix (overrides the config)");
    brun->add_flag("--check", do_check, "evaluate the scenario's acceptance checks; exit 1 on failure");
    auto* bconv = bench->add_subcommand("convergence", "loss trace of full-batch gd on unit-norm Table-1 inputs");
    NtkFigureConfig conv;
    std::uint64_t conv_seed = 0;
    std::string conv_out;
    bool conv_check = false;
    bconv->add_option("--n", conv.n)->capture_default_str();
    bconv->add_option("--width", conv.width)->capture_default_str();
    bconv->add_option("--lr", conv.learning_rate)->capture_default_str();
    bconv->add_option("--epochs", conv.epochs)->capture_default_str();
    bconv->add_option("--rho", conv.rho)->capture_default_str();
    bconv->add_option("--slack", conv.slack)->capture_default_str();
    bconv->add_option("--seed", conv_seed)->capture_default_str();
    bconv->add_option("--output", conv_out, "output path prefix");
    bconv->add_flag("--check", conv_check);
    auto* bcmp = bench->add_subcommand("compare-plms", "Table-1-style comparison of PLM estimators");
    std::string cmp_scenario = "table1";
    int cmp_reps = 10;
    long cmp_n = 2000;
    std::uint64_t cmp_seed = 0;
    bool cmp_check = false;
    bcmp->add_option("--scenario", cmp_scenario, "table1 or table4")->capture_default_str();
    bcmp->add_option("--replicates", cmp_reps)->capture_default_str();
    bcmp->add_option("--n", cmp_n)->capture_default_str();
    bcmp->add_option("--seed", cmp_seed)->capture_default_str();
    bcmp->add_option("--output", out_prefix, "output path prefix");
    bcmp->add_flag("--check", cmp_check);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            GenSpec spec{gen_flags.parsed_regime(), gen_flags.n, gen_flags.p, gen_flags.k, gen_flags.seed, gen_noise};
            write_csv(gen_out, generate(spec));
            return 0;
        }
        if (*las) {
            Dataset ds = las_flags.dataset();
            double lam = las_lambda;
            if (!las_preset.empty()) lam = lasso_preset(las_preset);
            if (lam <= 0) lam = universal_lambda(ds.X.rows(), ds.X.cols(), 1.0, las_c);
            LassoFit fit = lasso_fit(ds.X, ds.y, lam, las_opt);
            Json j = {{"lambda", lam}, {"n_sweeps", fit.n_sweeps}, {"kkt_residual", fit.kkt_residual},
                      {"active_set", fit.active_set}};
            Json coef = Json::array();
            for (Index a : fit.active_set) coef.push_back(fit.theta(a));
            j["active_coefficients"] = coef;
            emit(j, las_out);
            return 0;
        }
        if (*pnn || *pnw || *dml) {
            PlmData data = plm_flags.plm_data();
            if (!plm_config.empty()) {
                std::ifstream f(plm_config);
                read_nn_config(Json::parse(f), nn_cfg);
            }
            if (epochs >= 0) nn_cfg.train.max_epochs = static_cast<int>(epochs);
            if (lr > 0) nn_cfg.train.learning_rate = lr;
            nn_cfg.input_scaling = input_scaling == "unit_rows" ? InputScaling::unit_rows : InputScaling::none;
            NwLearnerConfig nwc;
            nwc.h_y = h_y;
            nwc.h_D = h_D;
            nwc.cv_folds = cv_folds;
            PlmEstimate est;
            if (*pnn) est = plm_nn_fit(data.D, data.Z, data.y, nn_cfg);
            else if (*pnw) est = plm_nw_fit_cv(data.D, data.Z, data.y, nwc);
            else {
                DmlConfig dc;
                dc.learner = parse_dml_learner(dml_learner);
                dc.K = dml_K;
                dc.seed = plm_flags.seed;
                dc.nn = nn_cfg;
                dc.nw = nwc;
                est = dml_fit(data.D, data.Z, data.y, dc);
            }
            if (!plm_resid.empty()) write_residuals(plm_resid, est);
            emit(estimate_json(est, level), plm_out);
            return 0;
        }
        if (*deb) {
            Dataset ds = deb_flags.dataset();
            LassoSelectorConfig sel;
            sel.lambda = deb_lambda;
            sel.universal_c = deb_c;
            DebiasMethod m = parse_method(deb_method);
            SelectionOutcome so = lasso_select(ds.X, ds.y, sel);
            DebiasResult r;
            switch (m) {
            case DebiasMethod::debinet: r = debinet_fit(ds.X, ds.y, make_lasso_selector(sel), deb_nn, level); break;
            case DebiasMethod::ols_post: r = ols_post(ds.X, ds.y, so.fit.active_set, level); break;
            case DebiasMethod::nw_post: r = nw_post(ds.X, ds.y, so.fit.active_set, {}, level); break;
            case DebiasMethod::debiased_lasso: {
                DebiasedLassoOptions o;
                o.lambda_node = deb_node;
                r = debiased_lasso(ds.X, ds.y, so.fit, o, level);
                break;
            }
            }
            Json j = {{"method", method_name(r.method)}, {"active_set", r.active_set}, {"beta_hat", vec_json(r.beta_hat)},
                      {"standard_errors", vec_json(r.se)}, {"ci_low", vec_json(r.ci_low)}, {"ci_high", vec_json(r.ci_high)},
                      {"level", level}, {"lambda", so.fit.lambda}};
            if (ds.beta_true) {
                Vec t = (*ds.beta_true)(r.active_set);
                if (t.size() > 0) j["estimation_mse"] = (r.beta_hat - t).squaredNorm() / static_cast<double>(t.size());
            }
            emit(j, deb_out);
            return 0;
        }
        if (*ntk) {
            Rng rz(ntk_seed);
            Mat Z = normalize_rows(rz.normal_matrix(ntk_n, ntk_dim));
            std::vector<Index> widths(ntk_widths.begin(), ntk_widths.end());
            auto rows = concentration_sweep(Z, widths, ntk_seeds, ntk_pl, derive_seed(ntk_seed, 1));
            std::ostringstream out;
            out << "width,mean_frob_gap,mean_offdiag_norm,min_lambda_emp\n";
            for (const auto& r : rows)
                out << r.width << ',' << fmt_double(r.mean_frob_gap) << ',' << fmt_double(r.mean_offdiag) << ','
                    << fmt_double(r.min_lambda_emp) << '\n';
            if (ntk_out.empty()) std::cout << out.str();
            else write_text(ntk_out, out.str());
            return 0;
        }
        if (*brun) {
            std::ifstream f(cfg_path);
            ExperimentConfig cfg = experiment_from_json(Json::parse(f));
            cfg.workers = workers_from_env(cfg.workers);
            if (!out_prefix.empty()) cfg.output = out_prefix;
            bool ok = true;
            Json summary;
            if (cfg.scenario == Scenario::ntk_figure) {
                ConvergenceResult c = emit_convergence(cfg.ntk, cfg.seed);
                if (!cfg.output.empty()) write_text(cfg.output + "_convergence.csv", convergence_csv(c));
                summary = {{"scenario", "ntk_figure"}, {"lambda0_emp", c.lambda0_emp}, {"slope", c.rate.slope},
                           {"slope_ratio", c.rate.slope_ratio}, {"r2", c.rate.r2}, {"final_loss", c.final_loss}};
                if (do_check) summary["checks"] = checks_json(convergence_checks(c), ok);
            } else {
                ExperimentResult res = run_experiment(cfg);
                if (!cfg.output.empty()) {
                    write_text(cfg.output + "_metrics.csv", metrics_csv(res));
                    write_text(cfg.output + "_timings.csv", timings_csv(res));
                    write_text(cfg.output + "_summary.csv", summary_csv(res));
                }
                summary = summary_to_json(cfg, res);
                if (do_check) summary["checks"] = checks_json(scenario_checks(cfg, res), ok);
            }
            if (!cfg.output.empty()) write_text(cfg.output + "_summary.json", summary.dump(2) + "\n");
            std::cout << summary.dump(2) << '\n';
            return ok ? 0 : 1;
        }
        if (*bconv) {
            ConvergenceResult c = emit_convergence(conv, conv_seed);
            if (!conv_out.empty()) write_text(conv_out + "_convergence.csv", convergence_csv(c));
            Json j = {{"lambda0_emp", c.lambda0_emp}, {"lambda0_inf", c.lambda0_inf}, {"slope", c.rate.slope},
                      {"slope_ratio", c.rate.slope_ratio}, {"r2", c.rate.r2}, {"rate_bound_violations", c.rate.violations},
                      {"initial_loss", c.initial_loss}, {"final_loss", c.final_loss}, {"max_drift", c.lazy.max_drift},
                      {"R_prime", c.lazy.R_prime}, {"R_lemma", c.lazy.R_lemma}};
            bool ok = true;
            if (conv_check) j["checks"] = checks_json(convergence_checks(c), ok);
            std::cout << j.dump(2) << '\n';
            return ok ? 0 : 1;
        }
        if (*bcmp) {
            ExperimentConfig cfg = scenario_defaults(parse_scenario(cmp_scenario));
            cfg.replicates = cmp_reps;
            cfg.n = cmp_n;
            cfg.seed = cmp_seed;
            cfg.workers = workers_from_env(1);
            cfg.output = out_prefix;
            ExperimentResult res = compare_plms(cfg);
            if (!cfg.output.empty()) {
                write_text(cfg.output + "_metrics.csv", metrics_csv(res));
                write_text(cfg.output + "_summary.csv", summary_csv(res));
            }
            std::cout << summary_csv(res);
            bool ok = true;
            if (cmp_check) checks_json(scenario_checks(cfg, res), ok);
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
