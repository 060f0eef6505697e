#pragma once

#include "bench.hpp"

#include <json.hpp>
#include <string>

namespace debinet {

using Json = nlohmann::json;

inline void read_train_config(const Json& j, TrainConfig& t) {
    if (j.contains("optimizer")) t.optimizer = parse_optimizer(j["optimizer"].get<std::string>());
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.max_epochs = j.value("max_epochs", t.max_epochs);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.beta1 = j.value("beta1", t.beta1);
    t.beta2 = j.value("beta2", t.beta2);
    t.adam_eps = j.value("adam_eps", t.adam_eps);
    t.momentum = j.value("momentum", t.momentum);
    t.freeze_second_layer = j.value("freeze_second_layer", t.freeze_second_layer);
    t.seed = j.value("seed", t.seed);
    if (j.contains("loss")) {
        std::string l = j["loss"].get<std::string>();
        if (l == "mse") t.loss.kind = LossKind::mse;
        else if (l == "huber") t.loss.kind = LossKind::huber;
        else throw Error(Errc::invalid_config, "unknown loss '" + l + "'");
    }
    t.loss.delta = j.value("huber_delta", t.loss.delta);
    if (j.contains("early_stop")) {
        if (j["early_stop"].is_null() || (j["early_stop"].is_boolean() && !j["early_stop"].get<bool>())) {
            t.early_stop.reset();
        } else {
            EarlyStop es = t.early_stop.value_or(EarlyStop{});
            const Json& e = j["early_stop"];
            if (e.is_object()) {
                es.val_fraction = e.value("val_fraction", es.val_fraction);
                es.patience = e.value("patience", es.patience);
                es.min_rel_improve = e.value("min_rel_improve", es.min_rel_improve);
            }
            t.early_stop = es;
        }
    }
}

inline Json write_train_config(const TrainConfig& t) {
    Json j = {{"optimizer", optimizer_name(t.optimizer)},
              {"learning_rate", t.learning_rate},
              {"max_epochs", t.max_epochs},
              {"batch_size", t.batch_size},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"adam_eps", t.adam_eps},
              {"momentum", t.momentum},
              {"freeze_second_layer", t.freeze_second_layer},
              {"seed", t.seed},
              {"loss", t.loss.kind == LossKind::mse ? "mse" : "huber"},
              {"huber_delta", t.loss.delta}};
    if (t.early_stop)
        j["early_stop"] = {{"val_fraction", t.early_stop->val_fraction},
                           {"patience", t.early_stop->patience},
                           {"min_rel_improve", t.early_stop->min_rel_improve}};
    else
        j["early_stop"] = false;
    return j;
}

inline void read_nn_config(const Json& j, NnPlmConfig& c) {
    c.width = j.value("width", c.width);
    if (j.contains("activation")) c.activation.kind = parse_activation(j["activation"].get<std::string>());
    c.activation.alpha = j.value("leaky_alpha", c.activation.alpha);
    c.symmetric_init = j.value("symmetric_init", c.symmetric_init);
    c.standardize_targets = j.value("standardize_targets", c.standardize_targets);
    if (j.contains("input_scaling")) {
        std::string s = j["input_scaling"].get<std::string>();
        if (s == "none") c.input_scaling = InputScaling::none;
        else if (s == "unit_rows") c.input_scaling = InputScaling::unit_rows;
        else throw Error(Errc::invalid_config, "unknown input_scaling '" + s + "'");
    }
    c.init_seed = j.value("init_seed", c.init_seed);
    if (j.contains("train")) read_train_config(j["train"], c.train);
}

inline Json write_nn_config(const NnPlmConfig& c) {
    return {{"width", c.width},
            {"activation", activation_name(c.activation.kind)},
            {"leaky_alpha", c.activation.alpha},
            {"symmetric_init", c.symmetric_init},
            {"standardize_targets", c.standardize_targets},
            {"input_scaling", c.input_scaling == InputScaling::none ? "none" : "unit_rows"},
            {"init_seed", c.init_seed},
            {"train", write_train_config(c.train)}};
}

inline void read_selector(const Json& j, LassoSelectorConfig& s) {
    if (j.contains("lambda_preset")) s.lambda = lasso_preset(j["lambda_preset"].get<std::string>());
    s.lambda = j.value("lambda", s.lambda);
    s.universal_c = j.value("universal_c", s.universal_c);
    s.max_active_fraction = j.value("max_active_fraction", s.max_active_fraction);
    s.growth = j.value("growth", s.growth);
    s.options.tol = j.value("tol", s.options.tol);
    s.options.kkt_tol = j.value("kkt_tol", s.options.kkt_tol);
    s.options.max_sweeps = j.value("max_sweeps", s.options.max_sweeps);
}

inline void read_nw(const Json& j, NwLearnerConfig& c) {
    c.h_y = j.value("h_y", c.h_y);
    c.h_D = j.value("h_D", c.h_D);
    if (j.contains("grid")) c.grid = j["grid"].get<std::vector<double>>();
    c.cv_folds = j.value("cv_folds", c.cv_folds);
}

// Reads an experiment config; unspecified fields keep the scenario defaults.
inline ExperimentConfig experiment_from_json(const Json& j) {
    require(j.contains("scenario"), Errc::invalid_config, "config needs a 'scenario' field");
    ExperimentConfig c = scenario_defaults(parse_scenario(j["scenario"].get<std::string>()));
    c.replicates = j.value("replicates", c.replicates);
    if (j.contains("scale")) {
        const Json& s = j["scale"];
        c.n = s.value("n", c.n);
        c.p = s.value("p", c.p);
        c.k = s.value("k", c.k);
    }
    c.n = j.value("n", c.n);
    c.p = j.value("p", c.p);
    c.k = j.value("k", c.k);
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    c.seed = j.value("seed", c.seed);
    c.output = j.value("output", c.output);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.workers = j.value("workers", c.workers);
    c.level = j.value("level", c.level);
    if (j.contains("nn")) read_nn_config(j["nn"], c.nn);
    if (j.contains("selector")) read_selector(j["selector"], c.selector);
    if (j.contains("nw")) read_nw(j["nw"], c.nw);
    if (j.contains("dml")) {
        const Json& d = j["dml"];
        c.dml.K = d.value("K", c.dml.K);
        c.dml.lasso.lambda = d.value("lasso_lambda", c.dml.lasso.lambda);
        c.dml.lasso.cv_folds = d.value("lasso_cv_folds", c.dml.lasso.cv_folds);
    }
    if (j.contains("debiased")) c.debiased.lambda_node = j["debiased"].value("lambda_node", c.debiased.lambda_node);
    if (j.contains("ntk")) {
        const Json& t = j["ntk"];
        c.ntk.n = t.value("n", c.ntk.n);
        c.ntk.width = t.value("width", c.ntk.width);
        c.ntk.learning_rate = t.value("learning_rate", c.ntk.learning_rate);
        c.ntk.epochs = t.value("epochs", c.ntk.epochs);
        c.ntk.rho = t.value("rho", c.ntk.rho);
        c.ntk.slack = t.value("slack", c.ntk.slack);
    }
    return c;
}

inline Json summary_to_json(const ExperimentConfig& cfg, const ExperimentResult& r) {
    Json j;
    j["scenario"] = scenario_name(cfg.scenario);
    j["replicates"] = cfg.replicates;
    j["n"] = cfg.n;
    j["p"] = cfg.p;
    j["k"] = cfg.k;
    j["seed"] = cfg.seed;
    auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
    for (const auto& s : r.summary)
        j["methods"][s.method] = {{"n_ok", s.n_ok},
                                  {"n_failed", s.n_failed},
                                  {"estimation_mse", {{"mean", num(s.est_mean)}, {"sd", num(s.est_sd)}}},
                                  {"train_mse", {{"mean", num(s.train_mean)}, {"sd", num(s.train_sd)}}},
                                  {"test_mse", {{"mean", num(s.test_mean)}, {"sd", num(s.test_sd)}}},
                                  {"coverage_pooled", num(s.coverage_pooled)},
                                  {"coverage_mean", num(s.coverage_mean)},
                                  {"p_L_mean", num(s.p_L_mean)}};
    return j;
}

} // namespace debinet
