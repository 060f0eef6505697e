#pragma once

#include "error.hpp"
#include "linalg.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace debinet {

enum class Activation { relu, leaky_relu, tanh };

struct ActivationSpec {
    Activation kind = Activation::relu;
    double alpha = 0.01; // leaky-ReLU slope
};

inline const char* activation_name(Activation a) {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    }
    return "?";
}

inline Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "leaky_relu" || s == "leaky-relu") return Activation::leaky_relu;
    if (s == "tanh") return Activation::tanh;
    throw Error(Errc::invalid_parameter, "unknown activation '" + s + "'");
}

// Two-layer network F(z) = (1/sqrt m) sum_r A_r sigma(w_r' z); W is p_N x m, A is m x (1 + p_L).
struct WideNet {
    Mat W;
    Mat A;
    ActivationSpec activation;
    bool train_second_layer = true;

    Index width() const { return W.cols(); }
    Index input_dim() const { return W.rows(); }
    Index output_dim() const { return A.cols(); }
};

inline WideNet init_network(Index p_N, Index m, Index p_L, ActivationSpec act, std::uint64_t seed) {
    require(m >= 1, Errc::invalid_size, "width m must be >= 1");
    require(p_N >= 1, Errc::invalid_size, "input dimension must be >= 1");
    require(p_L >= 0, Errc::invalid_size, "p_L must be >= 0");
    WideNet net;
    net.activation = act;
    Rng rw(derive_seed(seed, 0));
    net.W = rw.normal_matrix(p_N, m);
    Rng ra(derive_seed(seed, 1));
    net.A.resize(m, 1 + p_L);
    for (Index r = 0; r < m; ++r)
        for (Index s = 0; s < 1 + p_L; ++s) net.A(r, s) = ra.sign();
    return net;
}

// Paired initialization: neurons m/2.. copy the first half of W with negated signs in A,
// so F(0) is identically zero while each half keeps the i.i.d. law.
inline WideNet init_network_symmetric(Index p_N, Index m, Index p_L, ActivationSpec act, std::uint64_t seed) {
    require(m >= 2 && m % 2 == 0, Errc::invalid_size, "symmetric initialization needs an even width");
    WideNet half = init_network(p_N, m / 2, p_L, act, seed);
    WideNet net;
    net.activation = act;
    net.W.resize(p_N, m);
    net.W << half.W, half.W;
    net.A.resize(m, 1 + p_L);
    net.A << half.A, -half.A;
    return net;
}

namespace detail {
inline void activate(const Mat& P, const ActivationSpec& act, Mat& S, Mat* dS) {
    switch (act.kind) {
    case Activation::relu:
        S = P.cwiseMax(0.0);
        if (dS) *dS = (P.array() >= 0.0).cast<double>().matrix();
        break;
    case Activation::leaky_relu: {
        const double a = act.alpha;
        S = P.unaryExpr([a](double v) { return v >= 0.0 ? v : a * v; });
        if (dS) *dS = P.unaryExpr([a](double v) { return v >= 0.0 ? 1.0 : a; });
        break;
    }
    case Activation::tanh:
        S = P.array().tanh().matrix();
        if (dS) *dS = (1.0 - S.array().square()).matrix();
        break;
    }
}
} // namespace detail

inline Mat forward_batch(const WideNet& net, const Mat& Z) {
    require(Z.cols() == net.input_dim(), Errc::shape_mismatch,
            "input has " + std::to_string(Z.cols()) + " columns, network expects " + std::to_string(net.input_dim()));
    Mat S;
    detail::activate(Z * net.W, net.activation, S, nullptr);
    return (S * net.A) * (1.0 / std::sqrt(static_cast<double>(net.width())));
}

inline Vec forward(const WideNet& net, const Vec& z) {
    require(z.size() == net.input_dim(), Errc::shape_mismatch, "input length differs from network input dimension");
    return forward_batch(net, z.transpose()).row(0).transpose();
}

enum class LossKind { mse, huber };

struct LossSpec {
    LossKind kind = LossKind::mse;
    double delta = 1.0; // Huber threshold
};

namespace detail {
inline double loss_value(const Mat& R, const LossSpec& ls) {
    if (ls.kind == LossKind::mse) return 0.5 * R.squaredNorm();
    const double d = ls.delta;
    return R.unaryExpr([d](double r) {
                double a = std::abs(r);
                return a <= d ? 0.5 * r * r : d * (a - 0.5 * d);
            })
        .sum();
}

inline Mat loss_derivative(const Mat& R, const LossSpec& ls) {
    if (ls.kind == LossKind::mse) return R;
    const double d = ls.delta;
    return R.unaryExpr([d](double r) { return std::clamp(r, -d, d); });
}

struct Evaluation {
    double loss = 0.0;
    Mat dW;
    Mat dA;
};

inline Evaluation evaluate(const WideNet& net, const Mat& Z, const Mat& M, const LossSpec& ls, bool grad_W,
                           bool grad_A) {
    require(Z.rows() == M.rows(), Errc::shape_mismatch, "Z and M row counts differ");
    require(Z.cols() == net.input_dim(), Errc::shape_mismatch, "Z columns differ from network input dimension");
    require(M.cols() == net.output_dim(), Errc::shape_mismatch, "M columns differ from network output dimension");
    const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(net.width()));
    Mat P = Z * net.W;
    Mat S, dS;
    detail::activate(P, net.activation, S, grad_W ? &dS : nullptr);
    Mat R = (S * net.A) * inv_sqrt_m - M;
    Evaluation ev;
    ev.loss = loss_value(R, ls);
    if (!grad_W && !grad_A) return ev;
    Mat Psi = loss_derivative(R, ls);
    if (grad_A) ev.dA = (S.transpose() * Psi) * inv_sqrt_m;
    if (grad_W) {
        Mat G = ((Psi * net.A.transpose()) * inv_sqrt_m).cwiseProduct(dS);
        ev.dW = Z.transpose() * G;
    }
    return ev;
}
} // namespace detail

inline double loss(const WideNet& net, const Mat& Z, const Mat& M, const LossSpec& ls = {}) {
    return detail::evaluate(net, Z, M, ls, false, false).loss;
}

// dL/dW (p_N x m). The ReLU derivative at a zero pre-activation is taken as 1.
inline Mat gradient(const WideNet& net, const Mat& Z, const Mat& M, const LossSpec& ls = {}) {
    return detail::evaluate(net, Z, M, ls, true, false).dW;
}

inline Mat gradient_second_layer(const WideNet& net, const Mat& Z, const Mat& M, const LossSpec& ls = {}) {
    return detail::evaluate(net, Z, M, ls, false, true).dA;
}

// ---- training ---------------------------------------------------------------------

enum class Optimizer { gd, sgd, adam, nesterov };

inline const char* optimizer_name(Optimizer o) {
    switch (o) {
    case Optimizer::gd: return "gd";
    case Optimizer::sgd: return "sgd";
    case Optimizer::adam: return "adam";
    case Optimizer::nesterov: return "nesterov";
    }
    return "?";
}

inline Optimizer parse_optimizer(const std::string& s) {
    if (s == "gd") return Optimizer::gd;
    if (s == "sgd") return Optimizer::sgd;
    if (s == "adam") return Optimizer::adam;
    if (s == "nesterov") return Optimizer::nesterov;
    throw Error(Errc::invalid_parameter, "unknown optimizer '" + s + "'");
}

struct EarlyStop {
    double val_fraction = 0.1;
    int patience = 20;
    double min_rel_improve = 1e-4;
};

struct TrainConfig {
    Optimizer optimizer = Optimizer::gd;
    double learning_rate = 0.01;
    int max_epochs = 100;
    Index batch_size = 0; // 0 means full batch; sgd defaults to 32 when left at 0
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double momentum = 0.9;
    LossSpec loss;
    std::optional<EarlyStop> early_stop;
    bool freeze_second_layer = false;
    std::uint64_t seed = 0;

    void validate() const {
        require(learning_rate > 0.0 && std::isfinite(learning_rate), Errc::invalid_parameter, "learning rate must be > 0");
        require(max_epochs >= 0, Errc::invalid_parameter, "max_epochs must be >= 0");
        require(batch_size >= 0, Errc::invalid_parameter, "batch size must be >= 0");
        if (early_stop) {
            require(early_stop->val_fraction > 0.0 && early_stop->val_fraction <= 0.5, Errc::invalid_parameter,
                    "val_fraction must lie in (0, 0.5]");
            require(early_stop->patience >= 1, Errc::invalid_parameter, "patience must be >= 1");
        }
        if (loss.kind == LossKind::huber)
            require(loss.delta > 0.0, Errc::invalid_parameter, "Huber delta must be > 0");
    }
};

struct TrainTrace {
    std::vector<double> loss_per_epoch;         // training-row loss at the start of each epoch
    std::vector<double> weight_drift_per_epoch; // max_r ||w_r(e) - w_r(0)||
    std::vector<double> val_loss_per_epoch;     // empty without early stopping
    int best_epoch = 0;
    int epochs_run = 0;
    bool stopped_early = false;
};

struct TrainResult {
    WideNet net;
    TrainTrace trace;
};

namespace detail {
struct AdamState {
    Mat m, v;
};

inline void adam_step(Mat& P, const Mat& g, AdamState& st, const TrainConfig& cfg, long t) {
    if (st.m.size() == 0) {
        st.m = Mat::Zero(P.rows(), P.cols());
        st.v = Mat::Zero(P.rows(), P.cols());
    }
    st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * g;
    st.v = cfg.beta2 * st.v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    const double lr = cfg.learning_rate, eps = cfg.adam_eps;
    P.array() -= lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + eps);
}

inline void nesterov_step(Mat& P, const Mat& g, Mat& vel, const TrainConfig& cfg) {
    if (vel.size() == 0) vel = Mat::Zero(P.rows(), P.cols());
    vel = cfg.momentum * vel + g;
    P -= cfg.learning_rate * (g + cfg.momentum * vel);
}
} // namespace detail

// Trains on (Z, M). With early stopping, a seeded val_fraction of rows is held out and the
// returned network is the one with the best validation loss.
inline TrainResult train(WideNet net, const Mat& Z, const Mat& M, const TrainConfig& cfg) {
    cfg.validate();
    require(Z.rows() == M.rows() && Z.rows() >= 1, Errc::shape_mismatch, "Z and M must have equal, positive row counts");
    require(Z.cols() == net.input_dim() && M.cols() == net.output_dim(), Errc::shape_mismatch,
            "data shape differs from network shape");

    const Index n = Z.rows();
    IndexList train_rows, val_rows;
    if (cfg.early_stop) {
        Rng split(derive_seed(cfg.seed, 0));
        auto perm = split.permutation(n);
        Index n_val = std::max<Index>(1, static_cast<Index>(std::llround(cfg.early_stop->val_fraction * static_cast<double>(n))));
        require(n_val < n, Errc::invalid_size, "too few rows for a validation split");
        val_rows.assign(perm.begin(), perm.begin() + n_val);
        train_rows.assign(perm.begin() + n_val, perm.end());
        std::sort(val_rows.begin(), val_rows.end());
        std::sort(train_rows.begin(), train_rows.end());
    }
    const Mat Zt = cfg.early_stop ? take_rows(Z, train_rows) : Z;
    const Mat Mt = cfg.early_stop ? take_rows(M, train_rows) : M;
    Mat Zv, Mv;
    if (cfg.early_stop) {
        Zv = take_rows(Z, val_rows);
        Mv = take_rows(M, val_rows);
    }

    const bool update_A = net.train_second_layer && !cfg.freeze_second_layer;
    Index batch = cfg.batch_size;
    if (cfg.optimizer == Optimizer::sgd && batch == 0) batch = 32;
    const bool full_batch = batch == 0 || batch >= Zt.rows();

    Rng shuffler(derive_seed(cfg.seed, 1));
    const Mat W0 = net.W;
    WideNet best = net;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    detail::AdamState adW, adA;
    Mat velW, velA;
    long steps = 0;

    TrainTrace tr;
    auto apply = [&](const detail::Evaluation& ev) {
        ++steps;
        switch (cfg.optimizer) {
        case Optimizer::gd:
        case Optimizer::sgd:
            net.W -= cfg.learning_rate * ev.dW;
            if (update_A) net.A -= cfg.learning_rate * ev.dA;
            break;
        case Optimizer::adam:
            detail::adam_step(net.W, ev.dW, adW, cfg, steps);
            if (update_A) detail::adam_step(net.A, ev.dA, adA, cfg, steps);
            break;
        case Optimizer::nesterov:
            detail::nesterov_step(net.W, ev.dW, velW, cfg);
            if (update_A) detail::nesterov_step(net.A, ev.dA, velA, cfg);
            break;
        }
    };

    for (int e = 0;; ++e) {
        const bool last = e >= cfg.max_epochs;
        detail::Evaluation ev = detail::evaluate(net, Zt, Mt, cfg.loss, !last && full_batch, !last && full_batch && update_A);
        if (!std::isfinite(ev.loss)) throw DivergenceError(e);
        tr.loss_per_epoch.push_back(ev.loss);
        tr.weight_drift_per_epoch.push_back(e == 0 ? 0.0 : (net.W - W0).colwise().norm().maxCoeff());
        tr.epochs_run = e;

        if (cfg.early_stop) {
            double vl = loss(net, Zv, Mv, cfg.loss);
            if (!std::isfinite(vl)) throw DivergenceError(e);
            tr.val_loss_per_epoch.push_back(vl);
            if (e == 0 || vl < best_val * (1.0 - cfg.early_stop->min_rel_improve)) {
                best_val = vl;
                best = net;
                tr.best_epoch = e;
                since_best = 0;
            } else if (++since_best >= cfg.early_stop->patience) {
                tr.stopped_early = true;
                break;
            }
        } else {
            tr.best_epoch = e;
        }
        if (last) break;

        if (full_batch) {
            apply(ev);
        } else {
            auto perm = shuffler.permutation(Zt.rows());
            for (Index start = 0; start < Zt.rows(); start += batch) {
                Index stop = std::min<Index>(Zt.rows(), start + batch);
                IndexList idx(perm.begin() + start, perm.begin() + stop);
                apply(detail::evaluate(net, take_rows(Zt, idx), take_rows(Mt, idx), cfg.loss, true, update_A));
            }
        }
    }
    return {cfg.early_stop ? best : net, tr};
}

} // namespace debinet
