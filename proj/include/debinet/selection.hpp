#pragma once

#include "error.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace debinet {

struct LassoOptions {
    double tol = 1e-8;       // max coefficient change in a sweep
    double kkt_tol = 1e-6;   // KKT residual required before convergence is declared
    int max_sweeps = 10000;
    bool record_objective = true;
};

struct LassoFit {
    Vec theta;
    double lambda = 0.0;
    IndexList active_set;
    int n_sweeps = 0;
    double kkt_residual = 0.0;
    std::vector<double> objective_trace;
};

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

inline double lasso_objective(const Mat& X, const Vec& y, const Vec& theta, double lambda) {
    return 0.5 * (X * theta - y).squaredNorm() + lambda * theta.lpNorm<1>();
}

// Largest violation of the subgradient conditions given g = X'(y - X theta).
inline double kkt_from_gradient(const Vec& g, const Vec& theta, double lambda, Index skip = -1) {
    double worst = 0.0;
    for (Index j = 0; j < g.size(); ++j) {
        if (j == skip) continue;
        double v = theta(j) != 0.0 ? std::abs(g(j) - lambda * (theta(j) > 0 ? 1.0 : -1.0))
                                   : std::max(0.0, std::abs(g(j)) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

inline double kkt_residual(const Mat& X, const Vec& y, const Vec& theta, double lambda) {
    return kkt_from_gradient(X.transpose() * (y - X * theta), theta, lambda);
}

inline double lambda_max(const Mat& X, const Vec& y) { return (X.transpose() * y).cwiseAbs().maxCoeff(); }

// sigma * sqrt(2 n log p), scaled by `c`; matches the un-normalized 1/2 squared-error objective.
inline double universal_lambda(Index n, Index p, double sigma = 1.0, double c = 1.0) {
    return c * sigma * std::sqrt(2.0 * static_cast<double>(n) * std::log(static_cast<double>(std::max<Index>(p, 2))));
}

inline const std::map<std::string, double>& lasso_presets() {
    static const std::map<std::string, double> presets = {{"fig3_p3000", 2.0}, {"fig3_p500", 1.0}};
    return presets;
}

inline double lasso_preset(const std::string& name) {
    auto it = lasso_presets().find(name);
    if (it == lasso_presets().end()) throw Error(Errc::invalid_parameter, "unknown lambda preset '" + name + "'");
    return it->second;
}

namespace detail {
inline IndexList support(const Vec& theta) {
    IndexList s;
    for (Index j = 0; j < theta.size(); ++j)
        if (theta(j) != 0.0) s.push_back(j);
    return s;
}
} // namespace detail

// Cyclic coordinate descent on 1/2 ||X theta - y||^2 + lambda ||theta||_1, no intercept.
inline LassoFit lasso_fit(const Mat& X, const Vec& y, double lambda, const LassoOptions& opt = {},
                          const Vec* warm_start = nullptr) {
    require(X.rows() == y.size(), Errc::shape_mismatch, "X rows differ from length of y");
    require(lambda >= 0.0 && std::isfinite(lambda), Errc::invalid_parameter, "lambda must be finite and >= 0");
    require(opt.tol > 0.0 && opt.max_sweeps >= 1, Errc::invalid_parameter, "tol must be > 0, max_sweeps >= 1");
    const Index p = X.cols();
    const Vec col_sq = X.colwise().squaredNorm().transpose();

    LassoFit fit;
    fit.lambda = lambda;
    fit.theta = Vec::Zero(p);
    if (warm_start) {
        require(warm_start->size() == p, Errc::shape_mismatch, "warm start length differs from p");
        fit.theta = *warm_start;
    }
    Vec r = y - X * fit.theta;
    if (opt.record_objective) fit.objective_trace.push_back(0.5 * r.squaredNorm() + lambda * fit.theta.lpNorm<1>());
    if (!warm_start && p > 0 && lambda >= lambda_max(X, y)) {
        fit.kkt_residual = kkt_from_gradient(X.transpose() * y, fit.theta, lambda);
        return fit;
    }

    bool full = true;
    IndexList active;
    double kkt = std::numeric_limits<double>::infinity();
    while (fit.n_sweeps < opt.max_sweeps) {
        ++fit.n_sweeps;
        double max_change = 0.0;
        auto update = [&](Index j) {
            if (col_sq(j) <= 0.0) return;
            const double old = fit.theta(j);
            const double z = X.col(j).dot(r) + col_sq(j) * old;
            const double nw = soft_threshold(z, lambda) / col_sq(j);
            if (nw != old) {
                r.noalias() -= (nw - old) * X.col(j);
                fit.theta(j) = nw;
                max_change = std::max(max_change, std::abs(nw - old));
            }
        };
        if (full) {
            for (Index j = 0; j < p; ++j) update(j);
            r = y - X * fit.theta;
        } else {
            for (Index j : active) update(j);
        }
        if (opt.record_objective) fit.objective_trace.push_back(0.5 * r.squaredNorm() + lambda * fit.theta.lpNorm<1>());

        if (max_change < opt.tol) {
            if (full) {
                kkt = kkt_from_gradient(X.transpose() * r, fit.theta, lambda);
                if (kkt <= opt.kkt_tol) break;
            }
            full = true;
        } else {
            active = detail::support(fit.theta);
            full = active.empty();
        }
    }
    fit.kkt_residual = kkt_from_gradient(X.transpose() * (y - X * fit.theta), fit.theta, lambda);
    if (!(fit.kkt_residual <= opt.kkt_tol))
        throw ConvergenceError(fit.kkt_residual, -1,
                               "lasso did not converge in " + std::to_string(opt.max_sweeps) +
                                   " sweeps, KKT residual " + std::to_string(fit.kkt_residual));
    fit.active_set = detail::support(fit.theta);
    return fit;
}

// Same objective expressed through the Gram matrix G = X'X and c = X'y; coordinate `skip`
// is held at zero (used by nodewise regressions, where c is a column of G).
inline LassoFit lasso_fit_gram(const Mat& G, const Vec& c, double lambda, Index skip = -1,
                               const LassoOptions& opt = {}) {
    require(G.rows() == G.cols() && G.rows() == c.size(), Errc::shape_mismatch, "Gram shape mismatch");
    require(lambda >= 0.0 && std::isfinite(lambda), Errc::invalid_parameter, "lambda must be finite and >= 0");
    const Index p = G.rows();
    LassoFit fit;
    fit.lambda = lambda;
    fit.theta = Vec::Zero(p);
    Vec g = c;
    bool full = true;
    IndexList active;
    while (fit.n_sweeps < opt.max_sweeps) {
        ++fit.n_sweeps;
        double max_change = 0.0;
        auto update = [&](Index j) {
            if (j == skip || G(j, j) <= 0.0) return;
            const double old = fit.theta(j);
            const double nw = soft_threshold(g(j) + G(j, j) * old, lambda) / G(j, j);
            if (nw != old) {
                g.noalias() -= (nw - old) * G.col(j);
                fit.theta(j) = nw;
                max_change = std::max(max_change, std::abs(nw - old));
            }
        };
        if (full) {
            for (Index j = 0; j < p; ++j) update(j);
            g = c - G * fit.theta;
        } else {
            for (Index j : active) update(j);
        }
        if (max_change < opt.tol) {
            if (full && kkt_from_gradient(g, fit.theta, lambda, skip) <= opt.kkt_tol) break;
            full = true;
        } else {
            active = detail::support(fit.theta);
            full = active.empty();
        }
    }
    g = c - G * fit.theta;
    fit.kkt_residual = kkt_from_gradient(g, fit.theta, lambda, skip);
    if (!(fit.kkt_residual <= opt.kkt_tol))
        throw ConvergenceError(fit.kkt_residual, static_cast<long>(skip),
                               "lasso (gram) did not converge, KKT residual " + std::to_string(fit.kkt_residual));
    fit.active_set = detail::support(fit.theta);
    return fit;
}

// ---- partition --------------------------------------------------------------

struct SplitDesign {
    Mat D;
    Mat Z;
    IndexList S;
    IndexList S_complement;
    Index p_L = 0;
    Index p_N = 0;
};

inline SplitDesign partition_design(const Mat& X, IndexList S) {
    const Index n = X.rows(), p = X.cols();
    std::sort(S.begin(), S.end());
    S.erase(std::unique(S.begin(), S.end()), S.end());
    for (Index j : S) require(j >= 0 && j < p, Errc::invalid_parameter, "active index out of range");
    if (S.empty()) throw Error(Errc::nothing_selected, "selection returned an empty active set");
    if (static_cast<Index>(S.size()) >= n)
        throw Error(Errc::ols_infeasible,
                    "active set size " + std::to_string(S.size()) + " >= n = " + std::to_string(n) + "; raise lambda");
    SplitDesign sd;
    sd.S = S;
    sd.S_complement = complement(S, p);
    sd.D = take_cols(X, sd.S);
    sd.Z = take_cols(X, sd.S_complement);
    sd.p_L = static_cast<Index>(sd.S.size());
    sd.p_N = static_cast<Index>(sd.S_complement.size());
    return sd;
}

inline SplitDesign partition_design(const Mat& X, const LassoFit& fit) { return partition_design(X, fit.active_set); }

inline Mat reassemble(const SplitDesign& sd) {
    Mat X(sd.D.rows(), sd.p_L + sd.p_N);
    for (Index a = 0; a < sd.p_L; ++a) X.col(sd.S[static_cast<std::size_t>(a)]) = sd.D.col(a);
    for (Index b = 0; b < sd.p_N; ++b) X.col(sd.S_complement[static_cast<std::size_t>(b)]) = sd.Z.col(b);
    return X;
}

// ---- selectors ----------------------------------------------------------------

using Selector = std::function<IndexList(const Mat&, const Vec&)>;

struct LassoSelectorConfig {
    double lambda = -1.0;             // <= 0: universal lambda times `universal_c`
    double universal_c = 2.0;
    double max_active_fraction = 0.5; // of n; 0 disables the adjustment
    double growth = 1.25;
    int max_adjust = 60;
    LassoOptions options;
};

struct SelectionOutcome {
    LassoFit fit;
    int adjustments = 0;
};

// Lasso at the configured lambda, multiplying lambda by `growth` while the active set is
// larger than max_active_fraction * n, and dividing while it is empty.
inline SelectionOutcome lasso_select(const Mat& X, const Vec& y, const LassoSelectorConfig& cfg) {
    double lambda = cfg.lambda > 0.0 ? cfg.lambda : universal_lambda(X.rows(), X.cols(), 1.0, cfg.universal_c);
    SelectionOutcome out;
    out.fit = lasso_fit(X, y, lambda, cfg.options);
    if (cfg.max_active_fraction <= 0.0) return out;
    const double cap = cfg.max_active_fraction * static_cast<double>(X.rows());
    int dir = 0;
    while (out.adjustments < cfg.max_adjust) {
        const double s = static_cast<double>(out.fit.active_set.size());
        int want = s > cap ? 1 : (s == 0 ? -1 : 0);
        if (want == 0 || (dir != 0 && want != dir)) break;
        dir = want;
        lambda = want > 0 ? lambda * cfg.growth : lambda / cfg.growth;
        out.fit = lasso_fit(X, y, lambda, cfg.options, &out.fit.theta);
        ++out.adjustments;
    }
    return out;
}

inline Selector make_lasso_selector(const LassoSelectorConfig& cfg) {
    return [cfg](const Mat& X, const Vec& y) { return lasso_select(X, y, cfg).fit.active_set; };
}

} // namespace debinet
