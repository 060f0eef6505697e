#pragma once

#include "error.hpp"
#include "linalg.hpp"
#include "plm_core.hpp"
#include "selection.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace debinet {

// ---- normal distribution ---------------------------------------------------------------

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Acklam's rational approximation followed by one Halley step against erfc.
inline double normal_quantile(double p) {
    require(p > 0.0 && p < 1.0, Errc::invalid_parameter, "quantile probability must lie in (0, 1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double e = normal_cdf(x) - p;
    double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

// ---- results ------------------------------------------------------------------------------

enum class DebiasMethod { debinet, ols_post, debiased_lasso, nw_post };

inline const char* method_name(DebiasMethod m) {
    switch (m) {
    case DebiasMethod::debinet: return "debinet";
    case DebiasMethod::ols_post: return "ols-post";
    case DebiasMethod::debiased_lasso: return "debiased-lasso";
    case DebiasMethod::nw_post: return "nw-post";
    }
    return "?";
}

inline DebiasMethod parse_method(const std::string& s) {
    if (s == "debinet") return DebiasMethod::debinet;
    if (s == "ols-post" || s == "ols_post") return DebiasMethod::ols_post;
    if (s == "debiased-lasso" || s == "debiased_lasso") return DebiasMethod::debiased_lasso;
    if (s == "nw-post" || s == "nw_post") return DebiasMethod::nw_post;
    throw Error(Errc::invalid_parameter, "unknown method '" + s + "'");
}

struct DebiasResult {
    DebiasMethod method = DebiasMethod::debinet;
    Vec theta_full;      // length p
    Vec beta_hat;        // on the active set
    Vec se;              // on the active set
    Vec ci_low, ci_high; // on the active set
    IndexList active_set;
    double level = 0.95;
    std::optional<PlmEstimate> estimate; // partialling-out methods
    Vec se_full;                         // debiased Lasso: every coordinate

    Vec predict(const Mat& X_new) const {
        if (estimate) {
            IndexList Sc = complement(active_set, X_new.cols());
            return plm_predict(*estimate, take_cols(X_new, active_set), take_cols(X_new, Sc));
        }
        return X_new * theta_full;
    }
};

inline std::pair<Vec, Vec> confidence_intervals(const Vec& beta_hat, const Mat& cov_beta, double level) {
    if (!(level > 0.0 && level < 1.0)) throw Error(Errc::invalid_level, "level must lie in (0, 1)");
    require(cov_beta.rows() == beta_hat.size() && cov_beta.cols() == beta_hat.size(), Errc::shape_mismatch,
            "covariance shape differs from coefficient length");
    const double z = normal_quantile(0.5 * (1.0 + level));
    Vec half = cov_beta.diagonal().cwiseMax(0.0).cwiseSqrt() * z;
    return {beta_hat - half, beta_hat + half};
}

namespace detail {
inline DebiasResult from_estimate(DebiasMethod method, Index p, const IndexList& S, PlmEstimate est, double level) {
    DebiasResult r;
    r.method = method;
    r.level = level;
    r.active_set = S;
    r.beta_hat = est.beta_hat;
    r.se = est.cov_beta.diagonal().cwiseMax(0.0).cwiseSqrt();
    auto ci = confidence_intervals(est.beta_hat, est.cov_beta, level);
    r.ci_low = ci.first;
    r.ci_high = ci.second;
    r.theta_full = Vec::Zero(p);
    for (std::size_t a = 0; a < S.size(); ++a) r.theta_full(S[a]) = est.beta_hat(static_cast<Index>(a));
    r.estimate = std::move(est);
    return r;
}
} // namespace detail

inline DebiasResult debinet_fit(const Mat& X, const Vec& y, const Selector& selector, const NnPlmConfig& nn_cfg = {},
                                double level = 0.95) {
    require(X.rows() == y.size(), Errc::shape_mismatch, "X rows differ from length of y");
    SplitDesign sd = partition_design(X, selector(X, y));
    return detail::from_estimate(DebiasMethod::debinet, X.cols(), sd.S, plm_nn_fit(sd.D, sd.Z, y, nn_cfg), level);
}

inline DebiasResult debinet_fit(const Mat& X, const Vec& y, const LassoSelectorConfig& sel, const NnPlmConfig& nn_cfg = {},
                                double level = 0.95) {
    return debinet_fit(X, y, make_lasso_selector(sel), nn_cfg, level);
}

// Intercept-free OLS on the selected columns.
inline DebiasResult ols_post(const Mat& X, const Vec& y, const IndexList& S, double level = 0.95) {
    require(X.rows() == y.size(), Errc::shape_mismatch, "X rows differ from length of y");
    SplitDesign sd = partition_design(X, S);
    PlmEstimate est;
    OlsResult o = residual_ols(sd.D, y);
    est.beta_hat = o.beta;
    est.cov_beta = o.cov;
    est.sigma2_hat = o.sigma2;
    est.condition = o.condition;
    est.X_resid = sd.D;
    est.Y_resid = y;
    est.nuisance = zero_nuisance(1 + sd.p_L);
    return detail::from_estimate(DebiasMethod::ols_post, X.cols(), sd.S, std::move(est), level);
}

inline DebiasResult nw_post(const Mat& X, const Vec& y, const IndexList& S, const NwLearnerConfig& bw = {},
                            double level = 0.95) {
    require(X.rows() == y.size(), Errc::shape_mismatch, "X rows differ from length of y");
    SplitDesign sd = partition_design(X, S);
    return detail::from_estimate(DebiasMethod::nw_post, X.cols(), sd.S, plm_nw_fit_cv(sd.D, sd.Z, y, bw), level);
}

struct DebiasedLassoOptions {
    double lambda_node = -1.0; // per-sample scale; <= 0 uses sqrt(2 log p / n)
    LassoOptions node_options;
};

// One-step correction theta + Theta X'(y - X theta)/n with Theta from nodewise Lasso fits.
// Nodewise penalty for column j: lambda_node * sqrt(n) * ||X_j|| in the 1/2 squared-error scale.
inline DebiasResult debiased_lasso(const Mat& X, const Vec& y, const LassoFit& fit, const DebiasedLassoOptions& opt = {},
                                   double level = 0.95) {
    require(X.rows() == y.size(), Errc::shape_mismatch, "X rows differ from length of y");
    require(fit.theta.size() == X.cols(), Errc::shape_mismatch, "Lasso fit length differs from p");
    if (!(level > 0.0 && level < 1.0)) throw Error(Errc::invalid_level, "level must lie in (0, 1)");
    const Index n = X.rows(), p = X.cols();
    const double dn = static_cast<double>(n);
    const double lam_node =
        opt.lambda_node > 0.0 ? opt.lambda_node : std::sqrt(2.0 * std::log(static_cast<double>(std::max<Index>(p, 2))) / dn);
    const Mat G = X.transpose() * X;
    Mat Theta = Mat::Zero(p, p);
    std::vector<IndexList> supports(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) {
        const double lj = lam_node * std::sqrt(dn) * std::sqrt(G(j, j));
        LassoFit g;
        try {
            g = lasso_fit_gram(G, G.col(j), lj, j, opt.node_options);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(e.kkt_residual(), static_cast<long>(j),
                                   "nodewise Lasso for column " + std::to_string(j) + " did not converge");
        }
        const Vec& gam = g.theta;
        // ||x_j - X gamma||^2 = G_jj - 2 gamma'G_j + gamma'G gamma over the support
        double quad = 0.0, cross = 0.0;
        for (Index a : g.active_set) {
            cross += gam(a) * G(a, j);
            for (Index b : g.active_set) quad += gam(a) * gam(b) * G(a, b);
        }
        const double rss = G(j, j) - 2.0 * cross + quad;
        const double tau2 = rss / dn + (lj / dn) * gam.lpNorm<1>();
        if (!(tau2 > 0.0)) throw Error(Errc::singular_design, "nodewise tau^2 vanished for column " + std::to_string(j));
        Theta(j, j) = 1.0 / tau2;
        IndexList sup = g.active_set;
        for (Index a : g.active_set) Theta(j, a) = -gam(a) / tau2;
        sup.push_back(j);
        supports[static_cast<std::size_t>(j)] = std::move(sup);
    }
    const Vec resid = y - X * fit.theta;
    const Vec corr = Theta * (X.transpose() * resid) / dn;
    DebiasResult r;
    r.method = DebiasMethod::debiased_lasso;
    r.level = level;
    r.theta_full = fit.theta + corr;
    const double df = static_cast<double>(n - static_cast<Index>(fit.active_set.size()));
    const double sigma2 = resid.squaredNorm() / (df > 0.0 ? df : dn);
    r.se_full.resize(p);
    for (Index j = 0; j < p; ++j) {
        double v = 0.0;
        for (Index a : supports[static_cast<std::size_t>(j)])
            for (Index b : supports[static_cast<std::size_t>(j)]) v += Theta(j, a) * Theta(j, b) * G(a, b);
        r.se_full(j) = std::sqrt(std::max(0.0, sigma2 * (v / dn) / dn));
    }
    r.active_set = fit.active_set;
    const Index pl = static_cast<Index>(r.active_set.size());
    r.beta_hat = r.theta_full(r.active_set);
    r.se = r.se_full(r.active_set);
    const double z = normal_quantile(0.5 * (1.0 + level));
    r.ci_low = r.beta_hat - z * r.se;
    r.ci_high = r.beta_hat + z * r.se;
    (void)pl;
    return r;
}

// Pooled fraction of (replicate, coordinate) pairs whose interval holds the truth.
inline double coverage(const std::vector<DebiasResult>& results, const std::vector<Vec>& truth_on_active) {
    if (results.empty()) throw Error(Errc::empty_input, "no replicates");
    require(results.size() == truth_on_active.size(), Errc::shape_mismatch, "one truth vector per replicate required");
    long hit = 0, total = 0;
    for (std::size_t r = 0; r < results.size(); ++r) {
        const auto& res = results[r];
        require(truth_on_active[r].size() == res.beta_hat.size(), Errc::shape_mismatch, "truth length differs from p_L");
        for (Index j = 0; j < res.beta_hat.size(); ++j) {
            ++total;
            double t = truth_on_active[r](j);
            if (res.ci_low(j) <= t && t <= res.ci_high(j)) ++hit;
        }
    }
    if (total == 0) throw Error(Errc::empty_input, "no intervals to evaluate");
    return static_cast<double>(hit) / static_cast<double>(total);
}

// ---- measurement-error correction --------------------------------------------------------

struct CorrectionReport {
    double sigma_X2 = 0.0, sigma_Y2 = 0.0, sigma_eps2 = 0.0;
    Mat R_mat;
    Vec beta_corrected;
    Mat Q_hat;
    std::optional<Mat> asym_cov;
};

// R = sigma_X^2 (X'X/n)^{-1}, corrected beta = (I - R)^{-1} beta_tilde,
// asymptotic covariance ((sigma_eps^2 + sigma_Y^2) / sigma_X^2) R.
inline CorrectionReport measurement_correct(const Vec& beta_tilde, const Mat& X_tilde_resid, double sigma_X2,
                                            double sigma_Y2, double sigma_eps2, Index n, bool require_cov = false) {
    require(sigma_X2 >= 0.0 && sigma_Y2 >= 0.0 && sigma_eps2 >= 0.0, Errc::invalid_parameter, "variances must be >= 0");
    require(X_tilde_resid.cols() == beta_tilde.size(), Errc::shape_mismatch, "design columns differ from beta length");
    require(X_tilde_resid.rows() == n && n >= 1, Errc::shape_mismatch, "n differs from design rows");
    const Index p = beta_tilde.size();
    CorrectionReport rep;
    rep.sigma_X2 = sigma_X2;
    rep.sigma_Y2 = sigma_Y2;
    rep.sigma_eps2 = sigma_eps2;
    const Mat S = X_tilde_resid.transpose() * X_tilde_resid / static_cast<double>(n);
    rep.Q_hat = S - sigma_X2 * Mat::Identity(p, p);
    if (sigma_X2 == 0.0) {
        rep.R_mat = Mat::Zero(p, p);
        rep.beta_corrected = beta_tilde;
        if (require_cov) throw Error(Errc::undefined_variance, "asymptotic covariance divides by sigma_X^2 = 0");
        return rep;
    }
    Eigen::FullPivLU<Mat> lu_s(S);
    if (!lu_s.isInvertible()) throw Error(Errc::singular_design, "X'X/n is singular");
    rep.R_mat = sigma_X2 * lu_s.inverse();
    const Mat IR = Mat::Identity(p, p) - rep.R_mat;
    Eigen::FullPivLU<Mat> lu(IR);
    if (!lu.isInvertible() || condition_number(IR) > 1e12)
        throw Error(Errc::non_correctable, "I - R is singular; the attenuation cannot be inverted");
    rep.beta_corrected = lu.solve(beta_tilde);
    rep.asym_cov = ((sigma_eps2 + sigma_Y2) / sigma_X2) * rep.R_mat;
    return rep;
}

} // namespace debinet
