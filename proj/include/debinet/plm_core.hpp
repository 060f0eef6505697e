#pragma once

#include "error.hpp"
#include "kernel_reg.hpp"
#include "linalg.hpp"
#include "rng.hpp"
#include "selection.hpp"
#include "widenet.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace debinet {

// Estimate of the joint map Z -> E([y, D] | Z); column 0 is the response.
struct NuisanceFit {
    std::function<Mat(const Mat&)> predict_M;
    std::string learner_tag;
    IndexList fitted_on;
    Index out_dim = 0;
    std::shared_ptr<const TrainTrace> trace; // set by the network learner
    std::vector<double> bandwidths;          // set by the kernel learner: {h_y, h_D}

    Mat operator()(const Mat& Z) const {
        Mat out = predict_M(Z);
        require(out.cols() == out_dim && out.rows() == Z.rows(), Errc::shape_mismatch, "nuisance output has wrong shape");
        return out;
    }
};

using JointLearner = std::function<NuisanceFit(const Mat& Z, const Mat& M, std::uint64_t stream)>;

struct OlsResult {
    Vec beta;
    double sigma2 = 0.0;
    Mat cov;
    double condition = 1.0;
};

// Intercept-free OLS of Y on X with a condition-number guard.
inline OlsResult residual_ols(const Mat& X, const Vec& Y, double cond_limit = 1e10) {
    require(X.rows() == Y.size(), Errc::shape_mismatch, "residual design and response lengths differ");
    require(X.cols() >= 1, Errc::invalid_size, "need at least one regressor");
    const Index n = X.rows(), p = X.cols();
    if (p >= n) throw Error(Errc::ols_infeasible, "p_L = " + std::to_string(p) + " >= n = " + std::to_string(n));
    OlsResult out;
    out.condition = condition_number(X);
    if (!(out.condition <= cond_limit)) throw SingularDesignError(out.condition);
    out.beta = X.colPivHouseholderQr().solve(Y);
    out.sigma2 = (Y - X * out.beta).squaredNorm() / static_cast<double>(n - p);
    const Mat G = X.transpose() * X;
    Mat Ginv = G.ldlt().solve(Mat::Identity(p, p));
    out.cov = out.sigma2 * 0.5 * (Ginv + Ginv.transpose());
    return out;
}

struct PlmEstimate {
    Vec beta_hat;
    Mat X_resid;
    Vec Y_resid;
    double sigma2_hat = 0.0;
    Mat cov_beta;
    double condition = 1.0;
    NuisanceFit nuisance;
    std::vector<Vec> fold_betas;  // cross-fitting only
    std::vector<IndexList> folds; // cross-fitting only
};

inline Mat stack_targets(const Vec& y, const Mat& D) {
    Mat M(y.size(), 1 + D.cols());
    M << y, D;
    return M;
}

inline NuisanceFit zero_nuisance(Index out_dim) {
    NuisanceFit f;
    f.out_dim = out_dim;
    f.learner_tag = "zero";
    f.predict_M = [out_dim](const Mat& Z) { return Mat::Zero(Z.rows(), out_dim); };
    return f;
}

// ---- learners ------------------------------------------------------------------------

inline JointLearner mean_learner() {
    return [](const Mat& Z, const Mat& M, std::uint64_t) {
        NuisanceFit f;
        f.learner_tag = "mean";
        f.out_dim = M.cols();
        Eigen::RowVectorXd mu = M.colwise().mean();
        f.predict_M = [mu](const Mat& Zq) {
            Mat out(Zq.rows(), mu.size());
            out.rowwise() = mu;
            return out;
        };
        (void)Z;
        return f;
    };
}

enum class InputScaling { none, unit_rows };

struct NnPlmConfig {
    Index width = 1000;
    ActivationSpec activation;
    TrainConfig train = [] {
        TrainConfig t;
        t.optimizer = Optimizer::adam;
        t.learning_rate = 2e-4;
        t.max_epochs = 3000;
        t.early_stop = EarlyStop{};
        return t;
    }();
    bool symmetric_init = true;      // F(0) = 0; false draws the plain i.i.d. initialization
    bool standardize_targets = true; // fit (M - mean) / sd and map back
    InputScaling input_scaling = InputScaling::none;
    std::uint64_t init_seed = 0;
};

inline Mat scale_inputs(const Mat& Z, InputScaling s) { return s == InputScaling::unit_rows ? normalize_rows(Z) : Z; }

inline JointLearner widenet_learner(const NnPlmConfig& cfg) {
    return [cfg](const Mat& Z, const Mat& M, std::uint64_t stream) {
        const Index q = M.cols();
        Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(q), sd = Eigen::RowVectorXd::Ones(q);
        if (cfg.standardize_targets) {
            mu = M.colwise().mean();
            for (Index c = 0; c < q; ++c) {
                double s = std::sqrt((M.col(c).array() - mu(c)).square().mean());
                sd(c) = s > 0.0 ? s : 1.0;
            }
        }
        Mat Ms = (M.rowwise() - mu).array().rowwise() / sd.array();
        Mat Zs = scale_inputs(Z, cfg.input_scaling);
        const std::uint64_t seed = derive_seed(cfg.init_seed, stream);
        WideNet net0 = cfg.symmetric_init ? init_network_symmetric(Z.cols(), cfg.width, q - 1, cfg.activation, seed)
                                          : init_network(Z.cols(), cfg.width, q - 1, cfg.activation, seed);
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.train.seed, stream);
        TrainResult tr = train(std::move(net0), Zs, Ms, tc);
        auto net = std::make_shared<const WideNet>(std::move(tr.net));
        NuisanceFit f;
        f.learner_tag = "widenet";
        f.out_dim = q;
        f.trace = std::make_shared<const TrainTrace>(std::move(tr.trace));
        InputScaling scaling = cfg.input_scaling;
        f.predict_M = [net, mu, sd, scaling](const Mat& Zq) {
            Mat F = forward_batch(*net, scale_inputs(Zq, scaling));
            return Mat((F.array().rowwise() * sd.array()).rowwise() + mu.array());
        };
        return f;
    };
}

struct NwLearnerConfig {
    double h_y = -1.0; // <= 0 selects by cross-validation
    double h_D = -1.0;
    std::vector<double> grid; // empty: scaled_bandwidth_grid(Z)
    int cv_folds = 5;
    std::uint64_t cv_seed = 0;
};

// Separate kernel fits for the response column and the D columns.
inline JointLearner nw_learner(const NwLearnerConfig& cfg) {
    return [cfg](const Mat& Z, const Mat& M, std::uint64_t stream) {
        const Index q = M.cols();
        std::vector<double> grid = cfg.grid.empty() ? scaled_bandwidth_grid(Z) : cfg.grid;
        const std::uint64_t cvs = derive_seed(cfg.cv_seed, stream);
        double hy = cfg.h_y > 0.0 ? cfg.h_y : nw_bandwidth_cv(Z, M.leftCols(1), grid, cfg.cv_folds, cvs);
        double hd = cfg.h_D > 0.0 ? cfg.h_D : nw_bandwidth_cv(Z, M.rightCols(q - 1), grid, cfg.cv_folds, cvs);
        auto my = std::make_shared<const NwModel>(nw_fit(Z, M.leftCols(1), hy));
        auto md = std::make_shared<const NwModel>(nw_fit(Z, M.rightCols(q - 1), hd));
        NuisanceFit f;
        f.learner_tag = "nw";
        f.out_dim = q;
        f.bandwidths = {hy, hd};
        f.predict_M = [my, md, q](const Mat& Zq) {
            Mat out(Zq.rows(), q);
            out.leftCols(1) = nw_predict(*my, Zq);
            out.rightCols(q - 1) = nw_predict(*md, Zq);
            return out;
        };
        return f;
    };
}

struct LassoLearnerConfig {
    double lambda = -1.0; // <= 0: chosen by K-fold cross-validation over a log-spaced path
    int cv_folds = 5;
    int n_lambda = 30;
    double lambda_min_ratio = 1e-4;
    std::uint64_t cv_seed = 0;
    LassoOptions options;
};

// Cross-validated penalty for a centered Lasso of t on Zc. Errors are summed squared
// held-out residuals; the penalty is rescaled by the training fraction.
inline double lasso_cv_lambda(const Mat& Zc, const Vec& t, const LassoLearnerConfig& cfg, std::uint64_t seed) {
    const Index n = Zc.rows();
    const double lmax = lambda_max(Zc, t);
    if (!(lmax > 0.0)) return 1.0;
    const int K = static_cast<int>(std::min<Index>(cfg.cv_folds, n));
    require(K >= 2 && cfg.n_lambda >= 1, Errc::invalid_parameter, "lasso CV needs >= 2 folds and >= 1 lambda");
    std::vector<double> path;
    for (int k = 0; k < cfg.n_lambda; ++k)
        path.push_back(lmax * std::pow(cfg.lambda_min_ratio, cfg.n_lambda == 1 ? 0.0 : k / double(cfg.n_lambda - 1)));
    Rng rng(seed);
    auto members = fold_members(kfold_assignment(n, K, rng.permutation(n)), K);
    std::vector<double> err(path.size(), 0.0);
    for (const IndexList& held : members) {
        IndexList rest = complement(held, n);
        Mat Zr = take_rows(Zc, rest), Zh = take_rows(Zc, held);
        Vec tr = take_rows(t, rest), th = take_rows(t, held);
        const double frac = static_cast<double>(rest.size()) / static_cast<double>(n);
        Vec warm = Vec::Zero(Zc.cols());
        for (std::size_t k = 0; k < path.size(); ++k) {
            LassoFit f = lasso_fit(Zr, tr, path[k] * frac, cfg.options, &warm);
            warm = f.theta;
            err[k] += (th - Zh * f.theta).squaredNorm();
        }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < path.size(); ++k)
        if (err[k] < err[best]) best = k;
    return path[best];
}

// One centered Lasso per target column.
inline JointLearner lasso_learner(const LassoLearnerConfig& cfg) {
    return [cfg](const Mat& Z, const Mat& M, std::uint64_t stream) {
        const Index q = M.cols();
        Eigen::RowVectorXd zmu = Z.colwise().mean();
        Eigen::RowVectorXd tmu = M.colwise().mean();
        Mat Zc = Z.rowwise() - zmu;
        Mat coef(Z.cols(), q);
        for (Index c = 0; c < q; ++c) {
            Vec t = M.col(c).array() - tmu(c);
            double lam = cfg.lambda > 0.0
                             ? cfg.lambda
                             : lasso_cv_lambda(Zc, t, cfg, derive_seed(derive_seed(cfg.cv_seed, stream), c));
            coef.col(c) = lasso_fit(Zc, t, lam, cfg.options).theta;
        }
        NuisanceFit f;
        f.learner_tag = "lasso";
        f.out_dim = q;
        f.predict_M = [zmu, tmu, coef](const Mat& Zq) {
            Mat out = (Zq.rowwise() - zmu) * coef;
            out.rowwise() += tmu;
            return out;
        };
        return f;
    };
}

// ---- estimators ------------------------------------------------------------------------

inline PlmEstimate plm_from_nuisance(const Mat& D, const Mat& Z, const Vec& y, NuisanceFit nuisance) {
    require(D.rows() == y.size() && Z.rows() == y.size(), Errc::shape_mismatch, "D, Z and y row counts differ");
    const Index p_L = D.cols();
    require(nuisance.out_dim == 1 + p_L, Errc::shape_mismatch, "nuisance output dimension differs from 1 + p_L");
    Mat Mh = nuisance(Z);
    PlmEstimate est;
    est.Y_resid = y - Mh.col(0);
    est.X_resid = D - Mh.rightCols(p_L);
    OlsResult ols = residual_ols(est.X_resid, est.Y_resid);
    est.beta_hat = ols.beta;
    est.sigma2_hat = ols.sigma2;
    est.cov_beta = ols.cov;
    est.condition = ols.condition;
    est.nuisance = std::move(nuisance);
    return est;
}

// Single joint nuisance fit on all rows, then residual OLS.
inline PlmEstimate plm_joint_fit(const Mat& D, const Mat& Z, const Vec& y, const JointLearner& learner,
                                 std::uint64_t stream = 0) {
    require(D.rows() == y.size() && Z.rows() == y.size(), Errc::shape_mismatch, "D, Z and y row counts differ");
    require(D.cols() >= 1, Errc::invalid_size, "need at least one selected column");
    if (D.cols() >= D.rows()) throw Error(Errc::ols_infeasible, "p_L >= n");
    NuisanceFit f = Z.cols() == 0 ? zero_nuisance(1 + D.cols()) : learner(Z, stack_targets(y, D), stream);
    IndexList all(static_cast<std::size_t>(y.size()));
    for (Index i = 0; i < y.size(); ++i) all[static_cast<std::size_t>(i)] = i;
    f.fitted_on = std::move(all);
    return plm_from_nuisance(D, Z, y, std::move(f));
}

inline PlmEstimate plm_nn_fit(const Mat& D, const Mat& Z, const Vec& y, const NnPlmConfig& cfg = {}) {
    return plm_joint_fit(D, Z, y, widenet_learner(cfg));
}

inline PlmEstimate plm_nw_fit(const Mat& D, const Mat& Z, const Vec& y, double h_y, double h_D) {
    require(h_y > 0.0 && h_D > 0.0, Errc::invalid_parameter, "bandwidths must be positive or +infinity");
    NwLearnerConfig c;
    c.h_y = h_y;
    c.h_D = h_D;
    return plm_joint_fit(D, Z, y, nw_learner(c));
}

inline PlmEstimate plm_nw_fit_cv(const Mat& D, const Mat& Z, const Vec& y, const NwLearnerConfig& cfg = {}) {
    return plm_joint_fit(D, Z, y, nw_learner(cfg));
}

enum class DmlLearner { lasso, nw, widenet, mean };

inline DmlLearner parse_dml_learner(const std::string& s) {
    if (s == "lasso") return DmlLearner::lasso;
    if (s == "nw") return DmlLearner::nw;
    if (s == "widenet" || s == "nn") return DmlLearner::widenet;
    if (s == "mean") return DmlLearner::mean;
    throw Error(Errc::invalid_parameter, "unknown DML learner '" + s + "'");
}

struct DmlConfig {
    DmlLearner learner = DmlLearner::lasso;
    int K = 5;
    std::uint64_t seed = 0;
    LassoLearnerConfig lasso;
    NwLearnerConfig nw;
    NnPlmConfig nn;
};

inline JointLearner make_learner(const DmlConfig& cfg) {
    switch (cfg.learner) {
    case DmlLearner::lasso: return lasso_learner(cfg.lasso);
    case DmlLearner::nw: return nw_learner(cfg.nw);
    case DmlLearner::widenet: return widenet_learner(cfg.nn);
    case DmlLearner::mean: return mean_learner();
    }
    throw Error(Errc::invalid_config, "unknown learner");
}

// Cross-fitting with an explicit fold label per row (labels 0..K-1).
inline PlmEstimate dml_fit_folds(const Mat& D, const Mat& Z, const Vec& y, const JointLearner& learner,
                                 const std::vector<int>& fold, int K) {
    require(K >= 2, Errc::invalid_parameter, "K must be >= 2");
    require(D.rows() == y.size() && Z.rows() == y.size(), Errc::shape_mismatch, "D, Z and y row counts differ");
    require(static_cast<Index>(fold.size()) == y.size(), Errc::shape_mismatch, "fold labels must cover every row");
    const Index n = y.size(), p_L = D.cols();
    require(p_L >= 1, Errc::invalid_size, "need at least one selected column");
    auto members = fold_members(fold, K);
    for (int j = 0; j < K; ++j)
        if (static_cast<Index>(members[static_cast<std::size_t>(j)].size()) <= p_L)
            throw Error(Errc::fold_size, "fold " + std::to_string(j) + " has " +
                                             std::to_string(members[static_cast<std::size_t>(j)].size()) +
                                             " rows, need more than p_L = " + std::to_string(p_L));
    const Mat M = stack_targets(y, D);
    PlmEstimate est;
    est.X_resid.resize(n, p_L);
    est.Y_resid.resize(n);
    est.beta_hat = Vec::Zero(p_L);
    std::vector<NuisanceFit> fits;
    for (int j = 0; j < K; ++j) {
        const IndexList& in = members[static_cast<std::size_t>(j)];
        IndexList out = complement(in, n);
        NuisanceFit f = Z.cols() == 0 ? zero_nuisance(1 + p_L)
                                      : learner(take_rows(Z, out), take_rows(M, out), static_cast<std::uint64_t>(j));
        f.fitted_on = out;
        Mat Mh = f(take_rows(Z, in));
        Vec yr = take_rows(y, in) - Mh.col(0);
        Mat xr = take_rows(D, in) - Mh.rightCols(p_L);
        OlsResult o = residual_ols(xr, yr);
        est.fold_betas.push_back(o.beta);
        est.beta_hat += o.beta / static_cast<double>(K);
        for (std::size_t r = 0; r < in.size(); ++r) {
            est.Y_resid(in[r]) = yr(static_cast<Index>(r));
            est.X_resid.row(in[r]) = xr.row(static_cast<Index>(r));
        }
        fits.push_back(std::move(f));
    }
    est.folds = members;
    const Vec res = est.Y_resid - est.X_resid * est.beta_hat;
    est.sigma2_hat = res.squaredNorm() / static_cast<double>(n - p_L);
    est.condition = condition_number(est.X_resid);
    Mat G = est.X_resid.transpose() * est.X_resid;
    Mat Ginv = G.ldlt().solve(Mat::Identity(p_L, p_L));
    est.cov_beta = est.sigma2_hat * 0.5 * (Ginv + Ginv.transpose());

    auto shared = std::make_shared<const std::vector<NuisanceFit>>(std::move(fits));
    est.nuisance.learner_tag = (*shared)[0].learner_tag;
    est.nuisance.out_dim = 1 + p_L;
    est.nuisance.predict_M = [shared](const Mat& Zq) {
        Mat acc = (*shared)[0](Zq);
        for (std::size_t j = 1; j < shared->size(); ++j) acc += (*shared)[j](Zq);
        return Mat(acc / static_cast<double>(shared->size()));
    };
    return est;
}

inline std::vector<int> dml_folds(Index n, int K, std::uint64_t seed) {
    require(K >= 2, Errc::invalid_parameter, "K must be >= 2");
    if (n < K) throw Error(Errc::fold_size, "fewer rows than folds");
    Rng rng(derive_seed(seed, 0x464f4c44ULL));
    return kfold_assignment(n, K, rng.permutation(n));
}

inline PlmEstimate dml_fit(const Mat& D, const Mat& Z, const Vec& y, const DmlConfig& cfg = {}) {
    return dml_fit_folds(D, Z, y, make_learner(cfg), dml_folds(y.size(), cfg.K, cfg.seed), cfg.K);
}

// y_hat = m_y(Z) + (D - m_D(Z)) beta
inline Vec plm_predict(const PlmEstimate& est, const Mat& D_new, const Mat& Z_new) {
    require(D_new.rows() == Z_new.rows(), Errc::shape_mismatch, "D and Z row counts differ");
    require(D_new.cols() == est.beta_hat.size(), Errc::shape_mismatch, "D columns differ from p_L");
    Mat Mh = est.nuisance(Z_new);
    return Mh.col(0) + (D_new - Mh.rightCols(D_new.cols())) * est.beta_hat;
}

// f_hat(Z) = m_y(Z) - m_D(Z) beta
inline Vec f_hat(const PlmEstimate& est, const Mat& Z_query) {
    Mat Mh = est.nuisance(Z_query);
    return Mh.col(0) - Mh.rightCols(est.beta_hat.size()) * est.beta_hat;
}

} // namespace debinet
