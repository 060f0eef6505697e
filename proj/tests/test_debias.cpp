#include <debinet/debias.hpp>
#include <debinet/synth_data.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace debinet;

namespace {
const double kInf = std::numeric_limits<double>::infinity();

// Phi(x) = 1/2 + phi(x) * sum_k x^(2k+1) / (1 * 3 * ... * (2k+1))
double cdf_series(double x) {
    double term = x, sum = x;
    for (int k = 1; k < 200; ++k) {
        term *= x * x / (2.0 * k + 1.0);
        sum += term;
    }
    return 0.5 + sum * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double quantile_by_series(double p) {
    double lo = -8.0, hi = 8.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (cdf_series(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Selector select_all() {
    return [](const Mat& X, const Vec&) {
        IndexList S;
        for (Index j = 0; j < X.cols(); ++j) S.push_back(j);
        return S;
    };
}

NnPlmConfig tiny_nn() {
    NnPlmConfig c;
    c.width = 100;
    c.train.max_epochs = 100;
    c.train.learning_rate = 1e-3;
    return c;
}

Mat cov_of(const std::vector<Vec>& xs) {
    const Index p = xs.front().size();
    Vec mean = Vec::Zero(p);
    for (const Vec& x : xs) mean += x / static_cast<double>(xs.size());
    Mat C = Mat::Zero(p, p);
    for (const Vec& x : xs) C += (x - mean) * (x - mean).transpose() / static_cast<double>(xs.size() - 1);
    return C;
}
} // namespace

TEST(NormalQuantile, MatchesSeriesInversion) {
    EXPECT_NEAR(normal_quantile(0.975), 1.959964, 1e-5);
    for (double p : {0.001, 0.01, 0.05, 0.3, 0.5, 0.8, 0.95, 0.995})
        EXPECT_NEAR(normal_quantile(p), quantile_by_series(p), 1e-9) << p;
}

TEST(ConfidenceIntervals, PointWidthAndNesting) {
    Vec b(2);
    b << 0.5, -1.0;
    auto [lo0, hi0] = confidence_intervals(b, Mat::Zero(2, 2), 0.95);
    EXPECT_TRUE(lo0 == b && hi0 == b);
    auto [lo, hi] = confidence_intervals(b, Mat::Identity(2, 2), 0.95);
    EXPECT_NEAR(hi(0) - b(0), 1.959964, 1e-5);
    EXPECT_NEAR((hi(1) - b(1)) - (b(1) - lo(1)), 0.0, 1e-12);
    auto [lo99, hi99] = confidence_intervals(b, Mat::Identity(2, 2), 0.99);
    EXPECT_TRUE((lo99.array() < lo.array()).all() && (hi99.array() > hi.array()).all());
    for (double bad : {0.0, 1.0, 1.5}) {
        try {
            confidence_intervals(b, Mat::Identity(2, 2), bad);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::invalid_level);
        }
    }
}

TEST(Coverage, TrivialExtremes) {
    DebiasResult wide, point;
    wide.beta_hat = point.beta_hat = Vec::Zero(3);
    wide.ci_low = Vec::Constant(3, -kInf);
    wide.ci_high = Vec::Constant(3, kInf);
    point.ci_low = point.ci_high = Vec::Zero(3);
    EXPECT_EQ(coverage({wide, wide}, {Vec::Ones(3), Vec::Ones(3)}), 1.0);
    EXPECT_EQ(coverage({point}, {Vec::Ones(3)}), 0.0);
    EXPECT_THROW(coverage({}, {}), Error);
}

TEST(Coverage, ExactOlsIsCalibrated) {
    std::vector<DebiasResult> res;
    std::vector<Vec> truth;
    Vec beta(4);
    beta << 1.0, -0.5, 0.0, 2.0;
    for (std::uint64_t s = 0; s < 500; ++s) {
        Rng r(9000 + s);
        Mat X = r.normal_matrix(500, 4);
        Vec y = X * beta + r.normal_vector(500);
        res.push_back(ols_post(X, y, {0, 1, 2, 3}));
        truth.push_back(beta);
    }
    EXPECT_NEAR(coverage(res, truth), 0.95, 0.03);
}

TEST(OlsPost, EqualsPlainOlsAndRecoversNoiseless) {
    Rng r(1);
    Mat X = r.normal_matrix(30, 5);
    Vec y = r.normal_vector(30);
    DebiasResult a = ols_post(X, y, {0, 1, 2, 3, 4});
    Vec b = (X.transpose() * X).inverse() * X.transpose() * y;
    EXPECT_LE((a.beta_hat - b).cwiseAbs().maxCoeff(), 1e-10);

    Vec beta(2);
    beta << 3.0, -2.0;
    Vec y2 = X.col(1) * beta(0) + X.col(4) * beta(1);
    DebiasResult c = ols_post(X, y2, {4, 1});
    EXPECT_NEAR(c.theta_full(1), 3.0, 1e-10);
    EXPECT_NEAR(c.theta_full(4), -2.0, 1e-10);
    EXPECT_EQ(c.theta_full(0), 0.0);
    EXPECT_EQ(c.active_set, (IndexList{1, 4}));
}

TEST(OlsPost, SingularDesign) {
    Rng r(2);
    Mat X = r.normal_matrix(20, 3);
    X.col(2) = X.col(0);
    EXPECT_THROW(ols_post(X, r.normal_vector(20), {0, 2}), SingularDesignError);
}

TEST(DebiNet, AllSelectedCollapsesToOls) {
    Rng r(3);
    Mat X = r.normal_matrix(60, 4);
    Vec y = X * Vec::LinSpaced(4, 1, -1) + r.normal_vector(60);
    DebiasResult d = debinet_fit(X, y, select_all(), tiny_nn());
    Vec b = (X.transpose() * X).inverse() * X.transpose() * y;
    EXPECT_LE((d.beta_hat - b).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(DebiNet, DeterministicScatterAndSymmetricIntervals) {
    Dataset ds = gen_table2(120, 40, 3, 4);
    LassoSelectorConfig sel;
    DebiasResult a = debinet_fit(ds.X, ds.y, sel, tiny_nn()), b = debinet_fit(ds.X, ds.y, sel, tiny_nn());
    EXPECT_TRUE(a.theta_full == b.theta_full);
    EXPECT_TRUE(a.ci_low == b.ci_low);
    Index nz = 0;
    for (Index j = 0; j < ds.X.cols(); ++j) nz += a.theta_full(j) != 0.0;
    EXPECT_EQ(nz, static_cast<Index>(a.active_set.size()));
    for (std::size_t k = 0; k < a.active_set.size(); ++k)
        EXPECT_EQ(a.theta_full(a.active_set[k]), a.beta_hat(static_cast<Index>(k)));
    EXPECT_TRUE((a.ci_low.array() <= a.beta_hat.array()).all() && (a.beta_hat.array() <= a.ci_high.array()).all());
    EXPECT_LE(((a.ci_high - a.beta_hat) - (a.beta_hat - a.ci_low)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DebiNet, EmptySelectionPropagates) {
    Rng r(5);
    Selector none = [](const Mat&, const Vec&) { return IndexList{}; };
    try {
        debinet_fit(r.normal_matrix(10, 3), r.normal_vector(10), none, tiny_nn());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::nothing_selected);
    }
}

TEST(NwPost, InfiniteBandwidthsMatchCenteredOls) {
    Rng r(6);
    Mat X = r.normal_matrix(80, 5);
    Vec y = X.col(0) * 2.0 + r.normal_vector(80);
    NwLearnerConfig bw;
    bw.h_y = bw.h_D = kInf;
    DebiasResult a = nw_post(X, y, {0, 3}, bw);
    Mat D = take_cols(X, {0, 3});
    Mat Dc = D.rowwise() - D.colwise().mean();
    Vec yc = y.array() - y.mean();
    Vec b = (Dc.transpose() * Dc).inverse() * Dc.transpose() * yc;
    EXPECT_LE((a.beta_hat - b).cwiseAbs().maxCoeff(), 1e-8);
    DebiasResult again = nw_post(X, y, {0, 3}, bw);
    EXPECT_TRUE(again.beta_hat == a.beta_hat);
}

TEST(DebiasedLasso, OrthonormalDesignUndoesShrinkage) {
    const Index n = 50, p = 6;
    Rng r(7);
    Eigen::HouseholderQR<Mat> qr(r.normal_matrix(n, p));
    Mat X = std::sqrt(static_cast<double>(n)) * Mat(qr.householderQ() * Mat::Identity(n, p));
    Vec y = X.col(0) * 2.0 - X.col(2) + r.normal_vector(n);
    LassoFit fit = lasso_fit(X, y, 20.0);
    DebiasResult d = debiased_lasso(X, y, fit);
    Vec oracle = X.transpose() * y / static_cast<double>(n);
    EXPECT_LE((d.theta_full - oracle).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(DebiasedLasso, CorrectionVanishesAtOls) {
    Rng r(8);
    Mat X = r.normal_matrix(100, 5);
    Vec y = X * Vec::LinSpaced(5, 1, 2) + r.normal_vector(100);
    LassoFit fit = lasso_fit(X, y, 0.0, {1e-12, 1e-10, 100000, false});
    DebiasResult d = debiased_lasso(X, y, fit);
    EXPECT_LE((d.theta_full - fit.theta).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(d.se_full.size(), 5);
    EXPECT_TRUE((d.se_full.array() > 0.0).all());
}

TEST(DebiasedLasso, NodewiseFailureNamesColumn) {
    Rng r(9);
    Mat X = r.normal_matrix(40, 8);
    Vec y = r.normal_vector(40);
    DebiasedLassoOptions opt;
    opt.lambda_node = 1e-6;
    opt.node_options = {1e-14, 1e-14, 1, false};
    try {
        debiased_lasso(X, y, lasso_fit(X, y, 5.0), opt);
        FAIL();
    } catch (const ConvergenceError& e) {
        EXPECT_GE(e.column(), 0);
    }
}

TEST(MeasurementCorrect, ZeroNoiseVarianceLeavesEstimate) {
    Rng r(10);
    Mat X = r.normal_matrix(50, 2);
    Vec bt(2);
    bt << 0.4, -0.1;
    CorrectionReport c = measurement_correct(bt, X, 0.0, 0.1, 1.0, 50);
    EXPECT_TRUE(c.R_mat.isZero(0.0));
    EXPECT_TRUE(c.beta_corrected == bt);
    EXPECT_FALSE(c.asym_cov.has_value());
    try {
        measurement_correct(bt, X, 0.0, 0.1, 1.0, 50, true);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::undefined_variance);
    }
}

TEST(MeasurementCorrect, ScalarPlugIn) {
    Mat X(4, 1);
    X << std::sqrt(2.0), -std::sqrt(2.0), std::sqrt(2.0), -std::sqrt(2.0);
    CorrectionReport c = measurement_correct(Vec::Constant(1, 0.6), X, 1.0, 0.0, 1.0, 4);
    EXPECT_NEAR(c.R_mat(0, 0), 0.5, 1e-12);
    EXPECT_NEAR(c.beta_corrected(0), 1.2, 1e-12);
    ASSERT_TRUE(c.asym_cov.has_value());
    EXPECT_NEAR((*c.asym_cov)(0, 0), 0.5, 1e-12);
}

TEST(MeasurementCorrect, AlgebraAndNonCorrectable) {
    Rng r(11);
    Mat X = r.normal_matrix(200, 3) * 1.5;
    Vec bt = r.normal_vector(3);
    CorrectionReport c = measurement_correct(bt, X, 0.3, 0.1, 1.0, 200);
    EXPECT_LE(((Mat::Identity(3, 3) - c.R_mat) * c.beta_corrected - bt).cwiseAbs().maxCoeff(), 1e-10);
    Mat S = X.transpose() * X / 200.0;
    EXPECT_LE((c.R_mat - 0.3 * S.inverse()).cwiseAbs().maxCoeff(), 1e-12);

    Mat Xs(2, 1);
    Xs << 1.0, -1.0;
    try {
        measurement_correct(Vec::Ones(1), Xs, 1.0, 0.0, 1.0, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::non_correctable);
    }
}

// Gaussian errors-in-variables model: the OLS error u = X R beta - E (I - R) beta + eps + eps_Y is
// independent of the observed design, so the limiting covariance is Var(u) R / sigma_X^2 with
// Var(u) = sigma_eps^2 + sigma_Y^2 + beta'RQR beta + sigma_X^2 beta'(I - R)^2 beta.
TEST(MeasurementCorrect, MonteCarloMatchesExactCovariance) {
    const Index n = 2000, p = 2;
    const double sx2 = 0.5, sy2 = 0.2, se2 = 1.0;
    Vec beta(2);
    beta << 1.0, -1.0;
    const Mat Q = Mat::Identity(p, p);
    const Mat R = sx2 * (Q + sx2 * Mat::Identity(p, p)).inverse();
    const Mat IR = Mat::Identity(p, p) - R;
    const double var_u = se2 + sy2 + beta.dot(R * Q * R * beta) + sx2 * beta.dot(IR * IR * beta);
    const Mat exact = var_u / sx2 * R;
    const Mat stated = (se2 + sy2) / sx2 * R;

    std::vector<Vec> dev;
    Vec mean_corr = Vec::Zero(p);
    const int reps = 1000;
    for (int s = 0; s < reps; ++s) {
        Rng r(50000 + static_cast<std::uint64_t>(s));
        Mat X = r.normal_matrix(n, p);
        Mat Xt = X + std::sqrt(sx2) * r.normal_matrix(n, p);
        Vec Yt = X * beta + std::sqrt(se2) * r.normal_vector(n) + std::sqrt(sy2) * r.normal_vector(n);
        Vec bt = (Xt.transpose() * Xt).ldlt().solve(Xt.transpose() * Yt);
        dev.push_back(std::sqrt(static_cast<double>(n)) * (bt - IR * beta));
        mean_corr += measurement_correct(bt, Xt, sx2, sy2, se2, n).beta_corrected / reps;
    }
    Mat C = cov_of(dev);
    EXPECT_LE((C - exact).norm() / exact.norm(), 0.15);
    EXPECT_GT((C - stated).norm() / stated.norm(), (C - exact).norm() / exact.norm());
    EXPECT_LE((mean_corr - beta).cwiseAbs().maxCoeff(), 0.02);
}
