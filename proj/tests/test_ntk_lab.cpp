#include <debinet/ntk_lab.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace debinet;

namespace {
Mat unit_rows(Index n, Index d, std::uint64_t seed) {
    Rng r(seed);
    return normalize_rows(r.normal_matrix(n, d));
}

// d F_s(Z_i) / dW obtained from the loss gradient with a unit residual at (i, s).
Mat output_jacobian(const WideNet& net, const Mat& Z, Index i, Index s) {
    Mat M = forward_batch(net, Z);
    M(i, s) -= 1.0;
    return gradient(net, Z, M);
}

// Number of eigenvalues of symmetric H below x, from the inertia of an LDL' factorization.
int count_below(const Mat& H, double x) {
    Eigen::LDLT<Mat> ldlt(H - x * Mat::Identity(H.rows(), H.cols()));
    return static_cast<int>((ldlt.vectorD().array() < 0.0).count());
}

double min_eigen_by_bisection(const Mat& H) {
    double g = H.cwiseAbs().rowwise().sum().maxCoeff();
    double lo = -g - 1.0, hi = g + 1.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (count_below(H, mid) >= 1 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}
} // namespace

TEST(NtkEmpirical, DiagonalNearHalfAtLargeWidth) {
    Mat Z = unit_rows(3, 4, 1);
    WideNet net = init_network(4, 100000, 0, {}, 2);
    Mat H = ntk_empirical(net, Z);
    for (Index i = 0; i < 3; ++i) EXPECT_NEAR(H(i, i), 0.5, 0.02);
}

TEST(NtkEmpirical, OrthogonalRowsGiveZero) {
    Mat Z = Mat::Identity(2, 3);
    WideNet net = init_network(3, 64, 2, {}, 3);
    Mat H = ntk_empirical(net, Z);
    for (Index s = 0; s < 3; ++s)
        for (Index h = 0; h < 3; ++h) EXPECT_EQ(H(s * 2 + 0, h * 2 + 1), 0.0);
}

TEST(NtkEmpirical, MatchesGramOfGradients) {
    Rng r(4);
    Mat Z = r.normal_matrix(3, 5);
    WideNet net = init_network(5, 50, 1, {}, 5);
    Mat H = ntk_empirical(net, Z);
    const Index n = 3, q = 2;
    for (Index s = 0; s < q; ++s)
        for (Index i = 0; i < n; ++i) {
            Mat Ji = output_jacobian(net, Z, i, s);
            for (Index h = 0; h < q; ++h)
                for (Index j = 0; j < n; ++j) {
                    Mat Jj = output_jacobian(net, Z, j, h);
                    double oracle = (Ji.array() * Jj.array()).sum();
                    EXPECT_NEAR(H(s * n + i, h * n + j), oracle, 1e-10);
                }
        }
}

TEST(NtkEmpirical, SymmetricAndPsd) {
    Mat Z = unit_rows(30, 6, 6);
    WideNet net = init_network(6, 500, 2, {}, 7);
    Mat H = ntk_empirical(net, Z);
    EXPECT_LE(max_abs_asymmetry(H), 1e-10);
    EXPECT_GE(least_eigenvalue(H), -1e-8);
}

TEST(NtkEmpirical, RejectsSmoothActivations) {
    WideNet net = init_network(2, 4, 0, {Activation::tanh}, 1);
    try {
        ntk_empirical(net, Mat::Identity(2, 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::unsupported_kernel);
    }
}

TEST(NtkInfinite, UnitDiagonalAndOrthogonalZero) {
    Mat Z = Mat::Identity(3, 3);
    Mat H = ntk_infinite_block(Z);
    for (Index i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(H(i, i), 0.5);
    EXPECT_EQ(H(0, 1), 0.0);
}

TEST(NtkInfinite, MonteCarloAgreesWithClosedForm) {
    Mat Z = unit_rows(8, 4, 8);
    Mat Hc = ntk_infinite_block(Z);
    InfiniteKernelOptions mc;
    mc.method = KernelMethod::monte_carlo;
    mc.samples = 1000000;
    mc.seed = 9;
    Mat Hm = ntk_infinite_block(Z, mc);
    EXPECT_LE((Hc - Hm).cwiseAbs().maxCoeff(), 3e-3);
}

TEST(NtkInfinite, BlockDiagonalWithIdenticalBlocks) {
    Mat Z = unit_rows(5, 3, 10);
    Mat H = ntk_infinite(Z, 3);
    Mat B = ntk_infinite_block(Z);
    for (Index s = 0; s < 3; ++s)
        for (Index h = 0; h < 3; ++h) {
            if (s == h) EXPECT_TRUE(H.block(s * 5, h * 5, 5, 5) == B);
            else EXPECT_TRUE(H.block(s * 5, h * 5, 5, 5).isZero(0.0));
        }
}

TEST(NtkInfinite, ScalesQuadratically) {
    Mat Z = unit_rows(6, 3, 11);
    Mat H1 = ntk_infinite_block(Z), H3 = ntk_infinite_block(3.0 * Z);
    EXPECT_LE((H3 - 9.0 * H1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NtkInfinite, WarnsOnParallelRows) {
    Mat Z(3, 2);
    Z << 1, 0, 0, 1, 2, 0;
    std::vector<std::string> warnings;
    InfiniteKernelOptions opt;
    opt.warnings = &warnings;
    Mat H = ntk_infinite_block(Z, opt);
    EXPECT_EQ(warnings.size(), 1u);
    EXPECT_NEAR(least_eigenvalue(H), 0.0, 1e-9);
}

TEST(LeastEigenvalue, KnownValues) {
    EXPECT_NEAR(least_eigenvalue(Mat::Identity(3, 3)), 1.0, 1e-9);
    Vec d(3);
    d << 5, 2, 0.1;
    EXPECT_NEAR(least_eigenvalue(Mat(d.asDiagonal())), 0.1, 1e-9);
}

TEST(LeastEigenvalue, MatchesInertiaBisection) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        Rng r(20 + s);
        Mat B = r.normal_matrix(6, 6);
        Mat H = 0.5 * (B + B.transpose());
        EXPECT_NEAR(least_eigenvalue(H), min_eigen_by_bisection(H), 1e-7);
    }
}

TEST(LeastEigenvalue, RejectsAsymmetricAndOversized) {
    Mat A = Mat::Identity(3, 3);
    A(0, 1) = 1.0;
    try {
        least_eigenvalue(A);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_matrix);
    }
    try {
        least_eigenvalue(Mat::Identity(401, 401));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::matrix_too_large);
    }
}

TEST(VerifyRate, ConstantLossViolatesAtFirstEpoch) {
    TrainTrace t;
    t.loss_per_epoch.assign(10, 4.0);
    RateReport r = verify_rate(t, 1.0, 1.0);
    EXPECT_FALSE(r.passed);
    EXPECT_EQ(r.first_violation, 1);
}

TEST(VerifyRate, ExactExponentialPasses) {
    TrainTrace t;
    const double lam = 0.3, lr = 0.5;
    for (int e = 0; e < 80; ++e) t.loss_per_epoch.push_back(7.0 * std::exp(-lam * lr * e));
    RateReport r = verify_rate(t, lam, lr);
    EXPECT_TRUE(r.passed);
    EXPECT_NEAR(r.slope_ratio, 1.0, 1e-9);
    EXPECT_NEAR(r.r2, 1.0, 1e-12);
    EXPECT_GE(r.fit_points, 3);
}

TEST(LazyCheck, RadiusPlugIn) {
    EXPECT_NEAR(lazy_radius(4, 100, 0.5, 10.0), 4.0, 1e-12);
}

TEST(LazyCheck, ZeroEpochsHaveZeroDrift) {
    Mat Z = unit_rows(5, 3, 1);
    Rng r(2);
    Mat M = r.normal_matrix(5, 2);
    WideNet net = init_network(3, 100, 1, {}, 3);
    TrainConfig cfg;
    cfg.max_epochs = 0;
    TrainResult res = train(net, Z, M, cfg);
    LazyReport rep = lazy_check(res.trace, net, Z, M, 0.1);
    EXPECT_EQ(rep.max_drift, 0.0);
    EXPECT_TRUE(rep.bound_satisfied);
    EXPECT_GT(rep.R_prime, 0.0);
}

TEST(ConcentrationSweep, MatchesDirectComposition) {
    Mat Z = unit_rows(10, 4, 30);
    auto rows = concentration_sweep(Z, {128}, 1, 1, 77);
    WideNet net = init_network(4, 128, 1, {}, derive_seed(77, 0));
    double direct = (ntk_empirical(net, Z) - ntk_infinite(Z, 2)).norm();
    EXPECT_DOUBLE_EQ(rows[0].mean_frob_gap, direct);
}

TEST(ConcentrationSweep, GapAndCrossBlocksShrinkWithWidth) {
    Mat Z = unit_rows(20, 5, 31);
    auto rows = concentration_sweep(Z, {256, 4096}, 5, 1, 5);
    EXPECT_LT(rows[1].mean_frob_gap, rows[0].mean_frob_gap);
    EXPECT_LE(rows[1].mean_offdiag, rows[0].mean_offdiag);
    EXPECT_GT(rows[1].min_lambda_emp, 0.0);
}

TEST(ConcentrationSweep, RejectsDescendingWidths) {
    try {
        concentration_sweep(unit_rows(4, 2, 1), {512, 256}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_parameter);
    }
}
