#pragma once

#include "error.hpp"
#include "linalg.hpp"
#include "rng.hpp"
#include "widenet.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace debinet {

inline constexpr Index kMaxEigenSize = 400;

// H_whole with blocks (H_sh)_ij = (1/m) Z_i'Z_j sum_r A_rs A_rh I{Z_i'w_r >= 0, Z_j'w_r >= 0};
// row/column index (s, i) maps to s * n + i.
inline Mat ntk_empirical(const WideNet& net, const Mat& Z) {
    if (net.activation.kind != Activation::relu)
        throw Error(Errc::unsupported_kernel, std::string("no kernel formula for activation ") +
                                                  activation_name(net.activation.kind));
    require(Z.cols() == net.input_dim(), Errc::shape_mismatch, "Z columns differ from network input dimension");
    const Index n = Z.rows(), q = net.output_dim(), m = net.width();
    const Mat I = ((Z * net.W).array() >= 0.0).cast<double>().matrix();
    const Mat G = Z * Z.transpose();
    Mat H(n * q, n * q);
    for (Index s = 0; s < q; ++s) {
        for (Index h = s; h < q; ++h) {
            Vec w = net.A.col(s).cwiseProduct(net.A.col(h)) / static_cast<double>(m);
            Mat B = (I * w.asDiagonal() * I.transpose()).cwiseProduct(G);
            H.block(s * n, h * n, n, n) = B;
            if (h != s) H.block(h * n, s * n, n, n) = B.transpose();
        }
    }
    return H;
}

enum class KernelMethod { closed_form, monte_carlo };

struct InfiniteKernelOptions {
    KernelMethod method = KernelMethod::closed_form;
    long samples = 1000000;
    std::uint64_t seed = 0;
    std::vector<std::string>* warnings = nullptr;
};

inline std::vector<std::pair<Index, Index>> parallel_row_pairs(const Mat& Z, double tol = 1e-12) {
    std::vector<std::pair<Index, Index>> out;
    Vec nrm = Z.rowwise().norm();
    for (Index i = 0; i < Z.rows(); ++i)
        for (Index j = i + 1; j < Z.rows(); ++j) {
            if (nrm(i) == 0.0 || nrm(j) == 0.0) continue;
            double c = Z.row(i).dot(Z.row(j)) / (nrm(i) * nrm(j));
            if (std::abs(c) >= 1.0 - tol) out.emplace_back(i, j);
        }
    return out;
}

// n x n kernel E_w[Z_i'Z_j I{w'Z_i >= 0, w'Z_j >= 0}], w ~ N(0, I).
inline Mat ntk_infinite_block(const Mat& Z, const InfiniteKernelOptions& opt = {}) {
    const Index n = Z.rows();
    if (opt.warnings) {
        auto par = parallel_row_pairs(Z);
        if (!par.empty())
            opt.warnings->push_back("degenerate kernel: rows " + std::to_string(par.front().first) + " and " +
                                    std::to_string(par.front().second) + " are parallel (" +
                                    std::to_string(par.size()) + " pairs); least eigenvalue 0 expected");
    }
    const Mat G = Z * Z.transpose();
    if (opt.method == KernelMethod::closed_form) {
        Mat H(n, n);
        Vec nrm = G.diagonal().cwiseSqrt();
        for (Index i = 0; i < n; ++i) {
            H(i, i) = 0.5 * G(i, i);
            for (Index j = i + 1; j < n; ++j) {
                double v = 0.0;
                if (nrm(i) > 0.0 && nrm(j) > 0.0) {
                    double c = std::clamp(G(i, j) / (nrm(i) * nrm(j)), -1.0, 1.0);
                    v = G(i, j) * (std::numbers::pi - std::acos(c)) / (2.0 * std::numbers::pi);
                }
                H(i, j) = H(j, i) = v;
            }
        }
        return H;
    }
    require(opt.samples >= 1, Errc::invalid_parameter, "monte_carlo needs at least one sample");
    Rng rng(opt.seed);
    Mat C = Mat::Zero(n, n);
    const long batch = 4096;
    for (long done = 0; done < opt.samples; done += batch) {
        long b = std::min(batch, opt.samples - done);
        Mat Wb = rng.normal_matrix(Z.cols(), b);
        Mat Ib = ((Z * Wb).array() >= 0.0).cast<double>().matrix();
        C.noalias() += Ib * Ib.transpose();
    }
    return G.cwiseProduct(C) / static_cast<double>(opt.samples);
}

// Block-diagonal (q blocks) whole-output limit kernel.
inline Mat ntk_infinite(const Mat& Z, Index q, const InfiniteKernelOptions& opt = {}) {
    require(q >= 1, Errc::invalid_size, "output dimension must be >= 1");
    Mat B = ntk_infinite_block(Z, opt);
    const Index n = Z.rows();
    Mat H = Mat::Zero(n * q, n * q);
    for (Index s = 0; s < q; ++s) H.block(s * n, s * n, n, n) = B;
    return H;
}

inline double least_eigenvalue(const Mat& H) {
    require(H.rows() == H.cols(), Errc::invalid_matrix, "matrix is not square");
    if (H.rows() > kMaxEigenSize)
        throw Error(Errc::matrix_too_large,
                    "dense eigensolve limited to size " + std::to_string(kMaxEigenSize) + ", got " + std::to_string(H.rows()));
    require(H.rows() >= 1, Errc::invalid_matrix, "empty matrix");
    double asym = max_abs_asymmetry(H);
    if (!(asym <= 1e-8)) throw Error(Errc::invalid_matrix, "matrix is not symmetric (max gap " + std::to_string(asym) + ")");
    Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline double offdiag_block_norm(const Mat& H, Index n, Index q) {
    double worst = 0.0;
    for (Index s = 0; s < q; ++s)
        for (Index h = 0; h < q; ++h)
            if (s != h) worst = std::max(worst, H.block(s * n, h * n, n, n).norm());
    return worst;
}

struct NtkReport {
    Mat H_whole;
    Mat H_inf_whole;
    double lambda0_emp = 0.0;
    double lambda0_inf = 0.0;
    double frob_gap = 0.0;
    double offdiag_norm = 0.0;
};

inline NtkReport ntk_report(const WideNet& net, const Mat& Z, const InfiniteKernelOptions& opt = {}) {
    NtkReport rep;
    const Index n = Z.rows(), q = net.output_dim();
    rep.H_whole = ntk_empirical(net, Z);
    rep.H_inf_whole = ntk_infinite(Z, q, opt);
    rep.frob_gap = (rep.H_whole - rep.H_inf_whole).norm();
    rep.offdiag_norm = offdiag_block_norm(rep.H_whole, n, q);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.lambda0_emp = n * q <= kMaxEigenSize ? least_eigenvalue(rep.H_whole) : nan;
    rep.lambda0_inf = n <= kMaxEigenSize ? least_eigenvalue(rep.H_inf_whole.topLeftCorner(n, n)) : nan;
    return rep;
}

// ---- convergence-rate verification ---------------------------------------------------

struct RateReport {
    bool passed = true;
    long first_violation = -1;
    long largest_violation = -1;
    long violations = 0;
    double slope = 0.0;       // of log loss against epoch
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_ratio = 0.0; // slope / (-lambda0 * lr)
    double fit_upper = 0.0;   // loss window [fit_lower, fit_upper] used for the fit
    double fit_lower = 0.0;
    long fit_points = 0;
    double rho = 0.9;
    double slack = 1.5;
};

struct LineFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    const double k = static_cast<double>(x.size());
    if (x.size() < 2) return f;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

// Checks loss(e) <= slack * exp(-rho * lambda0 * lr * e) * loss(0) and fits log-loss over the
// decade [loss(0)/100, loss(0)/10] (falling back to every positive entry when that window
// holds fewer than three epochs).
inline RateReport verify_rate(const TrainTrace& trace, double lambda0, double lr,
                              const std::vector<double>& per_output_initial = {}, double rho = 0.9,
                              double slack = 1.5) {
    require(!trace.loss_per_epoch.empty(), Errc::empty_input, "empty loss trace");
    RateReport rep;
    rep.rho = rho;
    rep.slack = slack;
    double L0 = trace.loss_per_epoch.front();
    if (!per_output_initial.empty()) {
        L0 = 0.0;
        for (double v : per_output_initial) L0 += v;
    }
    const auto& L = trace.loss_per_epoch;
    for (std::size_t e = 0; e < L.size(); ++e) {
        double bound = slack * std::exp(-rho * lambda0 * lr * static_cast<double>(e)) * L0;
        if (L[e] > bound) {
            if (rep.first_violation < 0) rep.first_violation = static_cast<long>(e);
            rep.largest_violation = static_cast<long>(e);
            ++rep.violations;
        }
    }
    rep.passed = rep.violations == 0;

    rep.fit_upper = L0 / 10.0;
    rep.fit_lower = L0 / 100.0;
    std::vector<double> xs, ys;
    for (std::size_t e = 0; e < L.size(); ++e)
        if (L[e] <= rep.fit_upper && L[e] >= rep.fit_lower) {
            xs.push_back(static_cast<double>(e));
            ys.push_back(std::log(L[e]));
        }
    if (xs.size() < 3) {
        xs.clear();
        ys.clear();
        rep.fit_upper = L0;
        rep.fit_lower = 0.0;
        for (std::size_t e = 0; e < L.size(); ++e)
            if (L[e] > 0.0) {
                xs.push_back(static_cast<double>(e));
                ys.push_back(std::log(L[e]));
            }
    }
    LineFit f = fit_line(xs, ys);
    rep.slope = f.slope;
    rep.intercept = f.intercept;
    rep.r2 = f.r2;
    rep.fit_points = static_cast<long>(xs.size());
    rep.slope_ratio = (lambda0 * lr != 0.0) ? f.slope / (-lambda0 * lr) : 0.0;
    return rep;
}

// ---- lazy training -----------------------------------------------------------------

struct LazyReport {
    double R_prime = 0.0;
    double R_lemma = 0.0;
    double c = 1.0;
    double delta = 0.1;
    double max_drift = 0.0;
    long first_exceeding_epoch = -1;
    bool bound_satisfied = true;
};

inline double lazy_radius(Index n, Index m, double lambda0, double residual_norm_sum) {
    return std::sqrt(static_cast<double>(n)) / (std::sqrt(static_cast<double>(m)) * lambda0) * residual_norm_sum;
}

inline LazyReport lazy_check(const TrainTrace& trace, const WideNet& net0, const Mat& Z, const Mat& M, double lambda0,
                             double c = 1.0, double delta = 0.1) {
    const Mat R = M - forward_batch(net0, Z);
    const Index n = Z.rows(), q = net0.output_dim();
    LazyReport rep;
    rep.c = c;
    rep.delta = delta;
    rep.R_prime = lazy_radius(n, net0.width(), lambda0, R.colwise().norm().sum());
    rep.R_lemma = c * delta * lambda0 / (static_cast<double>(n * n) * static_cast<double>(q * q));
    for (std::size_t e = 0; e < trace.weight_drift_per_epoch.size(); ++e) {
        double d = trace.weight_drift_per_epoch[e];
        rep.max_drift = std::max(rep.max_drift, d);
        if (d > rep.R_prime && rep.first_exceeding_epoch < 0) rep.first_exceeding_epoch = static_cast<long>(e);
    }
    rep.bound_satisfied = rep.max_drift <= rep.R_prime;
    return rep;
}

// ---- concentration sweep ---------------------------------------------------------------

struct SweepRow {
    Index width = 0;
    double mean_frob_gap = 0.0;
    double mean_offdiag = 0.0;
    double min_lambda_emp = 0.0;
    std::vector<double> frob_gaps;
    std::vector<double> offdiag_norms;
    std::vector<double> lambda_emp;
};

// Networks for seed index s use derive_seed(base_seed, s) at every width.
inline std::vector<SweepRow> concentration_sweep(const Mat& Z, const std::vector<Index>& widths, int seeds_per_width,
                                                 Index p_L = 1, std::uint64_t base_seed = 0) {
    require(seeds_per_width >= 1, Errc::invalid_parameter, "seeds_per_width must be >= 1");
    for (std::size_t i = 1; i < widths.size(); ++i)
        require(widths[i] > widths[i - 1], Errc::invalid_parameter, "widths must be ascending");
    const Index n = Z.rows(), q = 1 + p_L;
    const Mat Hinf = ntk_infinite(Z, q);
    std::vector<SweepRow> rows;
    for (Index m : widths) {
        SweepRow row;
        row.width = m;
        row.min_lambda_emp = std::numeric_limits<double>::infinity();
        for (int s = 0; s < seeds_per_width; ++s) {
            WideNet net = init_network(Z.cols(), m, p_L, {}, derive_seed(base_seed, static_cast<std::uint64_t>(s)));
            Mat H = ntk_empirical(net, Z);
            row.frob_gaps.push_back((H - Hinf).norm());
            row.offdiag_norms.push_back(offdiag_block_norm(H, n, q));
            double lam = n * q <= kMaxEigenSize ? least_eigenvalue(H) : std::numeric_limits<double>::quiet_NaN();
            row.lambda_emp.push_back(lam);
            row.min_lambda_emp = std::min(row.min_lambda_emp, lam);
        }
        for (double v : row.frob_gaps) row.mean_frob_gap += v / seeds_per_width;
        for (double v : row.offdiag_norms) row.mean_offdiag += v / seeds_per_width;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace debinet
