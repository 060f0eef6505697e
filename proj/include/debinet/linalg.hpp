#pragma once

#include "error.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

namespace debinet {

using Index = Eigen::Index;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using IndexList = std::vector<Index>;

inline Mat take_rows(const Mat& M, const IndexList& idx) { return M(idx, Eigen::all); }
inline Vec take_rows(const Vec& v, const IndexList& idx) { return v(idx); }
inline Mat take_cols(const Mat& M, const IndexList& idx) { return M(Eigen::all, idx); }

inline IndexList complement(const IndexList& S, Index p) {
    std::vector<char> in(static_cast<std::size_t>(p), 0);
    for (Index j : S) in[static_cast<std::size_t>(j)] = 1;
    IndexList out;
    out.reserve(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j)
        if (!in[static_cast<std::size_t>(j)]) out.push_back(j);
    return out;
}

inline Mat center_columns(const Mat& M) { return M.rowwise() - M.colwise().mean(); }

// 2-norm condition number from singular values; +inf for rank-deficient input.
inline double condition_number(const Mat& X) {
    if (X.cols() == 0) return 1.0;
    if (X.rows() < X.cols()) return std::numeric_limits<double>::infinity();
    Eigen::BDCSVD<Mat> svd(X);
    const Vec& s = svd.singularValues();
    double smin = s(s.size() - 1);
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

inline Mat normalize_rows(const Mat& Z) {
    Mat out = Z;
    for (Index i = 0; i < Z.rows(); ++i) {
        double nrm = Z.row(i).norm();
        if (nrm > 0.0) out.row(i) /= nrm;
    }
    return out;
}

inline double max_abs_asymmetry(const Mat& H) {
    if (H.rows() != H.cols()) return std::numeric_limits<double>::infinity();
    return (H - H.transpose()).cwiseAbs().maxCoeff();
}

// Seeded K-fold assignment: fold[i] in [0, K).
inline std::vector<int> kfold_assignment(Index n, int K, const std::vector<Index>& perm) {
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (Index r = 0; r < n; ++r) fold[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])] = static_cast<int>(r % K);
    return fold;
}

inline std::vector<IndexList> fold_members(const std::vector<int>& fold, int K) {
    std::vector<IndexList> out(static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < fold.size(); ++i) out[static_cast<std::size_t>(fold[i])].push_back(static_cast<Index>(i));
    return out;
}

} // namespace debinet
