#pragma once

#include "error.hpp"
#include "linalg.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace debinet {

// Nadaraya-Watson regression with the Gaussian kernel exp(-||u||^2 / 2), u = (z - Z_i) / h.
struct NwModel {
    Mat Z_train;
    Mat targets;
    double bandwidth = 1.0; // may be +infinity (uniform weights)
};

inline constexpr double kNwWeightFloor = 1e-300;

inline NwModel nw_fit(const Mat& Z_train, const Mat& targets, double bandwidth) {
    require(Z_train.rows() >= 1, Errc::invalid_size, "need at least one training row");
    require(Z_train.rows() == targets.rows(), Errc::shape_mismatch, "Z and targets row counts differ");
    require(bandwidth > 0.0, Errc::invalid_parameter, "bandwidth must be positive");
    return {Z_train, targets, bandwidth};
}

// Row-normalized weight matrix (queries x training rows).
inline Mat nw_weights(const NwModel& model, const Mat& Zq) {
    require(Zq.cols() == model.Z_train.cols(), Errc::shape_mismatch, "query dimension differs from training dimension");
    const Index k = Zq.rows(), n = model.Z_train.rows();
    Mat Wt(k, n);
    if (std::isinf(model.bandwidth)) {
        Wt.setConstant(1.0 / static_cast<double>(n));
        return Wt;
    }
    const double scale = 0.5 / (model.bandwidth * model.bandwidth);
    for (Index q = 0; q < k; ++q) {
        Vec d2 = (model.Z_train.rowwise() - Zq.row(q)).rowwise().squaredNorm();
        Vec w = (-scale * d2.array()).exp().matrix();
        double s = w.sum();
        if (!(s >= kNwWeightFloor)) throw DegenerateQueryError(static_cast<long>(q));
        Wt.row(q) = (w / s).transpose();
    }
    return Wt;
}

// Weighted averages are taken of offsets from the first training target, so constant
// targets come back exactly.
inline Mat nw_predict(const NwModel& model, const Mat& Zq) {
    const Eigen::RowVectorXd anchor = model.targets.row(0);
    const Mat offsets = model.targets.rowwise() - anchor;
    Mat out;
    if (std::isinf(model.bandwidth)) {
        require(Zq.cols() == model.Z_train.cols(), Errc::shape_mismatch, "query dimension differs from training dimension");
        out.resize(Zq.rows(), model.targets.cols());
        out.rowwise() = offsets.colwise().mean();
    } else {
        out = nw_weights(model, Zq) * offsets;
    }
    out.rowwise() += anchor;
    return out;
}

struct BandwidthCv {
    double best = 0.0;
    std::vector<double> grid;
    std::vector<double> errors; // mean held-out squared error per grid value (+inf when degenerate)
};

inline BandwidthCv nw_bandwidth_cv_report(const Mat& Z, const Mat& targets, const std::vector<double>& grid, int folds,
                                         std::uint64_t seed = 0) {
    require(!grid.empty(), Errc::invalid_parameter, "bandwidth grid is empty");
    require(folds >= 2, Errc::invalid_parameter, "need at least two folds");
    require(Z.rows() == targets.rows(), Errc::shape_mismatch, "Z and targets row counts differ");
    if (Z.rows() < folds)
        throw Error(Errc::fold_size, "n = " + std::to_string(Z.rows()) + " is smaller than folds = " + std::to_string(folds));
    for (double h : grid) require(h > 0.0, Errc::invalid_parameter, "bandwidths must be positive");
    Rng rng(seed);
    auto members = fold_members(kfold_assignment(Z.rows(), folds, rng.permutation(Z.rows())), folds);

    BandwidthCv cv;
    cv.grid = grid;
    for (double h : grid) {
        double sse = 0.0;
        for (int f = 0; f < folds && std::isfinite(sse); ++f) {
            const IndexList& held = members[static_cast<std::size_t>(f)];
            IndexList rest = complement(held, Z.rows());
            try {
                NwModel m = nw_fit(take_rows(Z, rest), take_rows(targets, rest), h);
                sse += (nw_predict(m, take_rows(Z, held)) - take_rows(targets, held)).squaredNorm();
            } catch (const DegenerateQueryError&) {
                sse = std::numeric_limits<double>::infinity();
            }
        }
        cv.errors.push_back(sse / static_cast<double>(Z.rows()));
    }
    double best_err = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double e = cv.errors[i];
        if (!std::isfinite(e)) continue;
        if (!found || e < best_err || (e == best_err && grid[i] > cv.best)) {
            best_err = e;
            cv.best = grid[i];
            found = true;
        }
    }
    if (!found) throw Error(Errc::degenerate_query, "every bandwidth in the grid produced a degenerate query");
    return cv;
}

inline double nw_bandwidth_cv(const Mat& Z, const Mat& targets, const std::vector<double>& grid, int folds,
                              std::uint64_t seed = 0) {
    return nw_bandwidth_cv_report(Z, targets, grid, folds, seed).best;
}

inline std::vector<double> default_bandwidth_grid() { return {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0}; }

// Median pairwise distance over the first min(n, 200) rows.
inline double median_pairwise_distance(const Mat& Z) {
    const Index k = std::min<Index>(Z.rows(), 200);
    std::vector<double> d;
    for (Index i = 0; i < k; ++i)
        for (Index j = i + 1; j < k; ++j) d.push_back((Z.row(i) - Z.row(j)).norm());
    if (d.empty()) return 1.0;
    std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
    double med = d[d.size() / 2];
    return med > 0.0 ? med : 1.0;
}

// Multiples of the median pairwise distance, plus +infinity (the constant fit).
inline std::vector<double> scaled_bandwidth_grid(const Mat& Z) {
    const double med = median_pairwise_distance(Z);
    std::vector<double> grid;
    for (double f : {0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0, 2.0}) grid.push_back(f * med);
    grid.push_back(std::numeric_limits<double>::infinity());
    return grid;
}

} // namespace debinet
