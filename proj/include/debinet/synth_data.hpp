#pragma once

#include "error.hpp"
#include "linalg.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace debinet {

struct Dataset {
    Mat X;
    Vec y;
    std::optional<Vec> beta_true;
    double noise_sd = 1.0;
    std::vector<std::string> column_names;

    void validate() const {
        require(X.rows() == y.size(), Errc::shape_mismatch, "X rows differ from length of y");
        if (beta_true)
            require(beta_true->size() == X.cols(), Errc::shape_mismatch, "beta_true length differs from p");
    }
};

// Generator output that already carries the D/Z split (the nonlinear regimes).
struct PlmData {
    Mat D;
    Mat Z;
    Vec y;
    Vec beta_true;
    double noise_sd = 1.0;

    Dataset as_dataset() const {
        Dataset ds;
        ds.X.resize(D.rows(), D.cols() + Z.cols());
        ds.X << D, Z;
        ds.y = y;
        ds.noise_sd = noise_sd;
        return ds;
    }
};

enum class Regime { table1, table2, complex };

struct GenSpec {
    Regime regime = Regime::table2;
    Index n = 100;
    Index p = 10;
    Index k = 1;
    std::uint64_t seed = 0;
    double noise_sd = 1.0;
};

namespace detail {
enum Stream : std::uint64_t { inputs = 0, noise_d = 1, noise_y = 2 };
}

// D = 50 sum sin Z_j + e1, y = D + sum cosh Z_j + e2, from given inputs.
inline PlmData table1_from_inputs(const Mat& Z, std::uint64_t seed, double noise_sd = 1.0) {
    require(Z.rows() >= 1, Errc::invalid_size, "n must be positive");
    Rng nd(derive_seed(seed, detail::noise_d));
    Rng ny(derive_seed(seed, detail::noise_y));
    const Index n = Z.rows();
    PlmData out;
    out.Z = Z;
    out.D.resize(n, 1);
    out.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        double s = 0.0, c = 0.0;
        for (Index j = 0; j < Z.cols(); ++j) {
            s += std::sin(Z(i, j));
            c += std::cosh(Z(i, j));
        }
        double d = 50.0 * s + noise_sd * nd.normal();
        out.D(i, 0) = d;
        out.y(i) = d + c + noise_sd * ny.normal();
    }
    out.beta_true = Vec::Ones(1);
    out.noise_sd = noise_sd;
    return out;
}

inline PlmData gen_table1(Index n, std::uint64_t seed, double noise_sd = 1.0) {
    require(n >= 1, Errc::invalid_size, "n must be positive");
    Rng rz(derive_seed(seed, detail::inputs));
    return table1_from_inputs(rz.normal_matrix(n, 10), seed, noise_sd);
}

inline Dataset gen_table2(Index n, Index p, Index k, std::uint64_t seed, double noise_sd = 1.0) {
    require(n >= 1 && p >= 1, Errc::invalid_size, "n and p must be positive");
    require(k >= 1 && k <= p, Errc::invalid_sparsity, "need 1 <= k <= p");
    Rng rx(derive_seed(seed, detail::inputs));
    Rng ry(derive_seed(seed, detail::noise_y));
    Dataset ds;
    ds.X = rx.normal_matrix(n, p);
    Vec theta = Vec::Zero(p);
    theta.head(k).setOnes();
    ds.y = ds.X.leftCols(k).rowwise().sum();
    for (Index i = 0; i < n; ++i) ds.y(i) += noise_sd * ry.normal();
    ds.beta_true = theta;
    ds.noise_sd = noise_sd;
    return ds;
}

inline PlmData complex_from_inputs(const Mat& T, std::uint64_t seed, double noise_sd = 1.0) {
    require(T.rows() >= 1, Errc::invalid_size, "n must be positive");
    require(T.cols() == 5, Errc::shape_mismatch, "complex regime uses 5 inputs");
    Rng nd(derive_seed(seed, detail::noise_d));
    Rng ny(derive_seed(seed, detail::noise_y));
    const Index n = T.rows();
    PlmData out;
    out.Z = T;
    out.D.resize(n, 1);
    out.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        double t1 = T(i, 0), t2 = std::max(T(i, 1), -0.999), t3 = T(i, 2), t4 = T(i, 3), t5 = T(i, 4);
        double d = std::sin(t1) + std::log(t2 + 1.0) + 1.0 / (1.0 + t3) + std::max(0.0, t4) + t5 * t5 +
                   noise_sd * nd.normal();
        out.D(i, 0) = d;
        out.y(i) = d + std::cosh(t1) + t2 + t3 * t4 + noise_sd * ny.normal();
    }
    out.beta_true = Vec::Ones(1);
    out.noise_sd = noise_sd;
    return out;
}

inline PlmData gen_complex(Index n, std::uint64_t seed, double noise_sd = 1.0) {
    require(n >= 1, Errc::invalid_size, "n must be positive");
    Rng rt(derive_seed(seed, detail::inputs));
    return complex_from_inputs(rt.normal_matrix(n, 5), seed, noise_sd);
}

inline Dataset generate(const GenSpec& spec) {
    switch (spec.regime) {
    case Regime::table1: return gen_table1(spec.n, spec.seed, spec.noise_sd).as_dataset();
    case Regime::table2: return gen_table2(spec.n, spec.p, spec.k, spec.seed, spec.noise_sd);
    case Regime::complex: return gen_complex(spec.n, spec.seed, spec.noise_sd).as_dataset();
    }
    throw Error(Errc::invalid_config, "unknown regime");
}

// ---- CSV ------------------------------------------------------------------

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(std::string s) {
    auto issp = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && issp(static_cast<unsigned char>(s[b]))) ++b;
    return s.substr(b);
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return errno == 0 && end == s.c_str() + s.size();
}
} // namespace detail

// Rows are counted from 1 at the first data line (the header is row 0).
inline Dataset load_csv(const std::string& path, const std::string& target_column) {
    std::ifstream in(path);
    if (!in) throw CsvError(Errc::missing_file, -1, "", "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw CsvError(Errc::malformed_csv, 0, "", "missing header in " + path);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
    std::vector<std::string> header = detail::split_csv_line(line);
    for (auto& h : header) h = detail::trim(h);
    auto it = std::find(header.begin(), header.end(), target_column);
    if (it == header.end())
        throw CsvError(Errc::missing_column, 0, target_column, "target column '" + target_column + "' not found");
    const std::size_t tcol = static_cast<std::size_t>(it - header.begin());

    std::vector<std::vector<double>> rows;
    long row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw CsvError(Errc::malformed_csv, row, "",
                           "row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
        std::vector<double> vals(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!detail::parse_double(detail::trim(cells[c]), vals[c]))
                throw CsvError(Errc::non_numeric_cell, row, header[c],
                               "non-numeric cell at row " + std::to_string(row) + ", column '" + header[c] + "'");
        }
        rows.push_back(std::move(vals));
    }

    Dataset ds;
    const Index n = static_cast<Index>(rows.size());
    const Index p = static_cast<Index>(header.size()) - 1;
    ds.X.resize(n, p);
    ds.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        Index j = 0;
        for (std::size_t c = 0; c < header.size(); ++c) {
            double v = rows[static_cast<std::size_t>(i)][c];
            if (c == tcol) ds.y(i) = v;
            else ds.X(i, j++) = v;
        }
    }
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != tcol) ds.column_names.push_back(header[c]);
    return ds;
}

inline void write_csv(const std::string& path, const Dataset& ds, const std::string& target_column = "y") {
    ds.validate();
    std::ofstream out(path);
    if (!out) throw CsvError(Errc::missing_file, -1, "", "cannot write " + path);
    for (Index j = 0; j < ds.X.cols(); ++j) {
        if (static_cast<std::size_t>(j) < ds.column_names.size()) out << ds.column_names[static_cast<std::size_t>(j)];
        else out << 'x' << j;
        out << ',';
    }
    out << target_column << '\n';
    char buf[40];
    for (Index i = 0; i < ds.X.rows(); ++i) {
        for (Index j = 0; j < ds.X.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,", ds.X(i, j));
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g", ds.y(i));
        out << buf << '\n';
    }
}

} // namespace debinet
