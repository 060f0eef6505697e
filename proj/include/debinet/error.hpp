#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace debinet {

enum class Errc {
    invalid_size,
    invalid_sparsity,
    invalid_parameter,
    shape_mismatch,
    not_converged,
    nothing_selected,
    ols_infeasible,
    diverged,
    unsupported_kernel,
    invalid_matrix,
    matrix_too_large,
    degenerate_query,
    singular_design,
    fold_size,
    non_correctable,
    undefined_variance,
    missing_file,
    non_numeric_cell,
    missing_column,
    malformed_csv,
    invalid_level,
    empty_input,
    invalid_config,
};

inline const char* errc_name(Errc c) {
    switch (c) {
    case Errc::invalid_size: return "invalid-size";
    case Errc::invalid_sparsity: return "invalid-sparsity";
    case Errc::invalid_parameter: return "invalid-parameter";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::not_converged: return "not-converged";
    case Errc::nothing_selected: return "nothing-selected";
    case Errc::ols_infeasible: return "ols-infeasible";
    case Errc::diverged: return "diverged";
    case Errc::unsupported_kernel: return "unsupported-kernel";
    case Errc::invalid_matrix: return "invalid-matrix";
    case Errc::matrix_too_large: return "matrix-too-large";
    case Errc::degenerate_query: return "degenerate-query";
    case Errc::singular_design: return "singular-design";
    case Errc::fold_size: return "fold-size";
    case Errc::non_correctable: return "non-correctable";
    case Errc::undefined_variance: return "undefined-variance";
    case Errc::missing_file: return "missing-file";
    case Errc::non_numeric_cell: return "non-numeric-cell";
    case Errc::missing_column: return "missing-column";
    case Errc::malformed_csv: return "malformed-csv";
    case Errc::invalid_level: return "invalid-level";
    case Errc::empty_input: return "empty-input";
    case Errc::invalid_config: return "invalid-config";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// Raised when a solver exhausts its sweep budget. `column` is set for nodewise fits.
class ConvergenceError : public Error {
public:
    ConvergenceError(double kkt, long column, const std::string& what)
        : Error(Errc::not_converged, what), kkt_(kkt), column_(column) {}
    double kkt_residual() const noexcept { return kkt_; }
    long column() const noexcept { return column_; }

private:
    double kkt_;
    long column_;
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(long epoch)
        : Error(Errc::diverged, "non-finite loss at epoch " + std::to_string(epoch)), epoch_(epoch) {}
    long epoch() const noexcept { return epoch_; }

private:
    long epoch_;
};

class SingularDesignError : public Error {
public:
    explicit SingularDesignError(double cond)
        : Error(Errc::singular_design, "condition number " + std::to_string(cond)), cond_(cond) {}
    double condition_number() const noexcept { return cond_; }

private:
    double cond_;
};

class DegenerateQueryError : public Error {
public:
    explicit DegenerateQueryError(long row)
        : Error(Errc::degenerate_query, "all kernel weights vanish at query row " + std::to_string(row)),
          row_(row) {}
    long row() const noexcept { return row_; }

private:
    long row_;
};

class CsvError : public Error {
public:
    CsvError(Errc code, long row, std::string column, const std::string& what)
        : Error(code, what), row_(row), column_(std::move(column)) {}
    long row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    long row_;
    std::string column_;
};

inline void require(bool ok, Errc code, const std::string& what) {
    if (!ok) throw Error(code, what);
}

} // namespace debinet
