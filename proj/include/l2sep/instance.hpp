#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "l2sep/common.hpp"

namespace l2sep {

enum class RowSense : std::uint8_t { Le, Eq, Ge };

enum class ClassTag : std::uint8_t { Packing, BinPacking, MaxCut, CombAuction, IndepSet, Custom };

const char* to_string(RowSense s);
const char* to_string(ClassTag c);
RowSense row_sense_from_string(const std::string& s);
ClassTag class_tag_from_string(const std::string& s);

/// Sparse linear row  sum_k coef[k] * x[idx[k]]  (sense)  rhs.
struct SparseRow {
    std::vector<int> idx;
    std::vector<double> coef;
    RowSense sense = RowSense::Le;
    double rhs = 0.0;

    double activity(const std::vector<double>& x) const {
        double a = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k) a += coef[k] * x[idx[k]];
        return a;
    }
    bool operator==(const SparseRow&) const = default;
};

/// Mixed-integer linear program in minimization form.
struct MilpInstance {
    std::string name;
    ClassTag class_tag = ClassTag::Custom;
    std::vector<double> objective;  // c, length n
    std::vector<SparseRow> rows;    // A, sense, b
    std::vector<double> lb;
    std::vector<double> ub;
    std::vector<bool> integer;      // integrality mask I
    /// Generator provenance (parameters, chosen distributions). Free-form.
    std::map<std::string, std::string> metadata;

    int num_vars() const { return static_cast<int>(objective.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }
    int num_integer() const;
    std::size_t nnz() const;
    double objective_value(const std::vector<double>& x) const;

    /// Max violation of rows and bounds at x (0 when feasible).
    double max_violation(const std::vector<double>& x) const;
    bool is_feasible(const std::vector<double>& x, double tol = 1e-6) const;
    bool is_integral(const std::vector<double>& x, double tol = 1e-6) const;
    bool has_finite_box() const;

    /// Throws ValidationError on broken invariants.
    void validate() const;

    bool operator==(const MilpInstance&) const = default;
};

/// Point plus objective. `integral` records whether integrality on I was checked.
struct Assignment {
    enum class Status : std::uint8_t { Optimal, Infeasible };
    Status status = Status::Infeasible;
    std::vector<double> values;
    double objective = kInf;
};

/// Row builder helper used by generators and tests.
SparseRow make_row(std::vector<int> idx, std::vector<double> coef, RowSense sense, double rhs);

}  // namespace l2sep
