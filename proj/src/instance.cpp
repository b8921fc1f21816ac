#include "l2sep/instance.hpp"

#include <cmath>
#include <sstream>

namespace l2sep {

const char* to_string(RowSense s) {
    switch (s) {
        case RowSense::Le: return "le";
        case RowSense::Eq: return "eq";
        case RowSense::Ge: return "ge";
    }
    return "?";
}

const char* to_string(ClassTag c) {
    switch (c) {
        case ClassTag::Packing: return "packing";
        case ClassTag::BinPacking: return "bin_packing";
        case ClassTag::MaxCut: return "max_cut";
        case ClassTag::CombAuction: return "comb_auction";
        case ClassTag::IndepSet: return "indep_set";
        case ClassTag::Custom: return "custom";
    }
    return "?";
}

RowSense row_sense_from_string(const std::string& s) {
    if (s == "le") return RowSense::Le;
    if (s == "eq") return RowSense::Eq;
    if (s == "ge") return RowSense::Ge;
    throw ValidationError("unknown row sense '" + s + "'");
}

ClassTag class_tag_from_string(const std::string& s) {
    for (ClassTag c : {ClassTag::Packing, ClassTag::BinPacking, ClassTag::MaxCut, ClassTag::CombAuction,
                       ClassTag::IndepSet, ClassTag::Custom})
        if (s == to_string(c)) return c;
    throw ValidationError("unknown class tag '" + s + "'");
}

int MilpInstance::num_integer() const {
    int k = 0;
    for (bool b : integer) k += b ? 1 : 0;
    return k;
}

std::size_t MilpInstance::nnz() const {
    std::size_t k = 0;
    for (const auto& r : rows) k += r.idx.size();
    return k;
}

double MilpInstance::objective_value(const std::vector<double>& x) const {
    double z = 0.0;
    for (int j = 0; j < num_vars(); ++j) z += objective[j] * x[j];
    return z;
}

double MilpInstance::max_violation(const std::vector<double>& x) const {
    double v = 0.0;
    for (int j = 0; j < num_vars(); ++j) {
        v = std::max(v, lb[j] - x[j]);
        v = std::max(v, x[j] - ub[j]);
    }
    for (const auto& r : rows) {
        const double a = r.activity(x);
        if (r.sense != RowSense::Ge) v = std::max(v, a - r.rhs);
        if (r.sense != RowSense::Le) v = std::max(v, r.rhs - a);
    }
    return v;
}

bool MilpInstance::is_feasible(const std::vector<double>& x, double tol) const {
    return max_violation(x) <= tol;
}

bool MilpInstance::is_integral(const std::vector<double>& x, double tol) const {
    for (int j = 0; j < num_vars(); ++j)
        if (integer[j] && std::abs(x[j] - std::round(x[j])) > tol) return false;
    return true;
}

bool MilpInstance::has_finite_box() const {
    for (int j = 0; j < num_vars(); ++j)
        if (!std::isfinite(lb[j]) || !std::isfinite(ub[j])) return false;
    return true;
}

void MilpInstance::validate() const {
    const auto n = objective.size();
    if (lb.size() != n || ub.size() != n || integer.size() != n)
        throw ValidationError("instance '" + name + "': bound/integrality vectors do not match num_vars");
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(objective[j]))
            throw ValidationError("instance '" + name + "': non-finite objective coefficient at column " +
                                  std::to_string(j));
        if (std::isnan(lb[j]) || std::isnan(ub[j]) || lb[j] > ub[j]) {
            std::ostringstream os;
            os << "instance '" << name << "': column " << j << " has lb " << lb[j] << " > ub " << ub[j];
            throw ValidationError(os.str());
        }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.idx.size() != r.coef.size())
            throw ValidationError("instance '" + name + "': row " + std::to_string(i) + " index/coef size mismatch");
        if (!std::isfinite(r.rhs))
            throw ValidationError("instance '" + name + "': row " + std::to_string(i) + " has non-finite rhs");
        for (std::size_t k = 0; k < r.idx.size(); ++k) {
            if (r.idx[k] < 0 || static_cast<std::size_t>(r.idx[k]) >= n)
                throw ValidationError("instance '" + name + "': row " + std::to_string(i) + " references column " +
                                      std::to_string(r.idx[k]) + " out of range");
            if (!std::isfinite(r.coef[k]))
                throw ValidationError("instance '" + name + "': row " + std::to_string(i) +
                                      " has a non-finite coefficient");
        }
    }
}

SparseRow make_row(std::vector<int> idx, std::vector<double> coef, RowSense sense, double rhs) {
    SparseRow r;
    r.idx = std::move(idx);
    r.coef = std::move(coef);
    r.sense = sense;
    r.rhs = rhs;
    return r;
}

}  // namespace l2sep
