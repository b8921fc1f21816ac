#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "l2sep/bnc.hpp"
#include "l2sep/instance.hpp"
#include "l2sep/separators.hpp"

namespace l2sep {

inline constexpr int kVarFeatures = 17;
inline constexpr int kConsFeatures = 25 + kNumSeparators;

enum class SepFeatures : std::uint8_t { Rich, Binary };  // [bit, one-hot] or [bit]
const char* to_string(SepFeatures f);
SepFeatures sep_features_from_string(const std::string& s);
inline int sep_feature_dim(SepFeatures f) { return f == SepFeatures::Rich ? kNumSeparators + 1 : 1; }

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct TripletGraph {
    RowMatrix V;  // n x 17
    RowMatrix C;  // m_total x (25 + M)
    RowMatrix S;  // M x (M + 1) or M x 1
    /// Variable-constraint edges (constraint, variable, weight); weights are A_ij scaled by the row's max |A_ij|.
    std::vector<std::tuple<int, int, double>> edges;
    /// Mean-aggregation operators built from `edges`.
    SparseMat to_cons;  // m x n
    SparseMat to_vars;  // n x m

    int num_vars() const { return static_cast<int>(V.rows()); }
    int num_cons() const { return static_cast<int>(C.rows()); }
    void finalize();  // builds the aggregation operators; call after editing edges
    void set_config(SeparatorConfig c);  // rewrites the activation column of S
    std::uint64_t fingerprint() const;
};

/// Layout of variable features.
namespace vfeat {
enum : int { ObjCoef, TypeBinary, TypeInteger, TypeImplInt, TypeContinuous, HasLb, HasUb, RedCost, SolVal, SolFrac,
             AtLb, AtUb, Age, BasisLower, BasisBasic, BasisUpper, BasisZero };
}
/// Layout of constraint features. The origin one-hot occupies [TypeOriginal, TypeOriginal + M]:
/// slot 0 marks instance rows, slot 1 + k cuts from separator k.
namespace cfeat {
enum : int { IsCut, TypeOriginal, Rank = TypeOriginal + kNumSeparators + 1, NnzFrac, Bias, AtLhs, AtRhs, DualSol, BasisLower,
             BasisBasic, BasisUpper, BasisZero, Age, LpsSinceCreation, IntCols, IsIntegral, IsRemovable, IsInLp,
             Violation, RelViolation, ObjParallelism, ExpImprovement, SupportScore, IntSupport, SelectionScore };
}
static_assert(cfeat::SelectionScore + 1 == kConsFeatures);

/// Triplet graph for `inst` at the LP state `snap` with separator configuration `config`.
TripletGraph encode(const MilpInstance& inst, const LpSnapshot& snap, SeparatorConfig config,
                    SepFeatures sep = SepFeatures::Rich);

struct NetArch {
    int hidden = 64;
    int heads = 4;
    double dropout = 0.1;
    SepFeatures sep = SepFeatures::Rich;
    std::string to_string() const;
    std::uint64_t hash() const;
    bool operator==(const NetArch&) const = default;
};

/// Per-feature affine input normalisation, frozen once computed.
struct InputNorm {
    Eigen::RowVectorXd mean, inv_std;
    bool frozen = false;
};

class RewardNet {
public:
    explicit RewardNet(NetArch arch = {});

    const NetArch& arch() const { return arch_; }
    std::size_t param_count() const { return static_cast<std::size_t>(theta_.size()); }
    Eigen::VectorXd& params() { return theta_; }
    const Eigen::VectorXd& params() const { return theta_; }
    /// Offset of the scalar head's final layer (weights then bias) within params().
    std::size_t head_offset() const;

    void init(std::uint64_t seed);  // Glorot-uniform weights, biases U(-1/sqrt(in), 1/sqrt(in))

    double forward(const TripletGraph& g, bool train_mode = false, std::uint64_t seed = 0) const;
    /// Exact gradient of forward(g, false) with respect to params().
    Eigen::VectorXd gradient(const TripletGraph& g) const;
    /// Value and gradient in one pass; train_mode enables attention dropout with the given seed.
    double value_and_gradient(const TripletGraph& g, Eigen::VectorXd& grad, bool train_mode = false,
                              std::uint64_t seed = 0) const;

    /// Computes normalisation statistics from `graphs` unless already frozen.
    void fit_input_norm(const std::vector<const TripletGraph*>& graphs);
    const InputNorm& norm(int block) const { return norm_[block]; }
    InputNorm& norm(int block) { return norm_[block]; }

    nlohmann::json to_json() const;
    static RewardNet from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static RewardNet load(const std::filesystem::path& path, const NetArch& expected);

private:
    struct Linear {
        std::size_t off = 0;
        int in = 0, out = 0;
    };
    struct Cache;
    Linear add_linear(int in, int out);
    double run(const TripletGraph& g, bool train, std::uint64_t seed, Eigen::VectorXd* grad) const;

    NetArch arch_;
    Eigen::VectorXd theta_;
    InputNorm norm_[3];  // V, C, S
    Linear embed_[3][2];
    Linear conv_self_[6], conv_msg_[6];
    Linear att_q_, att_k_, att_v_, att_skip_;
    Linear head1_, head2_;
};

struct Sample {
    const TripletGraph* graph = nullptr;
    double reward = 0.0;
};

struct FitOptions {
    int epochs = 1;
    double lr = 1e-3;
    int batch = 64;
    /// Stop after this many optimiser steps in total (0: no cap).
    long max_steps = 0;
    bool dropout = true;
    std::uint64_t seed = 0;
};

/// Adaptive-moment optimiser state (first and second moments plus step count).
struct AdamState {
    Eigen::VectorXd m, v;
    long t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);
};

/// Squared-error regression on `buffer`; returns the mean training loss of each epoch.
std::vector<double> fit(RewardNet& net, const std::vector<Sample>& buffer, const FitOptions& opts,
                        AdamState* state = nullptr);
double mean_loss(const RewardNet& net, const std::vector<Sample>& buffer);

/// Small two-layer perceptron over dense feature vectors, used by the synthetic bandit environment.
class Mlp {
public:
    Mlp(int in, int hidden);
    std::size_t param_count() const { return static_cast<std::size_t>(theta_.size()); }
    Eigen::VectorXd& params() { return theta_; }
    const Eigen::VectorXd& params() const { return theta_; }
    void init(std::uint64_t seed);
    double forward(const Eigen::VectorXd& x) const;
    double value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
    /// Offset of the output layer (weights then bias) within params().
    std::size_t head_offset() const { return static_cast<std::size_t>(hidden_) * (in_ + 1); }

private:
    int in_, hidden_;
    Eigen::VectorXd theta_;
};

std::vector<double> fit_mlp(Mlp& net, const std::vector<std::pair<Eigen::VectorXd, double>>& data,
                            const FitOptions& opts, AdamState* state = nullptr);

}  // namespace l2sep
