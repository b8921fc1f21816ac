#include "l2sep/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "l2sep/instance_io.hpp"
#include "l2sep/rng.hpp"

namespace l2sep {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

const char* to_string(SepFeatures f) { return f == SepFeatures::Rich ? "rich" : "binary"; }

SepFeatures sep_features_from_string(const std::string& s) {
    if (s == "rich") return SepFeatures::Rich;
    if (s == "binary") return SepFeatures::Binary;
    throw ConfigError("unknown separator feature mode '" + s + "' (expected rich or binary)");
}

namespace {

std::uint64_t fnv(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < n; ++k) {
        h ^= p[k];
        h *= 1099511628211ull;
    }
    return h;
}

bool near(double a, double b) { return std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(b)); }

void one_hot_basis(RowMatrix& M, int row, int first, const std::vector<BasisStatus>& st, int k) {
    if (k >= static_cast<int>(st.size())) return;
    M(row, first + static_cast<int>(st[k])) = 1.0;
}

}  // namespace

void TripletGraph::finalize() {
    const int n = num_vars(), m = num_cons();
    std::vector<Eigen::Triplet<double>> tc, tv;
    std::vector<double> deg_c(m, 0.0), deg_v(n, 0.0);
    for (const auto& [i, j, w] : edges) {
        deg_c[i] += 1;
        deg_v[j] += 1;
    }
    for (const auto& [i, j, w] : edges) {
        tc.emplace_back(i, j, w / deg_c[i]);
        tv.emplace_back(j, i, w / deg_v[j]);
    }
    to_cons.resize(m, n);
    to_vars.resize(n, m);
    to_cons.setFromTriplets(tc.begin(), tc.end());
    to_vars.setFromTriplets(tv.begin(), tv.end());
}

void TripletGraph::set_config(SeparatorConfig c) {
    for (int k = 0; k < kNumSeparators && k < S.rows(); ++k) S(k, 0) = c.active(static_cast<SeparatorId>(k)) ? 1.0 : 0.0;
}

std::uint64_t TripletGraph::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const RowMatrix* M : {&V, &C, &S}) {
        const long dims[2] = {M->rows(), M->cols()};
        h = fnv(dims, sizeof(dims), h);
        h = fnv(M->data(), sizeof(double) * static_cast<std::size_t>(M->size()), h);
    }
    for (const auto& e : edges) {
        const int ij[2] = {std::get<0>(e), std::get<1>(e)};
        const double w = std::get<2>(e);
        h = fnv(ij, sizeof(ij), h);
        h = fnv(&w, sizeof(w), h);
    }
    return h;
}

TripletGraph encode(const MilpInstance& inst, const LpSnapshot& snap, SeparatorConfig config, SepFeatures sep) {
    const int n = inst.num_vars();
    const int m = static_cast<int>(snap.rows.size());
    if (static_cast<int>(snap.x.size()) != n || static_cast<int>(snap.row_activity.size()) != m)
        throw ValidationError("encode: snapshot holds no solved LP for this instance");

    double cnorm = 0.0;
    for (double c : inst.objective) cnorm += c * c;
    cnorm = cnorm > 0 ? std::sqrt(cnorm) : 1.0;
    const double lps = std::max<double>(1.0, static_cast<double>(snap.lp_solves));

    TripletGraph g;
    g.V = RowMatrix::Zero(n, kVarFeatures);
    for (int j = 0; j < n; ++j) {
        const double lb = snap.col_lb[j], ub = snap.col_ub[j], x = snap.x[j];
        const bool integer = inst.integer[j];
        g.V(j, vfeat::ObjCoef) = inst.objective[j] / cnorm;
        if (integer && lb >= 0 && ub <= 1) g.V(j, vfeat::TypeBinary) = 1;
        else if (integer) g.V(j, vfeat::TypeInteger) = 1;
        else g.V(j, vfeat::TypeContinuous) = 1;
        g.V(j, vfeat::HasLb) = std::isfinite(lb);
        g.V(j, vfeat::HasUb) = std::isfinite(ub);
        g.V(j, vfeat::RedCost) = j < static_cast<int>(snap.reduced_costs.size()) ? snap.reduced_costs[j] / cnorm : 0.0;
        g.V(j, vfeat::SolVal) = x;
        if (integer) {
            const double f = x - std::floor(x);
            g.V(j, vfeat::SolFrac) = f > 1 - 1e-9 ? 0.0 : f;
        }
        g.V(j, vfeat::AtLb) = std::isfinite(lb) && near(x, lb);
        g.V(j, vfeat::AtUb) = std::isfinite(ub) && near(x, ub);
        g.V(j, vfeat::Age) = j < static_cast<int>(snap.col_age.size()) ? snap.col_age[j] / lps : 0.0;
        one_hot_basis(g.V, j, vfeat::BasisLower, snap.basis.cols, j);
    }

    g.C = RowMatrix::Zero(m, kConsFeatures);
    for (int i = 0; i < m; ++i) {
        const auto& r = snap.rows[i];
        const bool cut = i >= snap.num_base_rows;
        double rn = 0.0, dot = 0.0;
        int ints = 0, int_support = 0;
        bool integral = true;
        for (std::size_t k = 0; k < r.idx.size(); ++k) {
            const double a = r.coef[k];
            rn += a * a;
            dot += a * inst.objective[r.idx[k]];
            const bool iv = inst.integer[r.idx[k]];
            const bool ia = std::abs(a - std::round(a)) <= 1e-9;
            ints += iv;
            int_support += iv && ia;
            integral = integral && iv && ia;
        }
        rn = rn > 0 ? std::sqrt(rn) : 1.0;
        const double nnz = static_cast<double>(r.idx.size());
        const double act = snap.row_activity[i];
        const double lo = r.sense == RowSense::Le ? -kInf : r.rhs;
        const double hi = r.sense == RowSense::Ge ? kInf : r.rhs;
        const double viol = std::max({0.0, act - hi, lo - act});
        const double objpar = std::abs(dot) / (rn * cnorm);

        g.C(i, cfeat::IsCut) = cut;
        const int origin = i < static_cast<int>(snap.row_origin.size()) ? snap.row_origin[i] : -1;
        g.C(i, cfeat::TypeOriginal + 1 + origin) = 1;
        g.C(i, cfeat::Rank) = cut ? 1.0 : 0.0;
        g.C(i, cfeat::NnzFrac) = n > 0 ? nnz / n : 0.0;
        g.C(i, cfeat::Bias) = r.rhs / rn;
        g.C(i, cfeat::AtLhs) = std::isfinite(lo) && near(act, lo);
        g.C(i, cfeat::AtRhs) = std::isfinite(hi) && near(act, hi);
        g.C(i, cfeat::DualSol) = i < static_cast<int>(snap.duals.size()) ? snap.duals[i] / (rn * cnorm) : 0.0;
        one_hot_basis(g.C, i, cfeat::BasisLower, snap.basis.rows, i);
        const double age = i < static_cast<int>(snap.row_age.size()) ? snap.row_age[i] : 0.0;
        g.C(i, cfeat::Age) = age / lps;
        g.C(i, cfeat::LpsSinceCreation) = age / std::max<double>(1.0, static_cast<double>(snap.round + 1));
        g.C(i, cfeat::IntCols) = nnz > 0 ? ints / nnz : 0.0;
        g.C(i, cfeat::IsIntegral) = integral && nnz > 0;
        g.C(i, cfeat::IsRemovable) = cut;
        g.C(i, cfeat::IsInLp) = 1.0;
        g.C(i, cfeat::Violation) = viol / rn;
        g.C(i, cfeat::RelViolation) = viol / std::max(1.0, std::abs(r.rhs));
        g.C(i, cfeat::ObjParallelism) = objpar;
        g.C(i, cfeat::ExpImprovement) = cnorm * objpar * viol / rn;
        g.C(i, cfeat::SupportScore) = n > 0 ? 1.0 - nnz / n : 0.0;
        g.C(i, cfeat::IntSupport) = nnz > 0 ? int_support / nnz : 0.0;
        g.C(i, cfeat::SelectionScore) = i < static_cast<int>(snap.row_score.size()) ? snap.row_score[i] : 0.0;

        double amax = 0.0;
        for (double a : r.coef) amax = std::max(amax, std::abs(a));
        for (std::size_t k = 0; k < r.idx.size(); ++k)
            if (r.coef[k] != 0.0) g.edges.emplace_back(i, r.idx[k], r.coef[k] / amax);
    }

    g.S = RowMatrix::Zero(kNumSeparators, sep_feature_dim(sep));
    if (sep == SepFeatures::Rich)
        for (int k = 0; k < kNumSeparators; ++k) g.S(k, 1 + k) = 1.0;
    g.set_config(config);
    g.finalize();
    return g;
}

std::string NetArch::to_string() const {
    return "triplet-gcn/v1 hidden=" + std::to_string(hidden) + " heads=" + std::to_string(heads) +
           " sep=" + l2sep::to_string(sep) + " V=" + std::to_string(kVarFeatures) +
           " C=" + std::to_string(kConsFeatures) + " M=" + std::to_string(kNumSeparators);
}

std::uint64_t NetArch::hash() const {
    const auto s = to_string();
    return fnv(s.data(), s.size());
}

// ---------------------------------------------------------------------------------------------

RewardNet::Linear RewardNet::add_linear(int in, int out) {
    Linear l{static_cast<std::size_t>(theta_.size()), in, out};
    theta_.conservativeResize(theta_.size() + static_cast<long>(in) * out + out);
    return l;
}

RewardNet::RewardNet(NetArch arch) : arch_(arch) {
    const int d = arch_.hidden;
    if (d < 1 || arch_.heads < 1 || d % arch_.heads != 0)
        throw ConfigError("hidden width must be a positive multiple of the head count");
    if (arch_.dropout < 0 || arch_.dropout >= 1) throw ConfigError("dropout must be in [0, 1)");
    const int in[3] = {kVarFeatures, kConsFeatures, sep_feature_dim(arch_.sep)};
    for (int b = 0; b < 3; ++b) {
        embed_[b][0] = add_linear(in[b], d);
        embed_[b][1] = add_linear(d, d);
    }
    for (int k = 0; k < 6; ++k) {
        conv_self_[k] = add_linear(d, d);
        conv_msg_[k] = add_linear(d, d);
    }
    att_q_ = add_linear(d, d);
    att_k_ = add_linear(d, d);
    att_v_ = add_linear(d, d);
    att_skip_ = add_linear(d, d);
    head1_ = add_linear(3 * d, d);
    head2_ = add_linear(d, 1);
    theta_.setZero();
}

std::size_t RewardNet::head_offset() const { return head2_.off; }

void RewardNet::init(std::uint64_t seed) {
    Rng rng(seed);
    theta_.setZero();
    auto glorot = [&](const Linear& l) {
        const double a = std::sqrt(6.0 / (l.in + l.out));
        const long nw = static_cast<long>(l.in) * l.out, off = static_cast<long>(l.off);
        for (long k = 0; k < nw; ++k) theta_[off + k] = rng.uniform(-a, a);
        const double bb = 1.0 / std::sqrt(static_cast<double>(l.in));
        for (long k = 0; k < l.out; ++k) theta_[off + nw + k] = rng.uniform(-bb, bb);
    };
    for (auto& e : embed_)
        for (auto& l : e) glorot(l);
    for (int k = 0; k < 6; ++k) {
        glorot(conv_self_[k]);
        glorot(conv_msg_[k]);
    }
    for (const auto* l : {&att_q_, &att_k_, &att_v_, &att_skip_, &head1_, &head2_}) glorot(*l);
}

namespace {

struct LinView {
    Eigen::Map<const MatrixXd> W;
    Eigen::Map<const VectorXd> b;
};

RowMatrix relu(const RowMatrix& A) { return A.cwiseMax(0.0); }
RowMatrix relu_mask(const RowMatrix& dY, const RowMatrix& A) {
    return (A.array() > 0.0).select(dY, RowMatrix::Zero(dY.rows(), dY.cols()));
}
RowVectorXd col_mean(const RowMatrix& H) {
    if (H.rows() == 0) return RowVectorXd::Zero(H.cols());
    return H.colwise().mean();
}

}  // namespace

struct RewardNet::Cache {
    RowMatrix X[3], A1[3], H1[3], A2[3];
    RowMatrix dst_old[6], agg[6], Z[6];
    RowMatrix S_att_in, Q, K, Vv, Out;
    std::vector<RowMatrix> P, D;  // softmax weights and dropout masks per head
    RowVectorXd g, pre1, u;
};

double RewardNet::run(const TripletGraph& g, bool train, std::uint64_t seed, VectorXd* grad) const {
    const int d = arch_.hidden, H = arch_.heads, dh = d / H;
    auto view = [&](const Linear& l) {
        return LinView{Eigen::Map<const MatrixXd>(theta_.data() + l.off, l.out, l.in),
                       Eigen::Map<const VectorXd>(theta_.data() + l.off + static_cast<std::size_t>(l.in) * l.out, l.out)};
    };
    auto affine = [&](const RowMatrix& X, const Linear& l) -> RowMatrix {
        const auto v = view(l);
        RowMatrix Y = X * v.W.transpose();
        Y.rowwise() += v.b.transpose();
        return Y;
    };

    Cache c;
    const RowMatrix* raw[3] = {&g.V, &g.C, &g.S};
    RowMatrix h[3];
    for (int b = 0; b < 3; ++b) {
        if (raw[b]->cols() != embed_[b][0].in)
            throw ValidationError("graph feature width " + std::to_string(raw[b]->cols()) + " does not match the network (" +
                                  std::to_string(embed_[b][0].in) + ")");
        c.X[b] = *raw[b];
        if (norm_[b].mean.size() == c.X[b].cols() && c.X[b].rows() > 0) {
            c.X[b].rowwise() -= norm_[b].mean;
            c.X[b] = c.X[b].array().rowwise() * norm_[b].inv_std.array();
        }
        c.A1[b] = affine(c.X[b], embed_[b][0]);
        c.H1[b] = relu(c.A1[b]);
        c.A2[b] = affine(c.H1[b], embed_[b][1]);
        h[b] = relu(c.A2[b]);
    }
    enum { Vb, Cb, Sb };
    // (src, dst) per convolution: V->C, C->V, S->V, V->S, S->C, C->S
    const int src[6] = {Vb, Cb, Sb, Vb, Sb, Cb}, dst[6] = {Cb, Vb, Vb, Sb, Cb, Sb};
    auto aggregate = [&](int k, const RowMatrix& hs, long rows) -> RowMatrix {
        if (k == 0) return g.to_cons * hs;
        if (k == 1) return g.to_vars * hs;
        return col_mean(hs).replicate(rows, 1);
    };
    for (int k = 0; k < 6; ++k) {
        c.dst_old[k] = h[dst[k]];
        c.agg[k] = aggregate(k, h[src[k]], h[dst[k]].rows());
        c.Z[k] = affine(c.dst_old[k], conv_self_[k]) + affine(c.agg[k], conv_msg_[k]);
        h[dst[k]] = relu(c.Z[k]);
    }

    // multi-head attention over the separator nodes
    c.S_att_in = h[Sb];
    c.Q = affine(c.S_att_in, att_q_);
    c.K = affine(c.S_att_in, att_k_);
    c.Vv = affine(c.S_att_in, att_v_);
    c.Out = affine(c.S_att_in, att_skip_);
    const long M = c.S_att_in.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Rng rng(seed);
    for (int hd = 0; hd < H; ++hd) {
        RowMatrix sc = c.Q.middleCols(hd * dh, dh) * c.K.middleCols(hd * dh, dh).transpose() * scale;
        for (long i = 0; i < M; ++i) {
            const double mx = sc.row(i).maxCoeff();
            sc.row(i) = (sc.row(i).array() - mx).exp();
            sc.row(i) /= sc.row(i).sum();
        }
        RowMatrix mask = RowMatrix::Ones(M, M);
        if (train && arch_.dropout > 0)
            for (long i = 0; i < M; ++i)
                for (long j = 0; j < M; ++j) mask(i, j) = rng.uniform() < arch_.dropout ? 0.0 : 1.0 / (1.0 - arch_.dropout);
        c.Out.middleCols(hd * dh, dh) += sc.cwiseProduct(mask) * c.Vv.middleCols(hd * dh, dh);
        c.P.push_back(std::move(sc));
        c.D.push_back(std::move(mask));
    }

    c.g.resize(3 * d);
    c.g << col_mean(h[Vb]), col_mean(h[Cb]), col_mean(c.Out);
    const auto v1 = view(head1_), v2 = view(head2_);
    c.pre1 = c.g * v1.W.transpose() + v1.b.transpose();
    c.u = c.pre1.cwiseMax(0.0);
    const double y = (c.u * v2.W.transpose())(0, 0) + v2.b(0);
    if (!grad) return y;

    // ---- reverse pass ----
    grad->setZero(theta_.size());
    auto acc = [&](const Linear& l, const RowMatrix& X, const RowMatrix& dY) -> RowMatrix {
        Eigen::Map<MatrixXd> dW(grad->data() + l.off, l.out, l.in);
        Eigen::Map<VectorXd> db(grad->data() + l.off + static_cast<std::size_t>(l.in) * l.out, l.out);
        if (dY.rows() > 0) {
            dW.noalias() += dY.transpose() * X;
            db += dY.colwise().sum().transpose();
        }
        return dY * view(l).W;
    };
    RowMatrix du(1, d);
    du = v2.W;  // dy = 1
    {
        RowMatrix urow = c.u;
        acc(head2_, urow, RowMatrix::Ones(1, 1));
    }
    RowMatrix dpre1 = relu_mask(du, c.pre1);
    RowMatrix gin = c.g;
    const RowMatrix dg = acc(head1_, gin, dpre1);

    RowMatrix dh_[3];
    auto mean_back = [&](const RowMatrix& dmean, long rows) -> RowMatrix {
        if (rows == 0) return RowMatrix::Zero(0, dmean.cols());
        return (dmean / static_cast<double>(rows)).replicate(rows, 1);
    };
    dh_[Vb] = mean_back(dg.middleCols(0, d), h[Vb].rows());
    dh_[Cb] = mean_back(dg.middleCols(d, d), h[Cb].rows());
    const RowMatrix dOut = mean_back(dg.middleCols(2 * d, d), M);

    RowMatrix dS = acc(att_skip_, c.S_att_in, dOut);
    RowMatrix dQ = RowMatrix::Zero(M, d), dK = RowMatrix::Zero(M, d), dVv = RowMatrix::Zero(M, d);
    for (int hd = 0; hd < H; ++hd) {
        const RowMatrix dO = dOut.middleCols(hd * dh, dh);
        const RowMatrix Ad = c.P[hd].cwiseProduct(c.D[hd]);
        dVv.middleCols(hd * dh, dh) = Ad.transpose() * dO;
        const RowMatrix dA = (dO * c.Vv.middleCols(hd * dh, dh).transpose()).cwiseProduct(c.D[hd]);
        RowMatrix dsc(M, M);
        for (long i = 0; i < M; ++i) {
            const double s = dA.row(i).dot(c.P[hd].row(i));
            dsc.row(i) = c.P[hd].row(i).array() * (dA.row(i).array() - s);
        }
        dQ.middleCols(hd * dh, dh) = dsc * c.K.middleCols(hd * dh, dh) * scale;
        dK.middleCols(hd * dh, dh) = dsc.transpose() * c.Q.middleCols(hd * dh, dh) * scale;
    }
    dS += acc(att_q_, c.S_att_in, dQ);
    dS += acc(att_k_, c.S_att_in, dK);
    dS += acc(att_v_, c.S_att_in, dVv);
    dh_[Sb] = dS;

    for (int k = 5; k >= 0; --k) {
        const RowMatrix dZ = relu_mask(dh_[dst[k]], c.Z[k]);
        dh_[dst[k]] = acc(conv_self_[k], c.dst_old[k], dZ);
        const RowMatrix dagg = acc(conv_msg_[k], c.agg[k], dZ);
        if (k == 0) dh_[src[k]] += g.to_cons.transpose() * dagg;
        else if (k == 1) dh_[src[k]] += g.to_vars.transpose() * dagg;
        else if (dh_[src[k]].rows() > 0)
            dh_[src[k]] += mean_back(dagg.colwise().sum(), dh_[src[k]].rows());
    }
    for (int b = 0; b < 3; ++b) {
        const RowMatrix dA2 = relu_mask(dh_[b], c.A2[b]);
        const RowMatrix dH1 = acc(embed_[b][1], c.H1[b], dA2);
        acc(embed_[b][0], c.X[b], relu_mask(dH1, c.A1[b]));
    }
    return y;
}

double RewardNet::forward(const TripletGraph& g, bool train_mode, std::uint64_t seed) const {
    return run(g, train_mode, seed, nullptr);
}

VectorXd RewardNet::gradient(const TripletGraph& g) const {
    VectorXd grad;
    run(g, false, 0, &grad);
    return grad;
}

double RewardNet::value_and_gradient(const TripletGraph& g, VectorXd& grad, bool train_mode, std::uint64_t seed) const {
    return run(g, train_mode, seed, &grad);
}

void RewardNet::fit_input_norm(const std::vector<const TripletGraph*>& graphs) {
    for (int b = 0; b < 3; ++b) {
        if (norm_[b].frozen) continue;
        const int w = embed_[b][0].in;
        RowVectorXd s = RowVectorXd::Zero(w), s2 = RowVectorXd::Zero(w);
        double n = 0;
        for (const auto* g : graphs) {
            const RowMatrix& X = b == 0 ? g->V : b == 1 ? g->C : g->S;
            if (X.cols() != w) continue;
            s += X.colwise().sum();
            s2 += X.array().square().matrix().colwise().sum();
            n += static_cast<double>(X.rows());
        }
        norm_[b].mean = RowVectorXd::Zero(w);
        norm_[b].inv_std = RowVectorXd::Ones(w);
        if (n > 0) {
            norm_[b].mean = s / n;
            for (int k = 0; k < w; ++k) {
                const double var = std::max(0.0, s2[k] / n - norm_[b].mean[k] * norm_[b].mean[k]);
                norm_[b].inv_std[k] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
            }
        }
        norm_[b].frozen = true;
    }
}

nlohmann::json RewardNet::to_json() const {
    nlohmann::json j;
    j["format"] = "l2sep-reward-net";
    j["version"] = 1;
    j["arch"] = {{"hidden", arch_.hidden}, {"heads", arch_.heads}, {"dropout", arch_.dropout},
                 {"sep_features", to_string(arch_.sep)}};
    j["arch_hash"] = arch_.hash();
    j["params"] = std::vector<double>(theta_.data(), theta_.data() + theta_.size());
    nlohmann::json norms = nlohmann::json::array();
    for (const auto& nm : norm_) {
        norms.push_back({{"frozen", nm.frozen},
                         {"mean", std::vector<double>(nm.mean.data(), nm.mean.data() + nm.mean.size())},
                         {"inv_std", std::vector<double>(nm.inv_std.data(), nm.inv_std.data() + nm.inv_std.size())}});
    }
    j["input_norm"] = norms;
    return j;
}

RewardNet RewardNet::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "l2sep-reward-net") throw ParseError("checkpoint", "not a reward-net checkpoint");
    NetArch a;
    const auto& ar = j.at("arch");
    a.hidden = ar.at("hidden").get<int>();
    a.heads = ar.at("heads").get<int>();
    a.dropout = ar.at("dropout").get<double>();
    a.sep = sep_features_from_string(ar.at("sep_features").get<std::string>());
    if (j.at("arch_hash").get<std::uint64_t>() != a.hash())
        throw ValidationError("checkpoint architecture hash does not match its architecture description");
    RewardNet net(a);
    const auto p = j.at("params").get<std::vector<double>>();
    if (p.size() != net.param_count())
        throw ValidationError("checkpoint has " + std::to_string(p.size()) + " parameters, expected " +
                              std::to_string(net.param_count()));
    net.theta_ = Eigen::Map<const VectorXd>(p.data(), static_cast<long>(p.size()));
    const auto& norms = j.at("input_norm");
    for (int b = 0; b < 3 && b < static_cast<int>(norms.size()); ++b) {
        const auto mean = norms[b].at("mean").get<std::vector<double>>();
        const auto inv = norms[b].at("inv_std").get<std::vector<double>>();
        net.norm_[b].mean = Eigen::Map<const RowVectorXd>(mean.data(), static_cast<long>(mean.size()));
        net.norm_[b].inv_std = Eigen::Map<const RowVectorXd>(inv.data(), static_cast<long>(inv.size()));
        net.norm_[b].frozen = norms[b].at("frozen").get<bool>();
    }
    return net;
}

void RewardNet::save(const std::filesystem::path& path) const { write_text_file(path, to_json().dump() + "\n"); }

RewardNet RewardNet::load(const std::filesystem::path& path, const NetArch& expected) {
    const auto j = read_json_file(path);
    const auto stored = j.value("arch_hash", std::uint64_t{0});
    if (stored != expected.hash())
        throw ValidationError(path.string() + ": architecture hash mismatch (checkpoint " + std::to_string(stored) +
                              ", expected " + std::to_string(expected.hash()) + " for " + expected.to_string() + ")");
    return from_json(j);
}

// ---------------------------------------------------------------------------------------------

void AdamState::step(VectorXd& theta, const VectorXd& grad, double lr) {
    if (m.size() != theta.size()) {
        m = VectorXd::Zero(theta.size());
        v = VectorXd::Zero(theta.size());
        t = 0;
    }
    ++t;
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1 - std::pow(beta2, static_cast<double>(t));
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

namespace {

template <class Grad>
std::vector<double> minibatch_loop(std::size_t n, VectorXd& theta, const FitOptions& opts, AdamState& adam, Grad&& loss_grad) {
    if (n == 0) throw ValidationError("fit: empty buffer");
    if (opts.batch < 1 || opts.epochs < 0) throw ConfigError("fit: batch must be >= 1 and epochs >= 0");
    Rng rng(opts.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> trace;
    long steps = 0;
    VectorXd g(theta.size()), gi(theta.size());
    for (int e = 0; e < opts.epochs; ++e) {
        rng.shuffle(order);
        double total = 0.0;
        std::size_t seen = 0;
        for (std::size_t s = 0; s < n; s += static_cast<std::size_t>(opts.batch)) {
            if (opts.max_steps > 0 && steps >= opts.max_steps) break;
            const std::size_t end = std::min(n, s + static_cast<std::size_t>(opts.batch));
            g.setZero();
            for (std::size_t k = s; k < end; ++k) {
                total += loss_grad(order[k], gi, rng.next());
                g += gi;
            }
            g /= static_cast<double>(end - s);
            seen += end - s;
            adam.step(theta, g, opts.lr);
            ++steps;
        }
        if (seen > 0) trace.push_back(total / static_cast<double>(seen));
        if (opts.max_steps > 0 && steps >= opts.max_steps) break;
    }
    return trace;
}

}  // namespace

std::vector<double> fit(RewardNet& net, const std::vector<Sample>& buffer, const FitOptions& opts, AdamState* state) {
    if (buffer.empty()) throw ValidationError("fit: empty buffer");
    std::vector<const TripletGraph*> graphs;
    for (const auto& s : buffer) graphs.push_back(s.graph);
    net.fit_input_norm(graphs);
    AdamState local;
    AdamState& adam = state ? *state : local;
    return minibatch_loop(buffer.size(), net.params(), opts, adam, [&](std::size_t i, VectorXd& gi, std::uint64_t seed) {
        const double y = net.value_and_gradient(*buffer[i].graph, gi, opts.dropout, seed);
        const double r = y - buffer[i].reward;
        gi *= 2 * r;
        return r * r;
    });
}

double mean_loss(const RewardNet& net, const std::vector<Sample>& buffer) {
    if (buffer.empty()) return 0.0;
    double s = 0.0;
    for (const auto& b : buffer) {
        const double r = net.forward(*b.graph) - b.reward;
        s += r * r;
    }
    return s / static_cast<double>(buffer.size());
}

// ---------------------------------------------------------------------------------------------

Mlp::Mlp(int in, int hidden) : in_(in), hidden_(hidden) {
    theta_ = VectorXd::Zero(static_cast<long>(hidden) * in + hidden + hidden + 1);
}

void Mlp::init(std::uint64_t seed) {
    Rng rng(seed);
    theta_.setZero();
    const double a1 = std::sqrt(6.0 / (in_ + hidden_)), a2 = std::sqrt(6.0 / (hidden_ + 1));
    for (long k = 0; k < static_cast<long>(hidden_) * in_; ++k) theta_[k] = rng.uniform(-a1, a1);
    const long w2 = static_cast<long>(hidden_) * in_ + hidden_;
    for (long k = 0; k < hidden_; ++k) theta_[w2 + k] = rng.uniform(-a2, a2);
}

double Mlp::value_and_gradient(const VectorXd& x, VectorXd& grad) const {
    const long h = hidden_;
    Eigen::Map<const MatrixXd> W1(theta_.data(), h, in_);
    Eigen::Map<const VectorXd> b1(theta_.data() + h * in_, h);
    Eigen::Map<const VectorXd> w2(theta_.data() + h * in_ + h, h);
    const double b2 = theta_[h * in_ + 2 * h];
    const VectorXd pre = W1 * x + b1;
    const VectorXd a = pre.cwiseMax(0.0);
    grad.setZero(theta_.size());
    const VectorXd da = (pre.array() > 0).select(w2, 0.0);
    Eigen::Map<MatrixXd>(grad.data(), h, in_) = da * x.transpose();
    grad.segment(h * in_, h) = da;
    grad.segment(h * in_ + h, h) = a;
    grad[h * in_ + 2 * h] = 1.0;
    return w2.dot(a) + b2;
}

double Mlp::forward(const VectorXd& x) const {
    const long h = hidden_;
    Eigen::Map<const MatrixXd> W1(theta_.data(), h, in_);
    Eigen::Map<const VectorXd> b1(theta_.data() + h * in_, h);
    Eigen::Map<const VectorXd> w2(theta_.data() + h * in_ + h, h);
    return w2.dot((W1 * x + b1).cwiseMax(0.0)) + theta_[h * in_ + 2 * h];
}

VectorXd Mlp::gradient(const VectorXd& x) const {
    VectorXd g;
    value_and_gradient(x, g);
    return g;
}

std::vector<double> fit_mlp(Mlp& net, const std::vector<std::pair<VectorXd, double>>& data, const FitOptions& opts,
                            AdamState* state) {
    AdamState local;
    AdamState& adam = state ? *state : local;
    return minibatch_loop(data.size(), net.params(), opts, adam, [&](std::size_t i, VectorXd& gi, std::uint64_t) {
        const double r = net.value_and_gradient(data[i].first, gi) - data[i].second;
        gi *= 2 * r;
        return r * r;
    });
}

}  // namespace l2sep
