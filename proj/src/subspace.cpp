#include "l2sep/subspace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "l2sep/parallel.hpp"
#include "l2sep/rng.hpp"

namespace l2sep {

std::vector<std::uint32_t> near_zero_masks(int M, int radius) {
    if (M < 0 || M > 31) throw ConfigError("near_zero_masks: M must be in [0, 31]");
    std::vector<std::uint32_t> out;
    for (std::uint32_t m = 0; m < (1u << M); ++m)
        if (std::popcount(m) <= radius) out.push_back(m);
    std::stable_sort(out.begin(), out.end(),
                     [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });
    return out;
}

std::vector<SeparatorConfig> sample_initial_configs(int n_random, int radius, std::uint64_t seed,
                                                    const std::function<double(SeparatorConfig)>& eval) {
    std::vector<SeparatorConfig> out;
    std::set<std::uint8_t> seen;
    auto push = [&](std::uint32_t m) {
        const auto b = static_cast<std::uint8_t>(m);
        if (seen.insert(b).second) out.push_back(SeparatorConfig{b});
    };
    for (auto m : near_zero_masks(kNumSeparators, radius)) push(m);
    if (n_random <= 0) return out;

    Rng rng(seed);
    SeparatorConfig pivot;
    double best = -kInf;
    for (int t = 0; t < n_random; ++t) {
        const SeparatorConfig c{static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
        const double v = eval(c);
        if (v > best || (v == best && c.bits < pivot.bits)) {
            best = v;
            pivot = c;
        }
    }
    for (auto d : near_zero_masks(kNumSeparators, radius)) push(pivot.bits ^ d);
    // every subset of the active set, by the standard submask walk
    for (std::uint32_t s = pivot.bits;; s = (s - 1) & pivot.bits) {
        push(s);
        if (s == 0) break;
    }
    return out;
}

void RewardTable::validate() const {
    if (T.size() != configs.size()) throw ValidationError("reward table: row count differs from config count");
    for (const auto& row : T) {
        if (row.size() != instances.size()) throw ValidationError("reward table: ragged row");
        for (double v : row)
            if (!std::isfinite(v) || v < r_min) throw ValidationError("reward table: entry below r_min or not finite");
    }
}

RewardTable build_reward_table(const std::vector<SeparatorConfig>& configs, const std::vector<std::string>& instances,
                               const CellEvaluator& eval, int repetitions, double r_min, int jobs, long update_round) {
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    RewardTable t;
    t.configs = configs;
    t.instances = instances;
    t.update_round = update_round;
    t.r_min = r_min;
    const std::size_t S = configs.size(), K = instances.size();
    t.T.assign(S, std::vector<double>(K, r_min));
    std::vector<char> failed(S * K, 0);
    parallel_for(S * K, jobs, [&](std::size_t cell) {
        const std::size_t i = cell / K, j = cell % K;
        try {
            std::vector<double> d;
            for (int r = 0; r < repetitions; ++r) d.push_back(eval(i, j, r));
            t.T[i][j] = clipped_reward(d, r_min);
        } catch (const std::exception&) {
            failed[cell] = 1;
        }
    });
    t.failed.assign(S, std::vector<bool>(K, false));
    for (std::size_t c = 0; c < S * K; ++c)
        if (failed[c]) t.failed[c / K][c % K] = true;
    return t;
}

RewardTable build_reward_table(const std::vector<SeparatorConfig>& configs, const std::vector<MilpInstance>& instances,
                               const BnCParams& params, const ConfigSchedule& prefix, long update_round,
                               int repetitions, double r_min, int jobs) {
    std::vector<double> t0(instances.size());
    parallel_for(instances.size(), jobs, [&](std::size_t j) {
        const auto r = solve(instances[j], default_schedule(), params);
        if (r.status == SolveStatus::NumericalError) throw NumericalError("default solve failed on " + instances[j].name);
        t0[j] = std::max(r.effort, 1.0);
    });
    std::vector<std::string> names;
    for (const auto& inst : instances) names.push_back(inst.name);
    auto eval = [&](std::size_t i, std::size_t j, int) {
        ConfigSchedule s = prefix;
        std::erase_if(s.updates, [&](const auto& u) { return u.first >= update_round; });
        s.updates.emplace_back(update_round, configs[i]);
        if (s.updates.front().first != 0 && !s.prefix) s.prefix = SeparatorConfig::all_on();
        BnCParams p = params;
        p.reference_effort = t0[j];
        const auto r = solve(instances[j], s, p);
        if (r.status == SolveStatus::NumericalError) throw NumericalError("solve failed");
        if (r.status == SolveStatus::HardStop) return kHardStopFloor;
        return std::max(rel_improvement(t0[j], r.effort), kHardStopFloor);
    };
    return build_reward_table(configs, names, eval, repetitions, r_min, jobs, update_round);
}

std::string table_to_csv(const RewardTable& t) {
    std::ostringstream out;
    out << std::setprecision(17) << "config";
    for (const auto& n : t.instances) out << "," << n;
    out << "\n";
    for (std::size_t i = 0; i < t.configs.size(); ++i) {
        out << t.configs[i].to_string();
        for (double v : t.T[i]) out << "," << v;
        out << "\n";
    }
    return out.str();
}

nlohmann::json table_header_json(const RewardTable& t) {
    nlohmann::json failed = nlohmann::json::array();
    for (std::size_t i = 0; i < t.failed.size(); ++i)
        for (std::size_t j = 0; j < t.failed[i].size(); ++j)
            if (t.failed[i][j]) failed.push_back({i, j});
    return {{"update_round", t.update_round}, {"r_min", t.r_min}, {"num_configs", t.configs.size()},
            {"num_instances", t.instances.size()}, {"failed_cells", failed}};
}

RewardTable table_from_csv(const std::string& csv, const nlohmann::json& header) {
    RewardTable t;
    t.update_round = header.value("update_round", 0L);
    t.r_min = header.value("r_min", kRewardFloor);
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("reward table", "empty file");
    auto split = [](const std::string& s) {
        std::vector<std::string> f;
        std::stringstream ss(s);
        std::string x;
        while (std::getline(ss, x, ',')) f.push_back(x);
        return f;
    };
    auto head = split(line);
    if (head.empty() || head[0] != "config") throw ParseError("reward table:1", "expected 'config' header");
    t.instances.assign(head.begin() + 1, head.end());
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split(line);
        const std::string where = "reward table:" + std::to_string(lineno);
        if (f.size() != t.instances.size() + 1) throw ParseError(where, "wrong number of fields");
        try {
            t.configs.push_back(SeparatorConfig::from_string(f[0]));
        } catch (const std::exception& e) {
            throw ParseError(where, e.what());
        }
        std::vector<double> row;
        for (std::size_t k = 1; k < f.size(); ++k) {
            try {
                row.push_back(std::stod(f[k]));
            } catch (const std::exception&) {
                throw ParseError(where, "bad number '" + f[k] + "'");
            }
        }
        t.T.push_back(std::move(row));
    }
    t.failed.assign(t.configs.size(), std::vector<bool>(t.instances.size(), false));
    if (auto it = header.find("failed_cells"); it != header.end())
        for (const auto& c : *it) {
            const auto i = c.at(0).get<std::size_t>(), j = c.at(1).get<std::size_t>();
            if (i < t.failed.size() && j < t.instances.size()) t.failed[i][j] = true;
        }
    t.validate();
    return t;
}

double erm_performance(const std::vector<std::size_t>& A, const RewardTable& t) {
    if (A.empty() || t.num_instances() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < t.num_instances(); ++j) {
        double best = -kInf;
        for (auto i : A) best = std::max(best, t.T[i][j]);
        s += best;
    }
    return s / static_cast<double>(t.num_instances());
}

double instance_agnostic_perf(std::size_t config, const RewardTable& t) {
    const auto& row = t.T.at(config);
    if (row.empty()) return 0.0;
    double s = 0.0;
    for (double v : row) s += v;
    return s / static_cast<double>(row.size());
}

RestrictedSubspace restrict_subspace(const RewardTable& t, std::size_t size, double b) {
    if (size < 1) throw ConfigError("subspace size must be >= 1");
    const std::size_t S = t.num_configs(), K = t.num_instances();
    std::vector<double> agn(S);
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < S; ++i) {
        agn[i] = instance_agnostic_perf(i, t);
        if (agn[i] > b) cand.push_back(i);
    }
    if (cand.empty()) {
        std::ostringstream msg;
        msg << "no configuration has instance-agnostic performance above the threshold b = " << b;
        throw ConfigError(msg.str());
    }
    RestrictedSubspace out;
    out.threshold = b;
    std::vector<double> cover(K, -kInf);  // best value over the current A
    double current = 0.0;
    while (out.rows.size() < size && !cand.empty()) {
        std::size_t pick = 0;
        double best_gain = -kInf;
        for (std::size_t c = 0; c < cand.size(); ++c) {
            const auto i = cand[c];
            double v = 0.0;
            for (std::size_t j = 0; j < K; ++j) v += std::max(cover[j], t.T[i][j]);
            const double gain = (K ? v / static_cast<double>(K) : 0.0) - (out.rows.empty() ? 0.0 : current);
            const auto p = cand[pick];
            if (gain > best_gain || (gain == best_gain && (agn[i] > agn[p] || (agn[i] == agn[p] &&
                                                                                t.configs[i].bits < t.configs[p].bits)))) {
                best_gain = gain;
                pick = c;
            }
        }
        const auto i = cand[pick];
        cand.erase(cand.begin() + static_cast<long>(pick));
        out.rows.push_back(i);
        out.A.push_back(t.configs[i]);
        for (std::size_t j = 0; j < K; ++j) cover[j] = std::max(cover[j], t.T[i][j]);
        current = erm_performance(out.rows, t);
        SubspaceStep st;
        st.added = t.configs[i];
        st.erm = current;
        st.worst_agn = kInf;
        for (auto r : out.rows) {
            st.mean_agn += agn[r];
            st.worst_agn = std::min(st.worst_agn, agn[r]);
        }
        st.mean_agn /= static_cast<double>(out.rows.size());
        out.steps.push_back(st);
    }
    return out;
}

nlohmann::json subspace_to_json(const RestrictedSubspace& s) {
    nlohmann::json A = nlohmann::json::array(), steps = nlohmann::json::array();
    for (const auto& c : s.A) A.push_back(c.to_string());
    for (const auto& st : s.steps)
        steps.push_back({{"added", st.added.to_string()}, {"erm", st.erm}, {"mean_agn", st.mean_agn},
                         {"worst_agn", st.worst_agn}});
    nlohmann::json j = {{"A", A}, {"rows", s.rows}, {"steps", steps}};
    j["threshold"] = std::isfinite(s.threshold) ? nlohmann::json(s.threshold) : nlohmann::json("-inf");
    return j;
}

RestrictedSubspace subspace_from_json(const nlohmann::json& j) {
    RestrictedSubspace s;
    for (const auto& c : j.at("A")) s.A.push_back(SeparatorConfig::from_string(c.get<std::string>()));
    s.rows = j.at("rows").get<std::vector<std::size_t>>();
    for (const auto& st : j.at("steps"))
        s.steps.push_back({SeparatorConfig::from_string(st.at("added").get<std::string>()), st.at("erm").get<double>(),
                           st.at("mean_agn").get<double>(), st.at("worst_agn").get<double>()});
    const auto& th = j.at("threshold");
    s.threshold = th.is_number() ? th.get<double>() : -kInf;
    if (s.rows.size() != s.A.size()) throw ParseError("subspace", "rows and A differ in length");
    return s;
}

std::vector<TradeoffRow> tradeoff_curve(const RewardTable& t, const std::vector<double>& thresholds, std::size_t size) {
    std::vector<TradeoffRow> rows;
    for (double b : thresholds) {
        RestrictedSubspace s;
        try {
            s = restrict_subspace(t, size, b);
        } catch (const ConfigError&) {
            continue;
        }
        for (std::size_t k = 0; k < s.steps.size(); ++k) rows.push_back({b, k + 1, s.steps[k]});
    }
    return rows;
}

std::string tradeoff_to_csv(const std::vector<TradeoffRow>& rows) {
    std::ostringstream out;
    out << std::setprecision(10) << "threshold,size,added,erm,mean_agn,worst_agn\n";
    for (const auto& r : rows)
        out << r.threshold << "," << r.step << "," << r.data.added.to_string() << "," << r.data.erm << ","
            << r.data.mean_agn << "," << r.data.worst_agn << "\n";
    return out.str();
}

double simulate_mistake_model(const std::vector<std::size_t>& A, const RewardTable& train,
                              const RewardTable& population, double alpha, double beta) {
    const double K = static_cast<double>(train.num_instances());
    const double N = static_cast<double>(population.num_instances());
    const double a = static_cast<double>(A.size());
    double value = 0.0;
    // population mistakes: each instance draws a uniform member of A
    for (std::size_t x = 0; x < population.num_instances(); ++x)
        for (auto s : A) value += alpha / (N * a) * population.T[s][x];
    // otherwise the population value is the training value of the predictor
    for (std::size_t i = 0; i < train.num_instances(); ++i) {
        double best = -kInf;
        for (auto s : A) {
            best = std::max(best, train.T[s][i]);
            value += (1 - alpha) * beta / (K * a) * train.T[s][i];
        }
        value += (1 - alpha) * (1 - beta) / K * best;
    }
    return value;
}

double mistake_model_closed_form(const std::vector<std::size_t>& A, const RewardTable& train,
                                 const RewardTable& population, double alpha, double beta) {
    double train_agn = 0.0, pop_agn = 0.0;
    for (auto s : A) {
        train_agn += instance_agnostic_perf(s, train);
        pop_agn += instance_agnostic_perf(s, population);
    }
    train_agn /= static_cast<double>(A.size());
    pop_agn /= static_cast<double>(A.size());
    return (1 - alpha) * (1 - beta) * erm_performance(A, train) + (1 - alpha) * beta * train_agn + alpha * pop_agn;
}

}  // namespace l2sep
