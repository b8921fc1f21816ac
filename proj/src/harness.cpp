#include "l2sep/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <map>
#include <sstream>

#include "l2sep/instance_io.hpp"
#include "l2sep/parallel.hpp"
#include "l2sep/rng.hpp"

namespace l2sep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string pct(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.2f%%", 100.0 * v);
    return buf;
}

std::uint64_t tag_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    return h;
}

std::uint64_t stage_seed(std::uint64_t master, const std::string& tag) { return mix_seed(master, tag_hash(tag)); }

int split_index(const std::string& split) {
    static const std::vector<std::string> names = {"small", "large", "valid", "test"};
    auto it = std::find(names.begin(), names.end(), split);
    if (it == names.end()) throw ConfigError("unknown split '" + split + "'");
    return static_cast<int>(it - names.begin());
}

const std::vector<std::string>& split_names() {
    static const std::vector<std::string> names = {"small", "large", "valid", "test"};
    return names;
}

double median_value(std::vector<double> v) {
    if (v.empty()) return 0.0;
    return quantile(std::move(v), 0.5);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<T>();
}

}  // namespace

const char* to_string(Objective o) { return o == Objective::Time ? "time" : "gap"; }
const char* to_string(MetricMode m) { return m == MetricMode::Effort ? "effort" : "wall"; }

const char* to_string(Method m) {
    switch (m) {
        case Method::Default: return "default";
        case Method::Random: return "random";
        case Method::Prune: return "prune";
        case Method::InstanceAgnostic: return "instance_agnostic";
        case Method::RandomWithinSubspace: return "random_within_subspace";
        case Method::L2Sep: return "l2sep";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    for (auto m : kAllMethods)
        if (s == to_string(m)) return m;
    throw ConfigError("unknown method '" + s + "'");
}

// ---------------------------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::desk(ClassTag tag) {
    ExperimentConfig c;
    c.name = std::string(to_string(tag)) + "_desk";
    c.generator.tag = tag;
    switch (tag) {
        case ClassTag::Packing: c.generator.a = 20; c.generator.b = 20; break;
        case ClassTag::BinPacking: c.generator.a = 20; c.generator.b = 4; break;
        case ClassTag::MaxCut: c.generator.a = 12; c.generator.b = 24; break;
        case ClassTag::CombAuction: c.generator.a = 20; c.generator.b = 40; break;
        case ClassTag::IndepSet:
            c.generator.a = 60;
            c.generator.indep.edge_prob_scale = 500.0 / 60.0;
            break;
        case ClassTag::Custom: throw ConfigError("no generator for class 'custom'");
    }
    const bool late = tag == ClassTag::CombAuction || tag == ClassTag::IndepSet;
    c.run.update_rounds = {0, late ? 8L : 5L};
    c.arch.hidden = 32;
    return c;
}

ExperimentConfig ExperimentConfig::full(ClassTag tag) {
    ExperimentConfig c = desk(tag);
    c.name = std::string(to_string(tag)) + "_full";
    c.generator = default_generator_spec(tag);
    c.sizes = DatasetSizes{100, 800, 100, 100};
    c.restriction.n_random = 500;
    c.arch.hidden = 64;
    c.run.steps_per_epoch = 64;
    return c;
}

ExperimentConfig ExperimentConfig::smoke(ClassTag tag) {
    ExperimentConfig c = desk(tag);
    c.name = std::string(to_string(tag)) + "_smoke";
    switch (tag) {
        case ClassTag::Packing: c.generator.a = 8; c.generator.b = 8; break;
        case ClassTag::BinPacking: c.generator.a = 8; c.generator.b = 2; break;
        case ClassTag::MaxCut: c.generator.a = 6; c.generator.b = 10; break;
        case ClassTag::CombAuction: c.generator.a = 8; c.generator.b = 12; break;
        case ClassTag::IndepSet: c.generator.a = 16; break;
        case ClassTag::Custom: break;
    }
    c.sizes = DatasetSizes{4, 6, 2, 5};
    c.restriction.n_random = 4;
    c.restriction.radius = 1;
    c.restriction.size = 4;
    c.run.T = 3;
    c.run.P = 2;
    c.run.D = 2;
    c.run.update_rounds = {0, 3};
    c.run.steps_per_epoch = 2;
    c.run.batch = 8;
    c.arch.hidden = 8;
    c.arch.heads = 2;
    return c;
}

void ExperimentConfig::validate() const {
    if (generator.tag == ClassTag::Custom) throw ConfigError("experiments need a generated class");
    if (generator.a < 1) throw ConfigError("generator dimension a must be >= 1");
    if (sizes.k_small < 1 || sizes.k_large < 1 || sizes.valid < 0 || sizes.test < 1)
        throw ConfigError("dataset sizes must be positive");
    if (restriction.n_random < 1 || restriction.radius < 0 || restriction.size < 1 || restriction.repetitions < 1)
        throw ConfigError("restriction parameters out of range");
    if (!(gap_fraction > 0)) throw ConfigError("gap_fraction must be positive");
    if (infer_strategy != "auto") infer_strategy_from_string(infer_strategy);
    if (arch.hidden < 1 || arch.heads < 1 || arch.hidden % arch.heads != 0)
        throw ConfigError("arch: hidden must be a positive multiple of heads");
    if (run.T < 1 || run.P < 1 || run.D < 1 || run.k < 1 || run.k > 3)
        throw ConfigError("run: T, P, D >= 1 and k in {1, 2, 3} required");
    if (run.update_rounds.size() < static_cast<std::size_t>(run.k)) throw ConfigError("run: k exceeds update rounds");
}

json ExperimentConfig::to_json() const {
    json r{{"n_random", restriction.n_random},
           {"radius", restriction.radius},
           {"size", restriction.size},
           {"threshold", restriction.threshold ? json(*restriction.threshold) : json("auto")},
           {"thresholds", restriction.thresholds},
           {"repetitions", restriction.repetitions},
           {"r_min", restriction.r_min}};
    return json{{"name", name},
                {"class", to_string(generator.tag)},
                {"generator", {{"a", generator.a}, {"b", generator.b}, {"edge_prob_scale", generator.indep.edge_prob_scale}}},
                {"seed", seed},
                {"sizes", {{"k_small", sizes.k_small}, {"k_large", sizes.k_large}, {"valid", sizes.valid}, {"test", sizes.test}}},
                {"solver", params_to_json(solver)},
                {"restriction", r},
                {"run", run.to_json()},
                {"arch", {{"hidden", arch.hidden}, {"heads", arch.heads}, {"dropout", arch.dropout}, {"sep", to_string(arch.sep)}}},
                {"metric", to_string(metric)},
                {"objective", to_string(objective)},
                {"gap_fraction", gap_fraction},
                {"evaluate_gap", evaluate_gap},
                {"infer_strategy", infer_strategy}};
}

namespace {

void only_keys(const json& j, const std::vector<std::string>& keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (std::find(keys.begin(), keys.end(), k) == keys.end())
            throw ConfigError(where + ": unknown key '" + k + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& patch, const ExperimentConfig& base) {
    if (!patch.is_object()) throw ConfigError("config: expected an object");
    only_keys(patch, {"name", "class", "generator", "seed", "sizes", "solver", "restriction", "run", "arch", "metric",
                      "objective", "gap_fraction", "evaluate_gap", "infer_strategy", "jobs"},
              "config");
    ExperimentConfig c = base;
    try {
        if (patch.contains("class")) {
            const auto tag = class_tag_from_string(patch["class"].get<std::string>());
            if (tag != base.generator.tag) {
                const auto fresh = ExperimentConfig::desk(tag);
                c.generator = fresh.generator;
                c.run.update_rounds = fresh.run.update_rounds;
            }
        }
        json full = c.to_json();
        full.merge_patch(patch);
        c.name = full["name"].get<std::string>();
        c.seed = full["seed"].get<std::uint64_t>();
        const auto& g = full["generator"];
        only_keys(g, {"a", "b", "edge_prob_scale"}, "config.generator");
        c.generator.tag = class_tag_from_string(full["class"].get<std::string>());
        c.generator.a = g["a"].get<int>();
        c.generator.b = g["b"].get<int>();
        c.generator.indep.edge_prob_scale = g["edge_prob_scale"].get<double>();
        const auto& s = full["sizes"];
        only_keys(s, {"k_small", "k_large", "valid", "test"}, "config.sizes");
        c.sizes = DatasetSizes{s["k_small"].get<int>(), s["k_large"].get<int>(), s["valid"].get<int>(), s["test"].get<int>()};
        c.solver = params_from_json(full["solver"]);
        const auto& r = full["restriction"];
        only_keys(r, {"n_random", "radius", "size", "threshold", "thresholds", "repetitions", "r_min"}, "config.restriction");
        c.restriction.n_random = r["n_random"].get<int>();
        c.restriction.radius = r["radius"].get<int>();
        c.restriction.size = r["size"].get<std::size_t>();
        if (r["threshold"].is_string()) {
            if (r["threshold"].get<std::string>() != "auto") throw ConfigError("config.restriction.threshold: number or \"auto\"");
            c.restriction.threshold.reset();
        } else {
            c.restriction.threshold = r["threshold"].get<double>();
        }
        c.restriction.thresholds = r["thresholds"].get<std::vector<double>>();
        c.restriction.repetitions = r["repetitions"].get<int>();
        c.restriction.r_min = r["r_min"].get<double>();
        c.run = TrainRunConfig::from_json(full["run"]);
        const auto& a = full["arch"];
        only_keys(a, {"hidden", "heads", "dropout", "sep"}, "config.arch");
        c.arch.hidden = a["hidden"].get<int>();
        c.arch.heads = a["heads"].get<int>();
        c.arch.dropout = a["dropout"].get<double>();
        c.arch.sep = sep_features_from_string(a["sep"].get<std::string>());
        const auto metric = full["metric"].get<std::string>();
        if (metric != "effort" && metric != "wall") throw ConfigError("config.metric: effort or wall");
        c.metric = metric == "effort" ? MetricMode::Effort : MetricMode::Wall;
        const auto objective = full["objective"].get<std::string>();
        if (objective != "time" && objective != "gap") throw ConfigError("config.objective: time or gap");
        c.objective = objective == "time" ? Objective::Time : Objective::Gap;
        c.gap_fraction = full["gap_fraction"].get<double>();
        c.evaluate_gap = full["evaluate_gap"].get<bool>();
        c.infer_strategy = full["infer_strategy"].get<std::string>();
        if (full.contains("jobs")) c.jobs = full["jobs"].get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object() || !j.contains("class")) throw ConfigError("config: 'class' is required");
    ClassTag tag;
    try {
        tag = class_tag_from_string(j["class"].get<std::string>());
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config.class: ") + e.what());
    }
    return from_json(j, desk(tag));
}

ExperimentConfig load_config(const fs::path& path) {
    json j;
    try {
        j = read_json_file(path);
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
    return ExperimentConfig::from_json(j);
}

Split make_split(const ExperimentConfig& cfg, const std::string& split, int count) {
    Split s;
    s.name = split;
    const auto base = static_cast<std::uint64_t>(split_index(split)) << 32;
    for (int k = 0; k < count; ++k) {
        const std::uint64_t seed = mix_seed(cfg.seed, base + static_cast<std::uint64_t>(k));
        auto inst = generate(cfg.generator, seed);
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s_%s_%04d", to_string(cfg.generator.tag), split.c_str(), k);
        inst.name = buf;
        s.instances.push_back(std::move(inst));
        s.seeds.push_back(seed);
    }
    return s;
}

SeparatorConfig prune_mask(const std::vector<SolveResult>& results) {
    SeparatorConfig c;
    for (int k = 0; k < kNumSeparators; ++k) {
        long applied = 0;
        for (const auto& r : results) applied += r.sep[k].applied;
        c.set(static_cast<SeparatorId>(k), applied > 0);
    }
    return c;
}

double choose_threshold(const RewardTable& t, const std::vector<double>& thresholds, std::size_t size) {
    std::optional<double> best_b;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> sorted = thresholds;
    std::sort(sorted.begin(), sorted.end());
    for (double b : sorted) {
        try {
            const auto sub = restrict_subspace(t, size, b);
            const auto& last = sub.steps.back();
            const double score = 0.5 * last.erm + 0.5 * last.mean_agn;
            if (score > best) {
                best = score;
                best_b = b;
            }
        } catch (const ConfigError&) {
        }
    }
    if (!best_b) throw ConfigError("no threshold in the grid leaves a nonempty subspace");
    return *best_b;
}

// ---------------------------------------------------------------------------------------------
// Evaluation records

json eval_to_json(const EvalResult& r) {
    json j;
    j["instances"] = r.instances;
    j["refs"] = json::array();
    for (const auto& x : r.refs) j["refs"].push_back({{"value", x.value}, {"effort", x.effort}});
    j["default_gap"] = r.default_gap;
    j["gap_limit"] = r.gap_limit;
    j["strategy"] = r.strategy;
    j["validation"] = r.validation;
    j["methods"] = json::array();
    for (const auto& m : r.methods) {
        json mj;
        mj["method"] = to_string(m.method);
        mj["time"] = json::array();
        for (const auto& s : m.time) mj["time"].push_back({{"instance", s.instance}, {"t0", s.t0}, {"t_pi", s.t_pi}, {"delta", s.delta}});
        mj["gap"] = m.gap;
        mj["schedules"] = json::array();
        for (const auto& s : m.schedules) mj["schedules"].push_back(schedule_to_json(s));
        j["methods"].push_back(std::move(mj));
    }
    return j;
}

EvalResult eval_from_json(const json& j) {
    EvalResult r;
    try {
        r.instances = j.at("instances").get<std::vector<std::string>>();
        for (const auto& x : j.at("refs")) r.refs.push_back(Reference{x.at("value").get<double>(), x.at("effort").get<double>()});
        r.default_gap = j.at("default_gap").get<std::vector<double>>();
        r.gap_limit = j.at("gap_limit").get<double>();
        r.strategy = j.at("strategy").get<std::string>();
        r.validation = j.at("validation");
        for (const auto& mj : j.at("methods")) {
            MethodSamples m;
            m.method = method_from_string(mj.at("method").get<std::string>());
            for (const auto& s : mj.at("time"))
                m.time.push_back(ImprovementSample{s.at("instance").get<std::string>(), s.at("t0").get<double>(),
                                                   s.at("t_pi").get<double>(), s.at("delta").get<double>()});
            m.gap = mj.at("gap").get<std::vector<double>>();
            for (const auto& s : mj.at("schedules")) m.schedules.push_back(schedule_from_json(s));
            r.methods.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw ParseError("eval.json", e.what());
    }
    return r;
}

namespace {

std::vector<double> deltas_of(const MethodSamples& m) {
    std::vector<double> d;
    for (const auto& s : m.time) d.push_back(s.delta);
    return d;
}

const std::vector<double>& headline(const MethodSamples& m, Objective o, std::vector<double>& scratch) {
    if (o == Objective::Gap) return m.gap;
    scratch = deltas_of(m);
    return scratch;
}

}  // namespace

std::string results_csv(const EvalResult& r, Objective objective) {
    std::ostringstream out;
    out << "method,objective,count,median,iqm,mean,std\n";
    for (const auto& m : r.methods) {
        std::vector<double> scratch;
        const auto& v = headline(m, objective, scratch);
        if (v.empty()) continue;
        const auto a = aggregate(v);
        out << to_string(m.method) << "," << to_string(objective) << "," << a.count << "," << num(a.median) << ","
            << num(a.iqm) << "," << num(a.mean) << "," << num(a.std) << "\n";
    }
    return out.str();
}

std::string results_table(const EvalResult& r, Objective objective) {
    std::ostringstream out;
    out << (objective == Objective::Time ? "relative improvement over default (effort units)"
                                         : "relative gap improvement over default at the effort limit")
        << "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-24s %10s %10s %10s %10s\n", "method", "median", "iqm", "mean", "std");
    out << line;
    for (const auto& m : r.methods) {
        std::vector<double> scratch;
        const auto& v = headline(m, objective, scratch);
        if (v.empty()) continue;
        const auto a = aggregate(v);
        std::snprintf(line, sizeof line, "%-24s %10s %10s %10s %10s\n", to_string(m.method), pct(a.median).c_str(),
                      pct(a.iqm).c_str(), pct(a.mean).c_str(), pct(a.std).c_str());
        out << line;
    }
    return out.str();
}

std::string samples_csv(const EvalResult& r) {
    std::ostringstream out;
    out << "instance,method,t0,t_pi,delta,gap_improvement\n";
    for (const auto& m : r.methods)
        for (std::size_t i = 0; i < m.time.size(); ++i) {
            const auto& s = m.time[i];
            out << s.instance << "," << to_string(m.method) << "," << num(s.t0) << "," << num(s.t_pi) << ","
                << num(s.delta) << "," << (i < m.gap.size() ? num(m.gap[i]) : std::string()) << "\n";
        }
    return out.str();
}

std::string heatmap_csv(const std::vector<SeparatorConfig>& A) {
    std::ostringstream out;
    out << "separator";
    for (auto s : A) out << "," << s.to_string();
    out << "\n";
    for (auto id : kAllSeparators) {
        out << to_string(id);
        for (auto s : A) out << "," << (s.active(id) ? 1 : 0);
        out << "\n";
    }
    return out.str();
}

std::string frequencies_csv(const EvalResult& r, const std::vector<SeparatorConfig>& A,
                            const std::vector<long>& update_rounds) {
    std::ostringstream out;
    out << "update,round,config,count,frequency\n";
    const MethodSamples* l2 = nullptr;
    for (const auto& m : r.methods)
        if (m.method == Method::L2Sep) l2 = &m;
    if (!l2) return out.str();
    const std::size_t n = l2->schedules.size();
    for (std::size_t j = 0; j < update_rounds.size(); ++j) {
        std::map<std::uint8_t, std::size_t> count;
        std::size_t total = 0;
        for (const auto& s : l2->schedules) {
            if (j >= s.updates.size()) continue;
            ++count[s.updates[j].second.bits];
            ++total;
        }
        if (total == 0) continue;
        for (auto c : A)
            out << j << "," << update_rounds[j] << "," << c.to_string() << "," << count[c.bits] << ","
                << num(static_cast<double>(count[c.bits]) / static_cast<double>(total)) << "\n";
    }
    (void)n;
    return out.str();
}

// ---------------------------------------------------------------------------------------------
// Pipeline

const std::vector<std::string>& pipeline_stages() {
    static const std::vector<std::string> s = {"gen-data", "references", "build-table", "tradeoff",
                                               "restrict", "train",      "evaluate",    "report"};
    return s;
}

namespace {

const std::map<std::string, std::string>& stage_artifacts() {
    static const std::map<std::string, std::string> m = {
        {"gen-data", "data/manifest.json"}, {"references", "refs.json"},   {"build-table", "table.csv"},
        {"tradeoff", "tradeoff.csv"},       {"restrict", "subspace.json"}, {"train", "policy.json"},
        {"evaluate", "eval.json"},          {"report", "report/results.csv"}};
    return m;
}

json read_artifact(const fs::path& p, const std::string& stage) {
    if (!fs::exists(p)) throw ConfigError(p.string() + " is missing; run '" + stage + "' first");
    return read_json_file(p);
}

std::string read_text(const fs::path& p, const std::string& stage) {
    if (!fs::exists(p)) throw ConfigError(p.string() + " is missing; run '" + stage + "' first");
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

Pipeline::Pipeline(ExperimentConfig cfg, fs::path dir, int jobs)
    : cfg_(std::move(cfg)), dir_(std::move(dir)), jobs_(resolve_jobs(jobs > 0 ? jobs : cfg_.jobs)) {
    cfg_.validate();
}

void Pipeline::log(const std::string& msg) const {
    if (log_) log_(msg);
}

void Pipeline::write(const fs::path& rel, const std::string& text) const { write_text_file(dir_ / rel, text); }

void Pipeline::note_timing(const std::string& stage, double seconds) const {
    const fs::path p = dir_ / "timing.json";
    json j = fs::exists(p) ? read_json_file(p) : json::object();
    j[stage] = seconds;
    write_text_file(p, j.dump(1) + "\n");
}

bool Pipeline::stage_done(const std::string& stage) const {
    auto it = stage_artifacts().find(stage);
    if (it == stage_artifacts().end()) throw ConfigError("unknown stage '" + stage + "'");
    return fs::exists(dir_ / it->second);
}

EnvOptions Pipeline::env_options(bool gap) const {
    EnvOptions o;
    o.sep = cfg_.arch.sep;
    o.r_min = cfg_.restriction.r_min;
    o.wall_clock = cfg_.metric == MetricMode::Wall;
    o.repetitions = o.wall_clock ? std::max(3, cfg_.restriction.repetitions) : cfg_.restriction.repetitions;
    if (gap) o.gap_effort_limit = gap_limit();
    return o;
}

double Pipeline::gap_limit() const {
    const json refs = read_artifact(dir_ / "refs.json", "references");
    return refs.at("gap_limit").get<double>();
}

std::vector<MilpInstance> Pipeline::load_split(const std::string& split) const {
    const json manifest = read_artifact(dir_ / "data/manifest.json", "gen-data");
    std::vector<MilpInstance> out;
    for (const auto& e : manifest.at("splits").at(split))
        out.push_back(read_instance(dir_ / "data" / split / (e.at("name").get<std::string>() + ".json")));
    return out;
}

std::vector<Reference> Pipeline::load_refs(const std::string& split) const {
    const json refs = read_artifact(dir_ / "refs.json", "references");
    const bool gap = cfg_.objective == Objective::Gap;
    std::vector<Reference> out;
    for (const auto& e : refs.at("splits").at(split)) {
        if (gap)
            out.push_back(Reference{e.at("gap0").get<double>(), e.at("effort").get<double>()});
        else
            out.push_back(Reference{e.at("t0").get<double>(), e.at("effort").get<double>()});
    }
    return out;
}

void Pipeline::gen_data() {
    json manifest;
    manifest["seed"] = cfg_.seed;
    manifest["splits"] = json::object();
    const std::map<std::string, int> counts = {
        {"small", cfg_.sizes.k_small}, {"large", cfg_.sizes.k_large}, {"valid", cfg_.sizes.valid}, {"test", cfg_.sizes.test}};
    for (const auto& split : split_names()) {
        const auto s = make_split(cfg_, split, counts.at(split));
        json list = json::array();
        for (std::size_t k = 0; k < s.instances.size(); ++k) {
            write_instance(s.instances[k], dir_ / "data" / split / (s.instances[k].name + ".json"));
            list.push_back({{"name", s.instances[k].name}, {"seed", s.seeds[k]}});
        }
        manifest["splits"][split] = std::move(list);
        log("generated " + std::to_string(s.instances.size()) + " " + split + " instances");
    }
    write("data/manifest.json", manifest.dump(1) + "\n");
}

void Pipeline::references() {
    const EnvOptions time_opts = env_options(false);
    json out;
    out["splits"] = json::object();
    std::map<std::string, std::vector<MilpInstance>> data;
    std::map<std::string, std::vector<Reference>> time_refs;
    std::map<std::string, std::vector<SolveResult>> results;
    for (const auto& split : split_names()) {
        data[split] = load_split(split);
        const auto& insts = data[split];
        std::vector<SolveResult> res(insts.size());
        std::vector<Reference> refs(insts.size());
        parallel_for(insts.size(), jobs_, [&](std::size_t i) {
            BnCParams p = cfg_.solver;
            p.reference_effort = 0.0;
            p.effort_limit = 0.0;
            res[i] = solve(insts[i], default_schedule(), p);
            if (time_opts.wall_clock) {
                refs[i] = reference_value(insts[i], cfg_.solver, time_opts);
            } else {
                const double e = std::max(res[i].effort, 1.0);
                refs[i] = Reference{e, e};
            }
        });
        time_refs[split] = refs;
        results[split] = std::move(res);
    }
    std::vector<double> small_effort;
    for (const auto& r : time_refs["small"]) small_effort.push_back(r.effort);
    const double limit = cfg_.gap_fraction * median_value(small_effort);
    out["gap_limit"] = limit;
    EnvOptions gap_opts = time_opts;
    gap_opts.gap_effort_limit = limit;
    const bool need_gap = cfg_.evaluate_gap || cfg_.objective == Objective::Gap;
    for (const auto& split : split_names()) {
        const auto& insts = data[split];
        std::vector<Reference> gaps(insts.size());
        if (need_gap)
            parallel_for(insts.size(), jobs_, [&](std::size_t i) { gaps[i] = reference_value(insts[i], cfg_.solver, gap_opts); });
        json list = json::array();
        for (std::size_t i = 0; i < insts.size(); ++i) {
            const auto& r = results[split][i];
            json applied = json::array();
            for (const auto& c : r.sep) applied.push_back(c.applied);
            json e{{"name", insts[i].name},
                   {"t0", time_refs[split][i].value},
                   {"effort", time_refs[split][i].effort},
                   {"nodes", r.nodes},
                   {"status", to_string(r.status)},
                   {"objective", r.objective},
                   {"applied", applied}};
            if (need_gap) e["gap0"] = gaps[i].value;
            list.push_back(std::move(e));
        }
        out["splits"][split] = std::move(list);
    }
    out["prune"] = prune_mask(results["small"]).to_string();
    write("refs.json", out.dump(1) + "\n");
    log("reference solves done; gap effort limit " + num(limit));
}

void Pipeline::build_table() {
    const auto small = load_split("small");
    const auto refs = load_refs("small");
    const EnvOptions opts = env_options(cfg_.objective == Objective::Gap);
    const auto& R = cfg_.restriction;
    const std::size_t K = small.size();

    std::map<std::uint8_t, std::vector<double>> cells;  // config -> clipped reward per instance
    auto fill = [&](const std::vector<SeparatorConfig>& configs) {
        std::vector<SeparatorConfig> todo;
        for (auto c : configs)
            if (!cells.count(c.bits) && std::find(todo.begin(), todo.end(), c) == todo.end()) todo.push_back(c);
        std::vector<double> flat(todo.size() * K);
        std::vector<char> failed(todo.size() * K, 0);
        parallel_for(flat.size(), jobs_, [&](std::size_t q) {
            const auto c = todo[q / K];
            const std::size_t j = q % K;
            try {
                flat[q] = clipped_reward(improvements(small[j], ConfigSchedule::constant(c), cfg_.solver, opts, refs[j],
                                                      mix_seed(cfg_.seed, q)),
                                         R.r_min);
            } catch (const NumericalError&) {
                flat[q] = R.r_min;
                failed[q] = 1;
            }
        });
        for (std::size_t a = 0; a < todo.size(); ++a)
            cells[todo[a].bits] = std::vector<double>(flat.begin() + static_cast<long>(a * K),
                                                      flat.begin() + static_cast<long>((a + 1) * K));
    };

    // score every random candidate first so the pivot search runs on cached cells
    Rng rng(stage_seed(cfg_.seed, "table"));
    const std::uint64_t sample_seed = rng.next();
    {
        Rng probe(sample_seed);
        std::vector<SeparatorConfig> randoms;
        for (int k = 0; k < R.n_random; ++k) randoms.push_back(SeparatorConfig{static_cast<std::uint8_t>(probe.uniform_int(0, 255))});
        fill(randoms);
    }
    json random_scores = json::array();
    auto eval = [&](SeparatorConfig c) {
        if (!cells.count(c.bits)) fill({c});
        const auto& v = cells[c.bits];
        double s = 0;
        for (double x : v) s += x;
        const double m = s / static_cast<double>(v.size());
        random_scores.push_back({{"config", c.to_string()}, {"mean", m}});
        return m;
    };
    const auto configs = sample_initial_configs(R.n_random, R.radius, sample_seed, eval);
    fill(configs);
    std::vector<std::string> names;
    for (const auto& inst : small) names.push_back(inst.name);
    const auto table = build_reward_table(
        configs, names, [&](std::size_t ci, std::size_t ij, int) { return cells.at(configs[ci].bits)[ij]; }, 1, R.r_min,
        1, 0);
    write("table_header.json", table_header_json(table).dump(1) + "\n");
    write("table.csv", table_to_csv(table));
    write("initial_configs.json", json{{"sample_seed", sample_seed}, {"random", random_scores}}.dump(1) + "\n");
    log("reward table: " + std::to_string(table.num_configs()) + " configs x " + std::to_string(K) + " instances");
}

namespace {

RewardTable load_table(const fs::path& dir) {
    const auto header = read_artifact(dir / "table_header.json", "build-table");
    return table_from_csv(read_text(dir / "table.csv", "build-table"), header);
}

std::size_t agnostic_row(const RewardTable& t) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.num_configs(); ++i) {
        const double a = instance_agnostic_perf(i, t), b = instance_agnostic_perf(best, t);
        if (a > b || (a == b && t.configs[i].bits < t.configs[best].bits)) best = i;
    }
    return best;
}

}  // namespace

void Pipeline::tradeoff() {
    const auto table = load_table(dir_);
    write("tradeoff.csv", tradeoff_to_csv(tradeoff_curve(table, cfg_.restriction.thresholds, cfg_.restriction.size)));
}

void Pipeline::restrict() {
    const auto table = load_table(dir_);
    const double b = cfg_.restriction.threshold ? *cfg_.restriction.threshold
                                                : choose_threshold(table, cfg_.restriction.thresholds, cfg_.restriction.size);
    const auto sub = restrict_subspace(table, cfg_.restriction.size, b);
    const auto agn = table.configs[agnostic_row(table)];
    json j = subspace_to_json(sub);
    j["threshold_source"] = cfg_.restriction.threshold ? "config" : "auto";
    j["instance_agnostic"] = agn.to_string();
    j["instance_agnostic_in_A"] = std::find(sub.A.begin(), sub.A.end(), agn) != sub.A.end();
    write("subspace.json", j.dump(1) + "\n");
    log("restricted subspace |A| = " + std::to_string(sub.A.size()) + " at b = " + num(b));
}

void Pipeline::train() {
    const auto sub = subspace_from_json(read_artifact(dir_ / "subspace.json", "restrict"));
    auto large = load_split("large");
    auto refs = load_refs("large");
    TrainRunConfig run = cfg_.run;
    run.jobs = jobs_;
    if (static_cast<std::size_t>(run.D) > sub.A.size()) {
        log("D = " + std::to_string(run.D) + " exceeds |A| = " + std::to_string(sub.A.size()) + "; using |A|");
        run.D = static_cast<int>(sub.A.size());
    }
    std::vector<long> rounds(run.update_rounds.begin(), run.update_rounds.begin() + run.k);
    BncEnv env(std::move(large), cfg_.solver, rounds, std::move(refs), env_options(cfg_.objective == Objective::Gap));
    std::vector<std::size_t> all(env.num_instances());
    std::iota(all.begin(), all.end(), 0);
    RewardNet net(cfg_.arch);
    const auto outs = forward_training(env, all, sub.A, net, run, stage_seed(cfg_.seed, "train"));
    std::vector<RewardNet> nets;
    std::vector<UcbState> states;
    std::vector<TrainLogRow> log_rows;
    for (std::size_t j = 0; j < outs.size(); ++j) {
        nets.push_back(outs[j].net);
        states.push_back(outs[j].state);
        log_rows.insert(log_rows.end(), outs[j].log.begin(), outs[j].log.end());
        write("buffer_" + std::to_string(j) + ".jsonl", outs[j].buffer.to_jsonl());
        log("trained network " + std::to_string(j + 1) + "/" + std::to_string(outs.size()) + ", final loss " +
            num(outs[j].log.back().loss));
    }
    write("train_log.csv", train_log_to_csv(log_rows));
    save_policy(dir_ / "policy.json", nets, states, sub.A, rounds);
}

void Pipeline::evaluate() {
    const auto table = load_table(dir_);
    const json subj = read_artifact(dir_ / "subspace.json", "restrict");
    const auto sub = subspace_from_json(subj);
    const auto policy = load_policy(dir_ / "policy.json", cfg_.arch);
    const json refs_doc = read_artifact(dir_ / "refs.json", "references");
    const SeparatorConfig prune = SeparatorConfig::from_string(refs_doc.at("prune").get<std::string>());
    const SeparatorConfig agn = SeparatorConfig::from_string(subj.at("instance_agnostic").get<std::string>());
    const bool gap_headline = cfg_.objective == Objective::Gap;
    const EnvOptions head_opts = env_options(gap_headline);

    auto l2sep_schedules = [&](const BncEnv& env, InferStrategy strategy) {
        std::vector<ConfigSchedule> out(env.num_instances());
        parallel_for(out.size(), jobs_, [&](std::size_t i) {
            out[i] = infer_schedule(env, i, policy.nets, policy.states, policy.A, strategy);
        });
        return out;
    };
    auto headline_scores = [&](const BncEnv& env, const std::vector<ConfigSchedule>& sch) {
        std::vector<double> v(sch.size());
        parallel_for(sch.size(), jobs_, [&](std::size_t i) {
            const auto d = improvements(env.instance(i), sch[i], cfg_.solver, env.options(), env.references()[i],
                                        mix_seed(cfg_.seed, i));
            double s = 0;
            for (double x : d) s += x;
            v[i] = s / static_cast<double>(d.size());
        });
        return v;
    };

    EvalResult res;
    json validation = json::object();
    InferStrategy strategy = InferStrategy::Point;
    if (cfg_.infer_strategy != "auto") {
        strategy = infer_strategy_from_string(cfg_.infer_strategy);
    } else if (cfg_.sizes.valid > 0) {
        BncEnv venv(load_split("valid"), cfg_.solver, policy.update_rounds, load_refs("valid"), head_opts);
        double best = -std::numeric_limits<double>::infinity();
        for (auto s : {InferStrategy::Point, InferStrategy::Ucb}) {
            const double m = median_value(headline_scores(venv, l2sep_schedules(venv, s)));
            validation[to_string(s)] = m;
            if (m > best) {
                best = m;
                strategy = s;
            }
        }
    }
    res.strategy = to_string(strategy);
    res.validation = validation;

    const auto test = load_split("test");
    const json& test_refs = refs_doc.at("splits").at("test");
    std::vector<Reference> time_refs, gap_refs;
    for (const auto& e : test_refs) {
        time_refs.push_back(Reference{e.at("t0").get<double>(), e.at("effort").get<double>()});
        gap_refs.push_back(Reference{e.value("gap0", 0.0), e.at("effort").get<double>()});
        res.default_gap.push_back(e.value("gap0", 0.0));
    }
    res.gap_limit = refs_doc.at("gap_limit").get<double>();
    for (const auto& inst : test) res.instances.push_back(inst.name);
    res.refs = time_refs;
    const bool do_gap = cfg_.evaluate_gap || gap_headline;
    BncEnv tenv(test, cfg_.solver, policy.update_rounds, gap_headline ? gap_refs : time_refs, head_opts);

    const std::size_t n = test.size();
    const std::uint64_t eval_seed = stage_seed(cfg_.seed, "evaluate");
    for (auto m : kAllMethods) {
        MethodSamples ms;
        ms.method = m;
        Rng rng(mix_seed(eval_seed, static_cast<std::uint64_t>(m)));
        switch (m) {
            case Method::Default:
                ms.schedules.assign(n, default_schedule());
                break;
            case Method::Random:
                for (std::size_t i = 0; i < n; ++i)
                    ms.schedules.push_back(ConfigSchedule::constant(SeparatorConfig{static_cast<std::uint8_t>(rng.uniform_int(0, 255))}));
                break;
            case Method::Prune:
                ms.schedules.assign(n, ConfigSchedule::constant(prune));
                break;
            case Method::InstanceAgnostic:
                ms.schedules.assign(n, ConfigSchedule::constant(agn));
                break;
            case Method::RandomWithinSubspace:
                for (std::size_t i = 0; i < n; ++i) ms.schedules.push_back(ConfigSchedule::constant(sub.A[rng.index(sub.A.size())]));
                break;
            case Method::L2Sep:
                ms.schedules = l2sep_schedules(tenv, strategy);
                break;
        }
        std::vector<double> time_d(n, 0.0), gap_d(n, 0.0);
        const EnvOptions time_opts = env_options(false);
        if (m != Method::Default) {
            parallel_for(n, jobs_, [&](std::size_t i) {
                const auto d = improvements(test[i], ms.schedules[i], cfg_.solver, time_opts, time_refs[i], mix_seed(eval_seed, i));
                double s = 0;
                for (double x : d) s += x;
                time_d[i] = s / static_cast<double>(d.size());
            });
            if (do_gap) {
                EnvOptions g = time_opts;
                g.gap_effort_limit = res.gap_limit;
                parallel_for(n, jobs_, [&](std::size_t i) {
                    gap_d[i] = improvements(test[i], ms.schedules[i], cfg_.solver, g, gap_refs[i], mix_seed(eval_seed, i))[0];
                });
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double t0 = time_refs[i].value;
            ms.time.push_back(ImprovementSample{test[i].name, t0, t0 * (1.0 - time_d[i]), time_d[i]});
        }
        if (do_gap) ms.gap = gap_d;
        const auto a = aggregate(gap_headline ? gap_d : time_d);
        log(std::string(to_string(m)) + ": median " + pct(a.median));
        res.methods.push_back(std::move(ms));
    }
    write("eval.json", eval_to_json(res).dump(1) + "\n");
}

void Pipeline::report() {
    const EvalResult res = eval_from_json(read_artifact(dir_ / "eval.json", "evaluate"));
    const json subj = read_artifact(dir_ / "subspace.json", "restrict");
    const auto sub = subspace_from_json(subj);
    const json policy = read_artifact(dir_ / "policy.json", "train");
    const auto rounds = policy.at("update_rounds").get<std::vector<long>>();
    const json refs_doc = read_artifact(dir_ / "refs.json", "references");

    std::ostringstream txt;
    txt << "experiment " << cfg_.name << " | class " << to_string(cfg_.generator.tag) << " | metric "
        << to_string(cfg_.metric) << " | test instances " << res.instances.size() << "\n";
    txt << "subspace |A| = " << sub.A.size() << ", threshold b = " << num(sub.threshold) << ", inference strategy "
        << res.strategy << "\n\n";
    txt << results_table(res, Objective::Time);
    if (!res.methods.empty() && !res.methods.front().gap.empty()) {
        txt << "\n" << results_table(res, Objective::Gap);
        txt << "effort limit " << num(res.gap_limit) << ", median default gap " << num(median_value(res.default_gap)) << "\n";
    }
    std::vector<double> eff, nodes;
    for (const auto& e : refs_doc.at("splits").at("test")) {
        eff.push_back(e.at("effort").get<double>());
        nodes.push_back(e.at("nodes").get<double>());
    }
    txt << "\ndefault on test: median effort " << num(median_value(eff)) << ", median nodes " << num(median_value(nodes))
        << "\n";

    write("report/results.txt", txt.str());
    std::string csv = results_csv(res, Objective::Time);
    if (!res.methods.empty() && !res.methods.front().gap.empty()) {
        const std::string g = results_csv(res, Objective::Gap);
        csv += g.substr(g.find('\n') + 1);
        write("report/gap_results.csv", g);
    }
    write("report/samples.csv", samples_csv(res));
    write("report/heatmap.csv", heatmap_csv(sub.A));
    write("report/frequencies.csv", frequencies_csv(res, sub.A, rounds));
    write("report/tradeoff.csv", read_text(dir_ / "tradeoff.csv", "tradeoff"));
    std::ostringstream defaults;
    defaults << "instance,effort,nodes,status,gap_at_limit\n";
    for (const auto& e : refs_doc.at("splits").at("test"))
        defaults << e.at("name").get<std::string>() << "," << num(e.at("effort").get<double>()) << ","
                 << e.at("nodes").get<long>() << "," << e.at("status").get<std::string>() << ","
                 << num(e.value("gap0", 0.0)) << "\n";
    write("report/defaults.csv", defaults.str());
    write("report/results.csv", csv);
}

void Pipeline::run_stage(const std::string& stage) {
    const auto t0 = std::chrono::steady_clock::now();
    log("stage " + stage);
    if (stage == "gen-data") gen_data();
    else if (stage == "references") references();
    else if (stage == "build-table") build_table();
    else if (stage == "tradeoff") tradeoff();
    else if (stage == "restrict") restrict();
    else if (stage == "train") train();
    else if (stage == "evaluate") evaluate();
    else if (stage == "report") report();
    else throw ConfigError("unknown stage '" + stage + "'");
    note_timing(stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

void Pipeline::run(bool force) {
    const fs::path cfg_path = dir_ / "config.json";
    const std::string text = cfg_.to_json().dump(1) + "\n";
    if (fs::exists(cfg_path) && !force) {
        const json stored = read_json_file(cfg_path);
        if (stored != cfg_.to_json())
            throw ConfigError(dir_.string() + " holds results of a different configuration (use a fresh directory or --force)");
    }
    write_text_file(cfg_path, text);
    json seeds{{"master", cfg_.seed},
               {"table", stage_seed(cfg_.seed, "table")},
               {"train", stage_seed(cfg_.seed, "train")},
               {"evaluate", stage_seed(cfg_.seed, "evaluate")}};
    write_text_file(dir_ / "seeds.json", seeds.dump(1) + "\n");
    bool dirty = force;
    for (const auto& stage : pipeline_stages()) {
        if (dirty || !stage_done(stage)) {
            run_stage(stage);
            dirty = true;
        } else {
            log("stage " + stage + " up to date");
        }
    }
}

}  // namespace l2sep
