#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "l2sep/harness.hpp"
#include "l2sep/instance_io.hpp"

using namespace l2sep;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("l2sep_harness_" + name);
    fs::remove_all(d);
    return d;
}

std::map<std::string, std::string> report_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir / "report")) out[e.path().filename().string()] = slurp(e.path());
    return out;
}

}  // namespace

TEST_CASE("config JSON round trip and strict keys") {
    const auto c = ExperimentConfig::desk(ClassTag::MaxCut);
    const auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());

    nlohmann::json patch{{"class", "indep_set"}, {"seed", 9}, {"run", {{"T", 5}}}};
    const auto p = ExperimentConfig::from_json(patch);
    CHECK(p.generator.tag == ClassTag::IndepSet);
    CHECK(p.seed == 9);
    CHECK(p.run.T == 5);
    CHECK(p.run.P == c.run.P);

    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"class", "packing"}, {"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"class", "packing"}, {"run", {{"Tx", 1}}}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"seed", 1}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"class", "packing"}, {"metric", "cpu"}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"class", "packing"}, {"arch", {{"hidden", 6}, {"heads", 4}}}}),
                    ConfigError);
}

TEST_CASE("splits are disjoint and reproducible") {
    const auto c = ExperimentConfig::smoke(ClassTag::Packing);
    const auto a = make_split(c, "small", 3);
    const auto b = make_split(c, "small", 3);
    const auto t = make_split(c, "test", 3);
    for (int k = 0; k < 3; ++k) {
        CHECK(a.seeds[k] == b.seeds[k]);
        CHECK(instance_to_json(a.instances[k]) == instance_to_json(b.instances[k]));
        for (int q = 0; q < 3; ++q) CHECK(a.seeds[k] != t.seeds[q]);
    }
    CHECK(a.instances[0].name == "packing_small_0000");
    CHECK_THROWS_AS(make_split(c, "holdout", 1), ConfigError);
}

TEST_CASE("prune mask switches off separators that never applied a cut") {
    SolveResult r1, r2;
    r1.sep[static_cast<int>(SeparatorId::Clique)].applied = 2;
    r2.sep[static_cast<int>(SeparatorId::GomoryMir)].applied = 1;
    const auto m = prune_mask({r1, r2});
    for (auto id : kAllSeparators)
        CHECK(m.active(id) == (id == SeparatorId::Clique || id == SeparatorId::GomoryMir));
    CHECK(prune_mask({}).bits == 0);
}

TEST_CASE("threshold choice maximises the blended score") {
    RewardTable t;
    t.configs = {SeparatorConfig{1}, SeparatorConfig{2}, SeparatorConfig{3}};
    t.instances = {"a", "b"};
    // config 1 is strong on a, config 2 on b, config 3 is a steady middle ground
    t.T = {{0.9, -1.0}, {-1.0, 0.9}, {0.3, 0.3}};
    t.r_min = -3;
    const std::vector<double> grid{-1e9, 0.0};
    const double b = choose_threshold(t, grid, 2);
    const auto at = [&](double x) {
        const auto s = restrict_subspace(t, 2, x).steps.back();
        return 0.5 * s.erm + 0.5 * s.mean_agn;
    };
    CHECK(at(b) >= at(-1e9));
    CHECK(at(b) >= at(0.0));
    CHECK_THROWS_AS(choose_threshold(t, {5.0}, 2), ConfigError);
}

TEST_CASE("heatmap and frequency reports") {
    const std::vector<SeparatorConfig> A{SeparatorConfig{1}, SeparatorConfig{6}};
    const auto h = heatmap_csv(A);
    int lines = 0;
    for (char c : h) lines += c == '\n';
    CHECK(lines == kNumSeparators + 1);

    EvalResult r;
    MethodSamples m;
    m.method = Method::L2Sep;
    for (int i = 0; i < 4; ++i) {
        ConfigSchedule s;
        s.updates = {{0, A[i % 2]}, {5, A[i == 0 ? 0 : 1]}};
        m.schedules.push_back(s);
    }
    r.methods.push_back(m);
    const auto f = frequencies_csv(r, A, {0, 5});
    std::istringstream in(f);
    std::string line;
    std::getline(in, line);
    double sums[2] = {0, 0};
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        REQUIRE(cells.size() == 5);
        sums[std::stoi(cells[0])] += std::stod(cells[4]);
    }
    CHECK(sums[0] == doctest::Approx(1.0));
    CHECK(sums[1] == doctest::Approx(1.0));
    CHECK(f.find("0,0," + A[0].to_string() + ",2,0.5") != std::string::npos);
    CHECK(f.find("1,5," + A[1].to_string() + ",3,0.75") != std::string::npos);
}

TEST_CASE("smoke pipeline runs, resumes and reproduces") {
    const auto cfg = ExperimentConfig::smoke(ClassTag::Packing);
    const auto d1 = fresh_dir("a");
    const auto d2 = fresh_dir("b");
    std::vector<std::string> ran;
    {
        Pipeline p(cfg, d1, 1);
        p.set_log([&](const std::string& s) {
            if (s.rfind("stage ", 0) == 0 && s.find("up to date") == std::string::npos) ran.push_back(s.substr(6));
        });
        p.run();
    }
    CHECK(ran == pipeline_stages());
    CHECK(fs::exists(d1 / "timing.json"));
    const auto files = report_files(d1);
    for (const char* f : {"results.csv", "results.txt", "samples.csv", "heatmap.csv", "frequencies.csv", "tradeoff.csv",
                          "gap_results.csv", "defaults.csv"})
        CHECK_MESSAGE(files.count(f), f);

    const auto ev = eval_from_json(read_json_file(d1 / "eval.json"));
    CHECK(ev.methods.size() == kAllMethods.size());
    for (const auto& m : ev.methods) {
        CHECK(m.time.size() == 5u);
        CHECK(m.gap.size() == 5u);
        for (const auto& s : m.time) CHECK(s.delta >= -3.0);
    }
    CHECK(eval_to_json(ev) == read_json_file(d1 / "eval.json"));
    for (const auto& s : ev.methods.front().time) CHECK(s.delta == 0.0);

    // nothing reruns when every artifact exists
    ran.clear();
    {
        Pipeline p(cfg, d1, 1);
        p.set_log([&](const std::string& s) {
            if (s.rfind("stage ", 0) == 0 && s.find("up to date") == std::string::npos) ran.push_back(s.substr(6));
        });
        p.run();
    }
    CHECK(ran.empty());

    // a lost policy reruns training and everything after it
    fs::remove(d1 / "policy.json");
    {
        Pipeline p(cfg, d1, 1);
        p.set_log([&](const std::string& s) {
            if (s.rfind("stage ", 0) == 0 && s.find("up to date") == std::string::npos) ran.push_back(s.substr(6));
        });
        p.run();
    }
    CHECK(ran == std::vector<std::string>{"train", "evaluate", "report"});
    CHECK(report_files(d1) == files);

    // an independent run with more workers is byte identical
    Pipeline(cfg, d2, 3).run();
    CHECK(report_files(d2) == files);
    CHECK(slurp(d2 / "policy.json") == slurp(d1 / "policy.json"));

    // a different configuration refuses to reuse the directory
    auto other = cfg;
    other.seed = 99;
    CHECK_THROWS_AS(Pipeline(other, d1, 1).run(), ConfigError);
    fs::remove_all(d1);
    fs::remove_all(d2);
}
