#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "l2sep/harness.hpp"
#include "l2sep/instance_io.hpp"
#include "l2sep/parallel.hpp"

using namespace l2sep;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::string out = "l2sep_run";
    std::string cls;
    std::string preset = "desk";
    int jobs = 0;
    bool force = false;
    bool quiet = false;
    std::optional<std::string> ucb_z;
    std::optional<std::string> sep_feat;
    std::optional<std::string> metric;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "experiment config (JSON); keys missing from it keep the preset values");
    app->add_option("--out", c.out, "experiment directory");
    app->add_option("--class", c.cls, "instance class: packing, bin_packing, max_cut, comb_auction, indep_set");
    app->add_flag("--desk{desk},--full{full},--smoke{smoke}", c.preset, "size preset used with --class (default desk)");
    app->add_option("--jobs", c.jobs, "worker threads (default: L2SEP_JOBS or the CPU count)");
    app->add_option("--ucb-z", c.ucb_z, "UCB matrix: full, diag, lastlayer or auto");
    app->add_option("--sep-feat", c.sep_feat, "separator node features: rich or binary");
    app->add_option("--metric", c.metric, "effort or wall");
    app->add_option("--seed", c.seed, "master seed");
    app->add_flag("-q,--quiet", c.quiet, "suppress progress messages");
}

ExperimentConfig preset_for(ClassTag tag, const std::string& preset) {
    if (preset == "full") return ExperimentConfig::full(tag);
    if (preset == "smoke") return ExperimentConfig::smoke(tag);
    return ExperimentConfig::desk(tag);
}

ExperimentConfig resolve_config(const Common& c) {
    ExperimentConfig cfg;
    const fs::path stored = fs::path(c.out) / "config.json";
    if (!c.config.empty()) {
        nlohmann::json j;
        try {
            j = read_json_file(c.config);
        } catch (const ParseError& e) {
            throw ConfigError(e.what());
        }
        if (!c.cls.empty()) j["class"] = c.cls;
        if (!j.contains("class")) throw ConfigError("config: 'class' is required");
        cfg = ExperimentConfig::from_json(j, preset_for(class_tag_from_string(j["class"].get<std::string>()), c.preset));
    } else if (!c.cls.empty()) {
        cfg = preset_for(class_tag_from_string(c.cls), c.preset);
    } else if (fs::exists(stored)) {
        cfg = load_config(stored);
    } else {
        throw ConfigError("no configuration: pass --config or --class, or point --out at an existing experiment");
    }
    nlohmann::json patch = nlohmann::json::object();
    if (c.ucb_z) patch["run"]["z_mode"] = *c.ucb_z;
    if (c.sep_feat) patch["arch"]["sep"] = *c.sep_feat;
    if (c.metric) patch["metric"] = *c.metric;
    if (c.seed) patch["seed"] = *c.seed;
    if (!patch.empty()) cfg = ExperimentConfig::from_json(patch, cfg);
    return cfg;
}

Pipeline make_pipeline(const Common& c, const ExperimentConfig& cfg) {
    Pipeline p(cfg, c.out, c.jobs);
    if (!c.quiet) p.set_log([](const std::string& s) { std::cerr << "[l2sep] " << s << "\n"; });
    return p;
}

// Single stages record the configuration they ran with.
void run_single(const Common& c, const ExperimentConfig& cfg, const std::string& stage) {
    auto p = make_pipeline(c, cfg);
    write_text_file(fs::path(c.out) / "config.json", cfg.to_json().dump(1) + "\n");
    p.run_stage(stage);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learning to separate: instance-aware cutting-plane configuration for a branch-and-cut solver"};
    app.require_subcommand(1);

    // gen-data
    Common gen;
    int gen_count = 0;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate instances (a fixed count, or every split of an experiment)");
    add_common(gen_cmd, gen);
    gen_cmd->add_option("--count", gen_count, "number of instances; omit to generate the experiment splits");

    // solve
    std::string solve_inst, solve_sched, solve_params;
    bool solve_snap = false;
    auto* solve_cmd = app.add_subcommand("solve", "solve one instance and print the result as JSON");
    solve_cmd->add_option("--instance", solve_inst, "instance JSON")->required();
    solve_cmd->add_option("--schedule", solve_sched, "config schedule JSON (default: every separator on)");
    solve_cmd->add_option("--params", solve_params, "solver parameters JSON");
    solve_cmd->add_flag("--snapshots", solve_snap, "include LP snapshots");

    Common table, trade, restr, train, eval, rep, pipe;
    auto* table_cmd = app.add_subcommand("build-table", "build the reward table on K_small (runs the reference solves first if needed)");
    add_common(table_cmd, table);

    std::vector<double> trade_thresholds;
    std::optional<std::size_t> trade_size;
    auto* trade_cmd = app.add_subcommand("tradeoff", "threshold / size diagnostics of the restriction");
    add_common(trade_cmd, trade);
    trade_cmd->add_option("--thresholds", trade_thresholds, "threshold grid")->delimiter(',');
    trade_cmd->add_option("--size", trade_size, "largest subspace size");

    std::optional<std::size_t> restr_size;
    std::string restr_threshold;
    auto* restr_cmd = app.add_subcommand("restrict", "restrict the configuration space");
    add_common(restr_cmd, restr);
    restr_cmd->add_option("--size", restr_size, "subspace size |A|");
    restr_cmd->add_option("--threshold", restr_threshold, "filter threshold b, or 'auto'");

    auto* train_cmd = app.add_subcommand("train", "forward training of the reward networks");
    add_common(train_cmd, train);
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate every method on the test split");
    add_common(eval_cmd, eval);
    auto* rep_cmd = app.add_subcommand("report", "write the result tables and interpretation reports");
    add_common(rep_cmd, rep);
    auto* pipe_cmd = app.add_subcommand("pipeline", "run every stage whose results are missing");
    add_common(pipe_cmd, pipe);
    pipe_cmd->add_flag("--force", pipe.force, "rerun every stage");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen_cmd) {
            if (gen_count > 0) {
                if (gen.cls.empty()) throw ConfigError("gen-data --count needs --class");
                auto cfg = preset_for(class_tag_from_string(gen.cls), gen.preset);
                if (gen.seed) cfg.seed = *gen.seed;
                const auto s = make_split(cfg, "test", gen_count);
                for (const auto& inst : s.instances) write_instance(inst, fs::path(gen.out) / (inst.name + ".json"));
                if (!gen.quiet) std::cerr << "[l2sep] wrote " << s.instances.size() << " instances to " << gen.out << "\n";
            } else {
                run_single(gen, resolve_config(gen), "gen-data");
            }
        } else if (*solve_cmd) {
            const auto inst = read_instance(solve_inst);
            const ConfigSchedule sched = solve_sched.empty() ? default_schedule() : schedule_from_json(read_json_file(solve_sched));
            BnCParams params;
            if (!solve_params.empty()) params = params_from_json(read_json_file(solve_params));
            const auto r = solve(inst, sched, params);
            std::cout << result_to_json(r, solve_snap).dump(1) << "\n";
            if (r.status == SolveStatus::NumericalError) return 3;
        } else if (*table_cmd) {
            const auto cfg = resolve_config(table);
            auto p = make_pipeline(table, cfg);
            if (!p.stage_done("gen-data")) run_single(table, cfg, "gen-data");
            if (!p.stage_done("references")) run_single(table, cfg, "references");
            run_single(table, cfg, "build-table");
        } else if (*trade_cmd) {
            auto cfg = resolve_config(trade);
            if (!trade_thresholds.empty()) cfg.restriction.thresholds = trade_thresholds;
            if (trade_size) cfg.restriction.size = *trade_size;
            cfg.validate();
            run_single(trade, cfg, "tradeoff");
            std::cout << std::ifstream(fs::path(trade.out) / "tradeoff.csv").rdbuf();
        } else if (*restr_cmd) {
            auto cfg = resolve_config(restr);
            if (restr_size) cfg.restriction.size = *restr_size;
            if (!restr_threshold.empty()) {
                if (restr_threshold == "auto") {
                    cfg.restriction.threshold.reset();
                } else {
                    try {
                        cfg.restriction.threshold = std::stod(restr_threshold);
                    } catch (const std::exception&) {
                        throw ConfigError("--threshold must be a number or 'auto'");
                    }
                }
            }
            cfg.validate();
            run_single(restr, cfg, "restrict");
        } else if (*train_cmd) {
            run_single(train, resolve_config(train), "train");
        } else if (*eval_cmd) {
            run_single(eval, resolve_config(eval), "evaluate");
        } else if (*rep_cmd) {
            run_single(rep, resolve_config(rep), "report");
            std::cout << std::ifstream(fs::path(rep.out) / "report" / "results.txt").rdbuf();
        } else if (*pipe_cmd) {
            auto p = make_pipeline(pipe, resolve_config(pipe));
            p.run(pipe.force);
            std::cout << std::ifstream(p.report_dir() / "results.txt").rdbuf();
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
