#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "l2sep/harness.hpp"
#include "l2sep/instance_io.hpp"

namespace py = pybind11;
using namespace l2sep;
using nlohmann::json;

namespace {

json parse(const std::string& text, const char* where) { return parse_json_text(text, where); }

std::string generate_instance(const std::string& cls, std::uint64_t seed, int a, int b) {
    auto spec = ExperimentConfig::desk(class_tag_from_string(cls)).generator;
    if (a > 0) spec.a = a;
    if (b > 0) spec.b = b;
    return instance_to_json(generate(spec, seed)).dump();
}

std::string solve_instance(const std::string& instance, const std::optional<std::string>& schedule,
                           const std::optional<std::string>& params, std::uint64_t seed) {
    const auto inst = instance_from_json(parse(instance, "instance"), "instance");
    const auto sched = schedule ? schedule_from_json(parse(*schedule, "schedule")) : default_schedule();
    const auto p = params ? params_from_json(parse(*params, "params")) : BnCParams{};
    py::gil_scoped_release release;
    return result_to_json(solve(inst, sched, p, seed)).dump();
}

py::dict aggregate_samples(const std::vector<double>& v) {
    const auto a = aggregate(v);
    py::dict d;
    d["median"] = a.median;
    d["iqm"] = a.iqm;
    d["mean"] = a.mean;
    d["std"] = a.std;
    d["count"] = a.count;
    return d;
}

std::string restrict_table(const std::vector<int>& configs, const std::vector<std::string>& instances,
                           const std::vector<std::vector<double>>& T, std::size_t size, std::optional<double> b,
                           double r_min) {
    RewardTable t;
    for (int c : configs) {
        if (c < 0 || c > 255) throw ConfigError("config bitmask out of range");
        t.configs.push_back(SeparatorConfig{static_cast<std::uint8_t>(c)});
    }
    t.instances = instances;
    t.T = T;
    t.r_min = r_min;
    t.validate();
    const double thr = b ? *b : choose_threshold(t, RestrictionParams{}.thresholds, size);
    return subspace_to_json(restrict_subspace(t, size, thr)).dump();
}

ExperimentConfig config_from(const std::string& text) { return ExperimentConfig::from_json(parse(text, "config")); }

std::string preset(const std::string& cls, const std::string& which) {
    const auto tag = class_tag_from_string(cls);
    if (which == "desk") return ExperimentConfig::desk(tag).to_json().dump();
    if (which == "full") return ExperimentConfig::full(tag).to_json().dump();
    if (which == "smoke") return ExperimentConfig::smoke(tag).to_json().dump();
    throw ConfigError("unknown preset '" + which + "' (expected desk, full or smoke)");
}

void run_pipeline(const std::string& config, const std::string& out, int jobs, bool force) {
    Pipeline p(config_from(config), out, jobs);
    py::gil_scoped_release release;
    p.run(force);
}

void run_stage(const std::string& config, const std::string& out, const std::string& stage, int jobs) {
    Pipeline p(config_from(config), out, jobs);
    py::gil_scoped_release release;
    p.run_stage(stage);
}

}  // namespace

PYBIND11_MODULE(_l2sep, m) {
    m.doc() = "Instance-aware separator configuration for a branch-and-cut solver";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<RefusalError>(m, "RefusalError", PyExc_RuntimeError);

    m.def("generate", &generate_instance, py::arg("cls"), py::arg("seed"), py::arg("a") = 0, py::arg("b") = 0);
    m.def("solve", &solve_instance, py::arg("instance"), py::arg("schedule") = py::none(), py::arg("params") = py::none(),
          py::arg("seed") = 0);
    m.def("rel_improvement", &rel_improvement, py::arg("t0"), py::arg("t_pi"));
    m.def("clipped_reward", &clipped_reward, py::arg("deltas"), py::arg("r_min") = kRewardFloor);
    m.def("gap_improvement", &gap_improvement, py::arg("g0"), py::arg("g_pi"), py::arg("eps") = 1e-9);
    m.def("aggregate", &aggregate_samples, py::arg("samples"));
    m.def("config_string", [](int bits) { return SeparatorConfig{static_cast<std::uint8_t>(bits)}.to_string(); });
    m.def("config_bits", [](const std::string& s) { return static_cast<int>(SeparatorConfig::from_string(s).bits); });
    m.def("separators", [] {
        std::vector<std::string> out;
        for (auto id : kAllSeparators) out.emplace_back(to_string(id));
        return out;
    });
    m.def("restrict", &restrict_table, py::arg("configs"), py::arg("instances"), py::arg("table"), py::arg("size"),
          py::arg("threshold") = py::none(), py::arg("r_min") = kRewardFloor);
    m.def("preset", &preset, py::arg("cls"), py::arg("which") = "desk");
    m.def("run_pipeline", &run_pipeline, py::arg("config"), py::arg("out"), py::arg("jobs") = 1, py::arg("force") = false);
    m.def("run_stage", &run_stage, py::arg("config"), py::arg("out"), py::arg("stage"), py::arg("jobs") = 1);
    m.def("stages", &pipeline_stages);
}
