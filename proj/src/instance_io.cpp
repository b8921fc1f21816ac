#include "l2sep/instance_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace l2sep {
namespace {

using nlohmann::json;

json bound_to_json(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
}

double bound_from_json(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    throw ParseError(where, "expected a number or \"inf\"/\"-inf\"");
}

const json& field(const json& doc, const char* key, const std::string& where) {
    if (!doc.is_object()) throw ParseError(where, "expected an object");
    auto it = doc.find(key);
    if (it == doc.end()) throw ParseError(where, std::string("missing field '") + key + "'");
    return *it;
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ParseError(where, "expected a number");
    return v.get<double>();
}

long integer_value(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ParseError(where, "expected an integer");
    return v.get<long>();
}

const json& array_of(const json& v, std::size_t expected, const std::string& where) {
    if (!v.is_array()) throw ParseError(where, "expected an array");
    if (expected != static_cast<std::size_t>(-1) && v.size() != expected)
        throw ParseError(where, "expected " + std::to_string(expected) + " entries, found " + std::to_string(v.size()));
    return v;
}

}  // namespace

json instance_to_json(const MilpInstance& inst) {
    json doc;
    doc["format_version"] = kInstanceFormatVersion;
    doc["name"] = inst.name;
    doc["class_tag"] = to_string(inst.class_tag);
    doc["num_vars"] = inst.num_vars();
    doc["num_cons"] = inst.num_rows();
    doc["objective"] = inst.objective;
    json lb = json::array(), ub = json::array(), integer = json::array();
    for (int j = 0; j < inst.num_vars(); ++j) {
        lb.push_back(bound_to_json(inst.lb[j]));
        ub.push_back(bound_to_json(inst.ub[j]));
        integer.push_back(inst.integer[j] ? 1 : 0);
    }
    doc["lb"] = std::move(lb);
    doc["ub"] = std::move(ub);
    doc["integer"] = std::move(integer);
    json rows = json::array(), entries = json::array();
    for (int i = 0; i < inst.num_rows(); ++i) {
        const auto& r = inst.rows[i];
        rows.push_back({{"sense", to_string(r.sense)}, {"rhs", r.rhs}});
        for (std::size_t k = 0; k < r.idx.size(); ++k) entries.push_back(json::array({i, r.idx[k], r.coef[k]}));
    }
    doc["rows"] = std::move(rows);
    doc["entries"] = std::move(entries);
    doc["metadata"] = inst.metadata;
    return doc;
}

MilpInstance instance_from_json(const json& doc, const std::string& where) {
    const long version = integer_value(field(doc, "format_version", where), where + ".format_version");
    if (version != kInstanceFormatVersion)
        throw ParseError(where + ".format_version", "unsupported version " + std::to_string(version));
    MilpInstance inst;
    const auto& name = field(doc, "name", where);
    if (!name.is_string()) throw ParseError(where + ".name", "expected a string");
    inst.name = name.get<std::string>();
    const auto& tag = field(doc, "class_tag", where);
    if (!tag.is_string()) throw ParseError(where + ".class_tag", "expected a string");
    try {
        inst.class_tag = class_tag_from_string(tag.get<std::string>());
    } catch (const ValidationError& e) {
        throw ParseError(where + ".class_tag", e.what());
    }
    const long n = integer_value(field(doc, "num_vars", where), where + ".num_vars");
    const long m = integer_value(field(doc, "num_cons", where), where + ".num_cons");
    if (n < 0 || m < 0) throw ParseError(where, "negative dimensions");

    const auto& obj = array_of(field(doc, "objective", where), n, where + ".objective");
    const auto& lb = array_of(field(doc, "lb", where), n, where + ".lb");
    const auto& ub = array_of(field(doc, "ub", where), n, where + ".ub");
    const auto& in = array_of(field(doc, "integer", where), n, where + ".integer");
    for (long j = 0; j < n; ++j) {
        const std::string at = "[" + std::to_string(j) + "]";
        inst.objective.push_back(number(obj[j], where + ".objective" + at));
        inst.lb.push_back(bound_from_json(lb[j], where + ".lb" + at));
        inst.ub.push_back(bound_from_json(ub[j], where + ".ub" + at));
        inst.integer.push_back(integer_value(in[j], where + ".integer" + at) != 0);
    }
    const auto& rows = array_of(field(doc, "rows", where), m, where + ".rows");
    for (long i = 0; i < m; ++i) {
        const std::string at = where + ".rows[" + std::to_string(i) + "]";
        SparseRow r;
        const auto& sense = field(rows[i], "sense", at);
        if (!sense.is_string()) throw ParseError(at + ".sense", "expected a string");
        try {
            r.sense = row_sense_from_string(sense.get<std::string>());
        } catch (const ValidationError& e) {
            throw ParseError(at + ".sense", e.what());
        }
        r.rhs = number(field(rows[i], "rhs", at), at + ".rhs");
        inst.rows.push_back(std::move(r));
    }
    const auto& entries = array_of(field(doc, "entries", where), static_cast<std::size_t>(-1), where + ".entries");
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const std::string at = where + ".entries[" + std::to_string(k) + "]";
        const auto& e = array_of(entries[k], 3, at);
        const long i = integer_value(e[0], at + "[0]");
        const long j = integer_value(e[1], at + "[1]");
        const double v = number(e[2], at + "[2]");
        if (i < 0 || i >= m) throw ParseError(at, "row index " + std::to_string(i) + " out of range");
        if (j < 0 || j >= n) throw ParseError(at, "column index " + std::to_string(j) + " out of range");
        inst.rows[i].idx.push_back(static_cast<int>(j));
        inst.rows[i].coef.push_back(v);
    }
    if (auto it = doc.find("metadata"); it != doc.end()) {
        if (!it->is_object()) throw ParseError(where + ".metadata", "expected an object");
        for (const auto& [k, v] : it->items()) inst.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    inst.validate();
    return inst;
}

json parse_json_text(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // locate the byte offset as line:column
        std::size_t line = 1, col = 1;
        for (std::size_t k = 0; k < e.byte && k < text.size(); ++k) {
            if (text[k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(where + ":" + std::to_string(line) + ":" + std::to_string(col), e.what());
    }
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json_text(ss.str(), path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

void write_instance(const MilpInstance& inst, const std::filesystem::path& path) {
    write_text_file(path, instance_to_json(inst).dump(1) + "\n");
}

MilpInstance read_instance(const std::filesystem::path& path) {
    return instance_from_json(read_json_file(path), path.string());
}

}  // namespace l2sep
