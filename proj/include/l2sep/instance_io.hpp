#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "l2sep/instance.hpp"

namespace l2sep {

inline constexpr int kInstanceFormatVersion = 1;

/// JSON document with explicit sparse (row, col, coeff) triplets.
/// Infinite bounds are written as the strings "inf" / "-inf".
nlohmann::json instance_to_json(const MilpInstance& inst);
MilpInstance instance_from_json(const nlohmann::json& doc, const std::string& where = "<json>");

void write_instance(const MilpInstance& inst, const std::filesystem::path& path);
MilpInstance read_instance(const std::filesystem::path& path);

/// Parse text; JSON syntax errors are reported as ParseError with line/column.
nlohmann::json parse_json_text(const std::string& text, const std::string& where);
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace l2sep
