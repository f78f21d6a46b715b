#pragma once

// Datasets are JSON Lines, one labeled graph per line:
//   {"format":1,"label":true,"meta":{...},"graph":"<base64 CPG1 bytes>"}

#include <string>
#include <string_view>
#include <vector>

#include "cpgraph/generators.hpp"
#include "cpgraph/graph_io.hpp"

namespace cpg {

inline constexpr int kDatasetFormatVersion = 1;

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);  // FormatError(malformed) on bad input

std::string sha256_hex(std::string_view bytes);

std::string example_to_json_line(const LabeledExample& ex);  // no trailing newline
LabeledExample example_from_json_line(std::string_view line);

std::string dataset_to_jsonl(const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> dataset_from_jsonl(std::string_view text);  // errors name the line

std::vector<LabeledExample> read_dataset(const std::string& path);
void write_dataset(const std::string& path, const std::vector<LabeledExample>& examples);

}  // namespace cpg
