#include "cpgraph/dataset.hpp"

#include <openssl/evp.h>

#include <json.hpp>
#include <stdexcept>

#include "cpgraph/graph_io.hpp"

namespace cpg {

using json = nlohmann::json;

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw FormatError(FormatError::Kind::malformed, "base64 length is not a multiple of 4");
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw FormatError(FormatError::Kind::malformed, "invalid base64");
  // EVP_DecodeBlock keeps the zero bytes standing in for padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string example_to_json_line(const LabeledExample& ex) {
  json j;
  j["format"] = kDatasetFormatVersion;
  j["label"] = ex.label;
  j["meta"] = {{"problem", ex.meta.problem},
               {"size", ex.meta.size},
               {"seed", ex.meta.seed},
               {"pair", ex.meta.pair},
               {"model", ex.meta.model}};
  j["graph"] = base64_encode(serialize_graph(ex.graph));
  return j.dump();
}

LabeledExample example_from_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::malformed, std::string("invalid JSON: ") + e.what());
  }
  try {
    const int format = j.at("format").get<int>();
    if (format != kDatasetFormatVersion)
      throw FormatError(FormatError::Kind::version_mismatch,
                        "dataset format " + std::to_string(format) + ", expected " + std::to_string(kDatasetFormatVersion));
    LabeledExample ex;
    ex.label = j.at("label").get<bool>();
    const auto& m = j.at("meta");
    ex.meta.problem = m.at("problem").get<std::string>();
    ex.meta.size = m.at("size").get<int>();
    ex.meta.seed = m.at("seed").get<std::uint64_t>();
    ex.meta.pair = m.at("pair").get<std::uint64_t>();
    ex.meta.model = m.at("model").get<std::string>();
    ex.graph = deserialize_graph(base64_decode(j.at("graph").get<std::string>()));
    return ex;
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::malformed, std::string("bad dataset record: ") + e.what());
  }
}

std::string dataset_to_jsonl(const std::vector<LabeledExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += example_to_json_line(ex);
    out += '\n';
  }
  return out;
}

std::vector<LabeledExample> dataset_from_jsonl(std::string_view text) {
  std::vector<LabeledExample> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(example_from_json_line(line));
    } catch (const FormatError& e) {
      throw FormatError(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<LabeledExample> read_dataset(const std::string& path) { return dataset_from_jsonl(read_file(path)); }

void write_dataset(const std::string& path, const std::vector<LabeledExample>& examples) {
  write_file(path, dataset_to_jsonl(examples));
}

}  // namespace cpg
