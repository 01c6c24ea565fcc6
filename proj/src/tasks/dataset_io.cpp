#include "moelab/tasks/dataset_io.hpp"

#include <fstream>

#include "moelab/errors.hpp"

namespace moelab::tasks {

std::string sample_to_line(const Sample& s) {
  nlohmann::json meta = s.meta;
  meta["answer_begin"] = s.answer_begin;
  meta["answer_end"] = s.answer_end;
  nlohmann::json j;
  j["tokens"] = s.tokens;
  j["mask"] = s.loss_mask;
  j["meta"] = std::move(meta);
  return j.dump();
}

Sample sample_from_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed dataset record: ") + e.what());
  }
  if (!j.contains("tokens") || !j.contains("mask") || !j.contains("meta")) {
    throw SchemaError("dataset record needs tokens, mask and meta");
  }
  Sample s;
  s.tokens = j["tokens"].get<std::vector<TokenId>>();
  s.loss_mask = j["mask"].get<std::vector<std::uint8_t>>();
  s.meta = j["meta"];
  s.answer_begin = s.meta.value("answer_begin", s.tokens.size());
  s.answer_end = s.meta.value("answer_end", s.tokens.size());
  s.meta.erase("answer_begin");
  s.meta.erase("answer_end");
  s.validate();
  return s;
}

void write_samples(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : samples) os << sample_to_line(s) << '\n';
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::vector<Sample> read_samples(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::vector<Sample> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) out.push_back(sample_from_line(line));
  }
  return out;
}

}  // namespace moelab::tasks
