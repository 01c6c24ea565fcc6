#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "moelab/tasks/sample.hpp"

namespace moelab::tasks {

// Newline-delimited JSON, one record per sample:
//   {"tokens":[ids], "mask":[0/1], "meta":{..., "answer_begin":i, "answer_end":j}}
std::string sample_to_line(const Sample& s);
Sample sample_from_line(const std::string& line);

void write_samples(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::vector<Sample> read_samples(const std::filesystem::path& path);

}  // namespace moelab::tasks
