#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace moelab::experiment {

// Closed metric vocabulary of the CSV.
inline constexpr std::array<std::string_view, 6> kMetricNames{
    "exact_match", "valid_path_accuracy", "phonebook_capacity", "train_test_gap", "final_train_loss",
    "load_ratio"};
bool is_metric_name(std::string_view name);

inline constexpr std::string_view kCsvVersionLine = "# moelab-records v1";
inline constexpr std::array<std::string_view, 15> kCsvColumns{
    "task", "arch", "d", "L", "H", "E", "top_k", "total_params", "active_params",
    "seed", "lr", "epochs", "metric_name", "metric_value", "wall_seconds"};

struct ExperimentRecord {
  std::string task;
  std::string arch;
  int d = 0;
  int L = 0;
  int H = 0;
  int E = 1;
  int top_k = 1;
  long long total_params = 0;
  long long active_params = 0;
  unsigned long long seed = 0;
  double lr = 0.0;
  int epochs = 0;
  std::string metric_name;
  double metric_value = 0.0;
  double wall_seconds = 0.0;

  // Throws SchemaError when an invariant is broken.
  void validate() const;
};

std::string csv_header();
// Floating values are written with 17 significant digits so they read back
// bit-exactly.
std::string to_csv_row(const ExperimentRecord& r);
ExperimentRecord from_csv_row(const std::string& line, std::size_t line_number = 0);

// Reads a records file; SchemaError names the first bad line.
std::vector<ExperimentRecord> read_records(const std::filesystem::path& path);

// Appends rows to a CSV file, writing the version line and header first when
// the file is new. Appends hold an exclusive file lock, so several processes
// may share one file.
class RecordWriter {
 public:
  explicit RecordWriter(std::filesystem::path path);
  void append(const std::vector<ExperimentRecord>& rows);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

}  // namespace moelab::experiment
