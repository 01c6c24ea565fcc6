#include "moelab/experiment/records.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "moelab/errors.hpp"

namespace moelab::experiment {

bool is_metric_name(std::string_view name) {
  return std::find(kMetricNames.begin(), kMetricNames.end(), name) != kMetricNames.end();
}

void ExperimentRecord::validate() const {
  auto fail = [](const std::string& what) { throw SchemaError("invalid record: " + what); };
  if (task.empty() || arch.empty()) fail("task and arch are required");
  if (arch != "dense" && arch != "moe") fail("arch must be dense or moe");
  if (!is_metric_name(metric_name)) fail("unknown metric " + metric_name);
  if (total_params < active_params) fail("total_params below active_params");
  if (arch == "dense" && total_params != active_params) fail("dense rows need total == active");
}

std::string csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
    if (i) h += ',';
    h += kCsvColumns[i];
  }
  return h;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string to_csv_row(const ExperimentRecord& r) {
  r.validate();
  for (const auto* s : {&r.task, &r.arch, &r.metric_name}) {
    if (s->find_first_of(",\n\"") != std::string::npos) throw SchemaError("field contains a separator");
  }
  std::ostringstream o;
  o << r.task << ',' << r.arch << ',' << r.d << ',' << r.L << ',' << r.H << ',' << r.E << ',' << r.top_k << ','
    << r.total_params << ',' << r.active_params << ',' << r.seed << ',' << fmt_double(r.lr) << ',' << r.epochs << ','
    << r.metric_name << ',' << fmt_double(r.metric_value) << ',' << fmt_double(r.wall_seconds);
  return o.str();
}

ExperimentRecord from_csv_row(const std::string& line, std::size_t line_number) {
  auto where = [&]() { return "line " + std::to_string(line_number) + ": "; };
  auto f = split(line);
  if (f.size() != kCsvColumns.size()) {
    throw SchemaError(where() + "expected " + std::to_string(kCsvColumns.size()) + " fields, got " +
                      std::to_string(f.size()) + " in '" + line + "'");
  }
  ExperimentRecord r;
  try {
    std::size_t used = 0;
    auto whole = [&](const std::string& s, auto value) {
      if (used != s.size()) throw std::invalid_argument("trailing characters in '" + s + "'");
      return value;
    };
    auto to_int = [&](const std::string& s) { return whole(s, std::stoi(s, &used)); };
    auto to_ll = [&](const std::string& s) { return whole(s, std::stoll(s, &used)); };
    auto to_ull = [&](const std::string& s) { return whole(s, std::stoull(s, &used)); };
    auto to_d = [&](const std::string& s) { return whole(s, std::stod(s, &used)); };
    r.task = f[0];
    r.arch = f[1];
    r.d = to_int(f[2]);
    r.L = to_int(f[3]);
    r.H = to_int(f[4]);
    r.E = to_int(f[5]);
    r.top_k = to_int(f[6]);
    r.total_params = to_ll(f[7]);
    r.active_params = to_ll(f[8]);
    r.seed = to_ull(f[9]);
    r.lr = to_d(f[10]);
    r.epochs = to_int(f[11]);
    r.metric_name = f[12];
    r.metric_value = to_d(f[13]);
    r.wall_seconds = to_d(f[14]);
  } catch (const std::logic_error& e) {
    throw SchemaError(where() + "malformed field (" + e.what() + ") in '" + line + "'");
  }
  try {
    r.validate();
  } catch (const SchemaError& e) {
    throw SchemaError(where() + e.what());
  }
  return r;
}

std::vector<ExperimentRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<ExperimentRecord> rows;
  std::string line;
  std::size_t n = 0;
  bool header = false, version = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line != kCsvVersionLine) throw SchemaError("line " + std::to_string(n) + ": unsupported version '" + line + "'");
      version = true;
      continue;
    }
    if (!header) {
      if (line != csv_header()) throw SchemaError("line " + std::to_string(n) + ": unexpected columns '" + line + "'");
      header = true;
      continue;
    }
    rows.push_back(from_csv_row(line, n));
  }
  if (!version) throw SchemaError("missing version line in " + path.string());
  if (!header) throw SchemaError("missing header in " + path.string());
  return rows;
}

RecordWriter::RecordWriter(std::filesystem::path path) : path_(std::move(path)) {}

void RecordWriter::append(const std::vector<ExperimentRecord>& rows) {
  std::string text;
  for (const auto& r : rows) text += to_csv_row(r) + '\n';
  std::lock_guard lock(mutex_);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw std::runtime_error("cannot open " + path_.string());
  ::flock(fd, LOCK_EX);
  if (::lseek(fd, 0, SEEK_END) == 0) {
    text = std::string(kCsvVersionLine) + '\n' + csv_header() + '\n' + text;
  }
  std::size_t done = 0;
  while (done < text.size()) {
    const ssize_t w = ::write(fd, text.data() + done, text.size() - done);
    if (w <= 0) break;
    done += static_cast<std::size_t>(w);
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (done != text.size()) throw std::runtime_error("short write to " + path_.string());
}

}  // namespace moelab::experiment
