#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "moelab/experiment/records.hpp"

namespace moelab::experiment {

// Spearman rank correlation with average ranks for ties. Undefined for fewer
// than two points or a constant coordinate.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct CurvePoint {
  double total_params = 0.0;
  double active_params = 0.0;
  double mean = 0.0;  // over seeds
  double min = 0.0;
  double max = 0.0;
  std::size_t seeds = 0;
  int d = 0;
  int E = 1;
};

// One curve of a plot: the dense models, or MoE models sharing a width (and
// so an active-parameter tier), ordered by total params.
struct Curve {
  std::string label;
  std::string arch;
  int d = 0;  // 0 for the dense curve
  std::vector<CurvePoint> points;
};

struct Trend {
  std::string task;
  std::string metric;
  std::string axis;   // "E" (fixed d) or "d" (fixed E)
  int fixed = 0;      // the fixed d or E
  int L = 0;
  std::size_t points = 0;  // distinct axis values
  std::optional<double> rho_mean;  // on seed-averaged values
  std::optional<double> rho_rows;  // on every row
  bool non_decreasing = false;     // seed means never drop along the axis
};

struct PlotGroup {
  std::string task;
  std::string metric;
  int L = 0;
  bool log_y = false;
  std::vector<Curve> curves;
  // Largest vertical distance of a MoE point from the dense curve
  // (interpolated in log2 total params); log2 units when log_y. Points
  // outside the dense range are not compared.
  std::optional<double> max_gap;
  std::size_t gap_points = 0;
  std::filesystem::path svg;
};

struct Report {
  std::vector<PlotGroup> plots;
  std::vector<Trend> trends;
  nlohmann::json to_json() const;
  std::string table() const;
};

struct ReportOptions {
  // Capacities below this value are clamped before taking log2 (a model that
  // memorized nothing on the grid sits one step under its smallest size).
  double capacity_floor = 128.0;
};

Report build_report(const std::vector<ExperimentRecord>& rows, const ReportOptions& options = {});

// Writes one SVG per plot group plus summary.json and summary.txt.
void write_report(Report& report, const std::filesystem::path& output_dir);

std::string render_svg(const PlotGroup& group);

}  // namespace moelab::experiment
