#include "moelab/experiment/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "moelab/errors.hpp"

namespace moelab::experiment {

using nlohmann::json;

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("spearman needs equal-length inputs");
  if (x.size() < 2) return std::nullopt;
  auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

struct ModelKey {
  std::string arch;
  int d, E, top_k;
  long long total, active;
  auto tie() const { return std::tie(arch, d, E, top_k, total, active); }
  bool operator<(const ModelKey& o) const { return tie() < o.tie(); }
};

CurvePoint summarize(const ModelKey& k, const std::vector<double>& values) {
  CurvePoint p;
  p.total_params = static_cast<double>(k.total);
  p.active_params = static_cast<double>(k.active);
  p.d = k.d;
  p.E = k.E;
  p.seeds = values.size();
  p.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  p.min = *std::min_element(values.begin(), values.end());
  p.max = *std::max_element(values.begin(), values.end());
  return p;
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : "undefined"; }

double transform(double y, bool log_y, double floor) { return log_y ? std::log2(std::max(y, floor)) : y; }

void add_trends(std::vector<Trend>& out, const std::string& task, const std::string& metric, int L,
                const std::string& axis, const std::map<int, std::vector<const ExperimentRecord*>>& by_fixed) {
  for (const auto& [fixed, rows] : by_fixed) {
    std::map<int, std::vector<double>> by_axis;
    std::vector<double> xs, ys;
    for (const auto* r : rows) {
      const int a = axis == "E" ? r->E : r->d;
      by_axis[a].push_back(r->metric_value);
      xs.push_back(a);
      ys.push_back(r->metric_value);
    }
    Trend t{task, metric, axis, fixed, L, by_axis.size(), std::nullopt, std::nullopt, false};
    std::vector<double> ax, mean;
    for (const auto& [a, v] : by_axis) {
      ax.push_back(a);
      mean.push_back(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
    }
    t.rho_mean = spearman(ax, mean);
    t.rho_rows = spearman(xs, ys);
    t.non_decreasing = by_axis.size() >= 2 && std::is_sorted(mean.begin(), mean.end());
    out.push_back(t);
  }
}

}  // namespace

Report build_report(const std::vector<ExperimentRecord>& rows, const ReportOptions& options) {
  for (const auto& r : rows) r.validate();
  using GroupKey = std::tuple<std::string, std::string, int>;
  std::map<GroupKey, std::vector<const ExperimentRecord*>> groups;
  for (const auto& r : rows) groups[{r.task, r.metric_name, r.L}].push_back(&r);

  Report report;
  for (const auto& [key, members] : groups) {
    const auto& [task, metric, L] = key;
    PlotGroup g;
    g.task = task;
    g.metric = metric;
    g.L = L;
    g.log_y = metric == "phonebook_capacity";

    std::map<ModelKey, std::vector<double>> models;
    for (const auto* r : members) {
      models[{r->arch, r->d, r->E, r->top_k, r->total_params, r->active_params}].push_back(r->metric_value);
    }
    std::map<std::pair<int, int>, Curve> moe;
    Curve dense{"dense", "dense", 0, {}};
    for (const auto& [k, values] : models) {
      CurvePoint p = summarize(k, values);
      if (k.arch == "dense") {
        dense.points.push_back(p);
      } else {
        auto& c = moe[{k.d, k.top_k}];
        c.arch = k.arch;
        c.d = k.d;
        c.label = "moe d=" + std::to_string(k.d) + " top" + std::to_string(k.top_k) + " (active " +
                  std::to_string(k.active) + ")";
        c.points.push_back(p);
      }
    }
    auto by_total = [](const CurvePoint& a, const CurvePoint& b) { return a.total_params < b.total_params; };
    if (!dense.points.empty()) {
      std::sort(dense.points.begin(), dense.points.end(), by_total);
      g.curves.push_back(dense);
    }
    for (auto& [_, c] : moe) {
      std::sort(c.points.begin(), c.points.end(), by_total);
      g.curves.push_back(c);
    }

    if (!dense.points.empty()) {
      const auto& dp = dense.points;
      for (const auto& c : g.curves) {
        if (c.arch == "dense") continue;
        for (const auto& p : c.points) {
          const double x = std::log2(p.total_params);
          const double y = transform(p.mean, g.log_y, options.capacity_floor);
          std::optional<double> ref;
          for (std::size_t i = 0; i < dp.size() && !ref; ++i) {
            const double x0 = std::log2(dp[i].total_params);
            if (x == x0) ref = transform(dp[i].mean, g.log_y, options.capacity_floor);
            if (i + 1 < dp.size()) {
              const double x1 = std::log2(dp[i + 1].total_params);
              if (x > x0 && x < x1) {
                const double y0 = transform(dp[i].mean, g.log_y, options.capacity_floor);
                const double y1 = transform(dp[i + 1].mean, g.log_y, options.capacity_floor);
                ref = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
              }
            }
          }
          if (!ref) continue;
          const double gap = std::abs(y - *ref);
          g.max_gap = std::max(g.max_gap.value_or(0.0), gap);
          ++g.gap_points;
        }
      }
    }
    report.plots.push_back(std::move(g));

    std::map<int, std::vector<const ExperimentRecord*>> by_d, by_E;
    for (const auto* r : members) {
      by_d[r->d].push_back(r);
      by_E[r->E].push_back(r);
    }
    add_trends(report.trends, task, metric, L, "E", by_d);
    add_trends(report.trends, task, metric, L, "d", by_E);
  }
  return report;
}

json Report::to_json() const {
  json j;
  j["plots"] = json::array();
  for (const auto& g : plots) {
    json pg{{"task", g.task}, {"metric", g.metric}, {"L", g.L}, {"log_y", g.log_y},
            {"gap_points", g.gap_points}, {"svg", g.svg.string()}};
    pg["max_gap"] = g.max_gap ? json(*g.max_gap) : json(nullptr);
    pg["curves"] = json::array();
    for (const auto& c : g.curves) {
      json cj{{"label", c.label}, {"arch", c.arch}, {"d", c.d}, {"points", json::array()}};
      for (const auto& p : c.points) {
        cj["points"].push_back({{"total_params", p.total_params}, {"active_params", p.active_params},
                                {"mean", p.mean}, {"min", p.min}, {"max", p.max}, {"seeds", p.seeds},
                                {"d", p.d}, {"E", p.E}});
      }
      pg["curves"].push_back(cj);
    }
    j["plots"].push_back(pg);
  }
  j["trends"] = json::array();
  for (const auto& t : trends) {
    json tj{{"task", t.task}, {"metric", t.metric}, {"axis", t.axis}, {"fixed", t.fixed},
            {"L", t.L}, {"points", t.points}, {"non_decreasing", t.non_decreasing}};
    tj["spearman_mean"] = t.rho_mean ? json(*t.rho_mean) : json(nullptr);
    tj["spearman_rows"] = t.rho_rows ? json(*t.rho_rows) : json(nullptr);
    j["trends"].push_back(tj);
  }
  return j;
}

std::string Report::table() const {
  std::ostringstream os;
  for (const auto& g : plots) {
    os << g.task << " / " << g.metric << " / L=" << g.L << "\n";
    for (const auto& c : g.curves) {
      os << "  " << c.label << "\n";
      for (const auto& p : c.points) {
        os << "    total=" << static_cast<long long>(p.total_params)
           << " active=" << static_cast<long long>(p.active_params) << " E=" << p.E << " d=" << p.d
           << " mean=" << fmt(p.mean) << " range=[" << fmt(p.min) << ", " << fmt(p.max) << "] seeds=" << p.seeds
           << "\n";
      }
    }
    os << "  max gap to dense: " << opt_fmt(g.max_gap) << (g.log_y ? " (log2)" : "") << " over " << g.gap_points
       << " points\n";
  }
  os << "trends\n";
  for (const auto& t : trends) {
    os << "  " << t.task << " / " << t.metric << " / L=" << t.L << ": vs " << t.axis << " at "
       << (t.axis == "E" ? "d=" : "E=") << t.fixed << " points=" << t.points
       << " spearman(mean)=" << opt_fmt(t.rho_mean) << " spearman(rows)=" << opt_fmt(t.rho_rows)
       << (t.points < 2 ? " trend undefined" : (t.non_decreasing ? " non-decreasing" : "")) << "\n";
  }
  return os.str();
}

std::string render_svg(const PlotGroup& g) {
  constexpr double W = 720, H = 440, left = 70, right = 250, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  auto ty = [&](double y) { return g.log_y ? std::log2(std::max(y, 1.0)) : y; };
  for (const auto& c : g.curves) {
    for (const auto& p : c.points) {
      x0 = std::min(x0, std::log2(p.total_params));
      x1 = std::max(x1, std::log2(p.total_params));
      y0 = std::min(y0, ty(p.min));
      y1 = std::max(y1, ty(p.max));
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-9) x0 -= 1, x1 += 1;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  static const char* kColors[] = {"#000000", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"22\" font-size=\"14\">" << g.task << ": " << g.metric << " vs total params (L="
     << g.L << ")</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = static_cast<int>(std::ceil(x0)); k <= static_cast<int>(std::floor(x1)); ++k) {
    os << "<line x1=\"" << sx(k) << "\" y1=\"" << top + ph << "\" x2=\"" << sx(k) << "\" y2=\"" << top + ph + 5
       << "\" stroke=\"#444\"/><text x=\"" << sx(k) << "\" y=\"" << top + ph + 18
       << "\" text-anchor=\"middle\">2^" << k << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = y0 + (y1 - y0) * i / 4.0;
    const std::string label = g.log_y ? fmt(std::exp2(y), 3) : fmt(y, 3);
    os << "<text x=\"" << left - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">total non-embedding params</text>\n";
  for (std::size_t ci = 0; ci < g.curves.size(); ++ci) {
    const auto& c = g.curves[ci];
    const char* col = kColors[ci % (sizeof kColors / sizeof *kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : c.points) os << sx(std::log2(p.total_params)) << "," << sy(ty(p.mean)) << " ";
    os << "\"/>\n";
    for (const auto& p : c.points) {
      const double px = sx(std::log2(p.total_params));
      os << "<line x1=\"" << px << "\" y1=\"" << sy(ty(p.min)) << "\" x2=\"" << px << "\" y2=\"" << sy(ty(p.max))
         << "\" stroke=\"" << col << "\"/>";
      os << "<circle cx=\"" << px << "\" cy=\"" << sy(ty(p.mean)) << "\" r=\"4\" fill=\"" << col << "\"/>\n";
    }
    const double ly = top + 14 + 18.0 * static_cast<double>(ci);
    os << "<rect x=\"" << W - right + 14 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"12\" fill=\"" << col
       << "\"/><text x=\"" << W - right + 32 << "\" y=\"" << ly + 1 << "\">" << c.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_report(Report& report, const std::filesystem::path& output_dir) {
  std::filesystem::create_directories(output_dir);
  for (auto& g : report.plots) {
    g.svg = output_dir / (g.task + "_" + g.metric + "_L" + std::to_string(g.L) + ".svg");
    std::ofstream(g.svg) << render_svg(g);
  }
  std::ofstream(output_dir / "summary.json") << report.to_json().dump(2) << "\n";
  std::ofstream(output_dir / "summary.txt") << report.table();
}

}  // namespace moelab::experiment
