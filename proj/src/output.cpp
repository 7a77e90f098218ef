#include "colav/output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace colav {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write output file: " + file.string());
  return out;
}

const char* ship_color(int i) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[i % 10];
}

ordered_json ship_metrics_json(const ShipMetrics& m) {
  ordered_json j;
  j["id"] = m.id;
  j["controller"] = to_string(m.controller);
  j["avg_compute_ms"] = m.avg_compute_ms;
  j["max_compute_ms"] = m.max_compute_ms;
  j["avg_cte_m"] = m.avg_cte;
  j["max_cte_m"] = m.max_cte;
  j["control_effort"] = m.control_effort;
  j["relaxed_steps"] = m.relaxed_steps;
  j["degraded_steps"] = m.degraded_steps;
  j["colregs_violation"] = m.colregs_violation;
  return j;
}

ordered_json metrics_json(const MetricsReport& r) {
  ordered_json j;
  j["schema_version"] = r.schema_version;
  j["scenario"] = r.scenario;
  j["collision"] = r.collision;
  j["min_separation_m"] =
      std::isfinite(r.min_separation) ? ordered_json(r.min_separation) : ordered_json(nullptr);
  j["aborted"] = r.aborted;
  if (r.aborted) j["abort_reason"] = r.abort_reason;
  j["ships"] = ordered_json::array();
  for (const ShipMetrics& m : r.ships) j["ships"].push_back(ship_metrics_json(m));
  return j;
}

}  // namespace

void write_trajectory_csv(const TrajectoryLog& log, const std::filesystem::path& file) {
  std::ofstream out = open_out(file);
  out << "t,id,x,y,psi,u,a_nom,r_nom,a,r,encounters,h_min,slack\n";
  for (const LogRow& row : log.rows) {
    out << fmt("%.3f", row.t) << ',' << log.ship_ids.at(row.ship) << ',' << fmt("%.9g", row.x)
        << ',' << fmt("%.9g", row.y) << ',' << fmt("%.9g", row.psi) << ','
        << fmt("%.9g", row.u) << ',' << fmt("%.9g", row.a_nom) << ',' << fmt("%.9g", row.r_nom)
        << ',' << fmt("%.9g", row.a) << ',' << fmt("%.9g", row.r) << ',';
    for (std::size_t i = 0; i < row.encounters.size(); ++i) {
      const EncounterLogEntry& e = row.encounters[i];
      if (i) out << ';';
      out << log.ship_ids.at(e.traffic) << ':' << to_string(e.type) << ':'
          << fmt("%.6g", e.h);
    }
    out << ',';
    if (!std::isnan(row.h_min)) out << fmt("%.9g", row.h_min);
    out << ',' << fmt("%.9g", row.slack) << '\n';
  }
}

void write_metrics_json(const MetricsReport& report, const std::filesystem::path& file) {
  open_out(file) << metrics_json(report).dump(2) << '\n';
}

void write_campaign_json(const std::vector<MetricsReport>& reports,
                         const std::filesystem::path& file) {
  ordered_json j;
  j["schema_version"] = 1;
  j["trials"] = reports.size();

  int collisions = 0, aborted = 0;
  double min_sep = std::numeric_limits<double>::infinity();
  double avg_compute = 0.0, max_compute = 0.0;
  int compute_samples = 0;
  for (const MetricsReport& r : reports) {
    if (r.collision) ++collisions;
    if (r.aborted) ++aborted;
    min_sep = std::min(min_sep, r.min_separation);
    for (const ShipMetrics& m : r.ships) {
      if (m.controller == ControllerKind::Constant) continue;
      avg_compute += m.avg_compute_ms;
      max_compute = std::max(max_compute, m.max_compute_ms);
      ++compute_samples;
    }
  }
  j["summary"]["collisions"] = collisions;
  j["summary"]["aborted_trials"] = aborted;
  j["summary"]["min_separation_m"] =
      std::isfinite(min_sep) ? ordered_json(min_sep) : ordered_json(nullptr);
  j["summary"]["avg_compute_ms"] = compute_samples ? avg_compute / compute_samples : 0.0;
  j["summary"]["max_compute_ms"] = max_compute;

  j["reports"] = ordered_json::array();
  for (const MetricsReport& r : reports) j["reports"].push_back(metrics_json(r));
  open_out(file) << j.dump(2) << '\n';
}

void write_svg(const TrajectoryLog& log, const ScenarioConfig& cfg,
               const std::filesystem::path& file, double snapshot_interval) {
  if (log.rows.empty()) throw std::invalid_argument("write_svg: empty log");
  const int n = static_cast<int>(log.ship_ids.size());

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const LogRow& r : log.rows) {
    xmin = std::min(xmin, r.x);
    xmax = std::max(xmax, r.x);
    ymin = std::min(ymin, r.y);
    ymax = std::max(ymax, r.y);
  }
  double margin = 0.0;
  for (const ShipSpec& s : cfg.ships) margin = std::max(margin, s.params.safe_radius);
  margin = std::max(margin * 1.5, 0.05 * std::max(xmax - xmin, ymax - ymin));
  xmin -= margin;
  xmax += margin;
  ymin -= margin;
  ymax += margin;

  const double width = 1000.0;
  const double scale = width / std::max(xmax - xmin, 1.0);
  const double height = std::max((ymax - ymin) * scale, 100.0);
  auto px = [&](double x) { return (x - xmin) * scale; };
  auto py = [&](double y) { return height - (y - ymin) * scale; };

  std::ofstream out = open_out(file);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", width)
      << "\" height=\"" << fmt("%.0f", height) << "\" viewBox=\"0 0 " << fmt("%.0f", width)
      << ' ' << fmt("%.0f", height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"12\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << cfg.name
      << "</text>\n";

  // Waypoint paths.
  for (int i = 0; i < n; ++i) {
    out << "<polyline fill=\"none\" stroke=\"" << ship_color(i)
        << "\" stroke-opacity=\"0.3\" stroke-dasharray=\"6 5\" points=\"";
    for (const Vec2& w : cfg.ships[i].path.waypoints)
      out << fmt("%.2f", px(w.x())) << ',' << fmt("%.2f", py(w.y())) << ' ';
    out << "\"/>\n";
  }

  // Trajectories.
  for (int i = 0; i < n; ++i) {
    out << "<polyline fill=\"none\" stroke=\"" << ship_color(i) << "\" stroke-width=\"1.5\" points=\"";
    for (const LogRow& r : log.rows)
      if (r.ship == i) out << fmt("%.2f", px(r.x)) << ',' << fmt("%.2f", py(r.y)) << ' ';
    out << "\"/>\n";
  }

  // Snapshot frames: safe-radius disk and the two turning circles.
  for (const LogRow& r : log.rows) {
    const double ratio = r.t / snapshot_interval;
    if (r.t <= 0.0 || std::abs(ratio - std::round(ratio)) > 1e-9) continue;
    const ShipSpec& s = cfg.ships[r.ship];
    const ShipState st{r.x, r.y, r.psi, r.u};
    out << "<circle cx=\"" << fmt("%.2f", px(r.x)) << "\" cy=\"" << fmt("%.2f", py(r.y))
        << "\" r=\"" << fmt("%.2f", s.params.safe_radius * scale) << "\" fill=\""
        << ship_color(r.ship) << "\" fill-opacity=\"0.08\" stroke=\"none\"/>\n";
    const auto [right, left] = circle_centers(st, turning_radius(r.u, s.cbf));
    for (const TurningCircle& c : {right, left}) {
      if (c.radius <= 0.0) continue;
      out << "<circle cx=\"" << fmt("%.2f", px(c.center.x())) << "\" cy=\""
          << fmt("%.2f", py(c.center.y())) << "\" r=\"" << fmt("%.2f", c.radius * scale)
          << "\" fill=\"none\" stroke=\"" << ship_color(r.ship)
          << "\" stroke-opacity=\"0.25\" stroke-width=\"0.8\"/>\n";
    }
    out << "<circle cx=\"" << fmt("%.2f", px(r.x)) << "\" cy=\"" << fmt("%.2f", py(r.y))
        << "\" r=\"2.5\" fill=\"" << ship_color(r.ship) << "\"/>\n";
  }

  // Legend.
  for (int i = 0; i < n; ++i) {
    const double y = 40.0 + 16.0 * i;
    out << "<rect x=\"12\" y=\"" << fmt("%.1f", y - 9) << "\" width=\"10\" height=\"10\" fill=\""
        << ship_color(i) << "\"/>\n";
    out << "<text x=\"28\" y=\"" << fmt("%.1f", y) << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << log.ship_ids[i] << "</text>\n";
  }
  out << "</svg>\n";
}

void emit_outputs(const TrajectoryLog& log, const MetricsReport& report,
                  const ScenarioConfig& cfg, const OutputOptions& options) {
  std::filesystem::create_directories(options.directory);
  write_trajectory_csv(log, options.directory / "trajectory.csv");
  write_metrics_json(report, options.directory / "metrics.json");
  if (options.svg) write_svg(log, cfg, options.directory / "plot.svg", options.snapshot_interval);
}

}  // namespace colav
