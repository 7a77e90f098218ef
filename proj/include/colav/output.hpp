#pragma once

#include <filesystem>

#include "colav/simulation.hpp"

namespace colav {

struct OutputOptions {
  std::filesystem::path directory;
  bool svg = false;
  double snapshot_interval = 200.0;  // s, spacing of the SVG snapshot frames
};

// Fixed column order: t,id,x,y,psi,u,a_nom,r_nom,a,r,encounters,h_min,slack.
// Formatting is deterministic, so identical runs produce identical bytes.
void write_trajectory_csv(const TrajectoryLog& log, const std::filesystem::path& file);

void write_metrics_json(const MetricsReport& report, const std::filesystem::path& file);

// Aggregate campaign report (one entry per trial plus summary statistics).
void write_campaign_json(const std::vector<MetricsReport>& reports,
                         const std::filesystem::path& file);

// Trajectory plot with safe-radius disks and turning circles at snapshot
// intervals.
void write_svg(const TrajectoryLog& log, const ScenarioConfig& cfg,
               const std::filesystem::path& file, double snapshot_interval);

// CSV + JSON (+ SVG when requested) under options.directory.
void emit_outputs(const TrajectoryLog& log, const MetricsReport& report,
                  const ScenarioConfig& cfg, const OutputOptions& options);

}  // namespace colav
