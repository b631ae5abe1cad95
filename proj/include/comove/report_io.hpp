#pragma once

#include <string>
#include <vector>

#include "comove/evaluation.hpp"
#include "comove/evolving_clusters.hpp"
#include "comove/pipeline.hpp"

namespace comove {

// Line format: members(semicolon-joined sorted ids),t_start,t_end,tp
void write_clusters_csv(const std::string& path, const std::vector<EvolvingCluster>& clusters);
std::vector<EvolvingCluster> read_clusters_csv(const std::string& path);

// Same records as JSON lines, one object per cluster.
void write_clusters_jsonl(const std::string& path, const std::vector<EvolvingCluster>& clusters);

void write_matches_csv(const std::string& path, const MatchReport& report);

std::string match_summary_json(const MatchSummary& summary);
std::string metrics_json(const PipelineMetrics& metrics, const MatchSummary& summary);

// Cluster lifetime boxes as GeoJSON polygons for external plotting.
std::string clusters_geojson(const std::vector<EvolvingCluster>& clusters,
                             const PositionStore& store, double grid_step_s);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace comove
