#pragma once

#include <string>
#include <vector>

#include "cts/eval/metrics.hpp"

namespace cts::eval {

struct ReportRow {
  std::string label;
  Metrics metrics;
};

/// Aligned plain-text table.
std::string report_text(const std::vector<ReportRow>& rows);
std::string report_csv(const std::vector<ReportRow>& rows);
std::string report_json(const std::vector<ReportRow>& rows);
/// Writes report.txt, report.csv and report.json into `dir`.
void write_reports(const std::string& dir, const std::vector<ReportRow>& rows);
/// Writes one JSON-lines transcript per dialog into `dir`.
void write_transcripts(const std::string& dir, const graph::DialogTree& tree,
                       const std::vector<sim::Transcript>& transcripts);

}  // namespace cts::eval
