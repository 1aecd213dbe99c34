#include "cts/eval/report.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cts/common/error.hpp"
#include "json.hpp"

namespace cts::eval {

namespace {

struct Column {
  const char* name;
  double Metrics::*field;
};

constexpr Column kColumns[] = {
    {"success_guided", &Metrics::success_guided}, {"success_free", &Metrics::success_free},
    {"success_combined", &Metrics::success_combined}, {"skip_guided", &Metrics::skip_guided},
    {"skip_free", &Metrics::skip_free},           {"mode_f1", &Metrics::mode_f1},
    {"mode_consistency", &Metrics::mode_consistency}, {"noise", &Metrics::noise},
};

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

}  // namespace

std::string report_text(const std::vector<ReportRow>& rows) {
  std::size_t label_width = 6;
  for (const auto& r : rows) label_width = std::max(label_width, r.label.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(label_width)) << "policy";
  for (const auto& c : kColumns) out << "  " << std::right << std::setw(16) << c.name;
  out << "  " << std::setw(8) << "dialogs" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(label_width)) << r.label << std::right << std::fixed
        << std::setprecision(4);
    for (const auto& c : kColumns) out << "  " << std::setw(16) << r.metrics.*c.field;
    out << "  " << std::setw(8) << r.metrics.n_dialogs << '\n';
  }
  return out.str();
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "policy";
  for (const auto& c : kColumns) out << ',' << c.name;
  out << ",n_dialogs,n_guided,n_free,seed\n";
  out << std::setprecision(6);
  for (const auto& r : rows) {
    out << r.label;
    for (const auto& c : kColumns) out << ',' << r.metrics.*c.field;
    out << ',' << r.metrics.n_dialogs << ',' << r.metrics.n_guided << ',' << r.metrics.n_free << ','
        << r.metrics.seed << '\n';
  }
  return out.str();
}

std::string report_json(const std::vector<ReportRow>& rows) {
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["policy"] = r.label;
    for (const auto& c : kColumns) j[c.name] = r.metrics.*c.field;
    j["n_dialogs"] = r.metrics.n_dialogs;
    j["n_guided"] = r.metrics.n_guided;
    j["n_free"] = r.metrics.n_free;
    j["seed"] = r.metrics.seed;
    all.push_back(std::move(j));
  }
  return all.dump(2) + "\n";
}

void write_reports(const std::string& dir, const std::vector<ReportRow>& rows) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_file(base / "report.txt", report_text(rows));
  write_file(base / "report.csv", report_csv(rows));
  write_file(base / "report.json", report_json(rows));
}

void write_transcripts(const std::string& dir, const graph::DialogTree& tree,
                       const std::vector<sim::Transcript>& transcripts) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    std::ostringstream name;
    name << "dialog_" << std::setw(5) << std::setfill('0') << i << ".jsonl";
    write_file(std::filesystem::path(dir) / name.str(), sim::transcript_to_jsonl(tree, transcripts[i]));
  }
}

}  // namespace cts::eval
