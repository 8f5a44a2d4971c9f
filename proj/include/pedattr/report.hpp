#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pedattr {

struct Accuracy {
  double accuracy = 0.0;  // percent
  double balanced = 0.0;  // mean per-class recall, percent
  std::size_t total = 0;
};

/// Both maps must cover the same node ids; labels are 0/1.
Accuracy evaluate(const std::map<std::string, int>& predictions,
                  const std::map<std::string, int>& truth);

/// One row per attribute, one column per "method/scheme" cell.
struct EvalReport {
  std::vector<std::string> attributes;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> accuracy;  // [attribute][column]
  std::vector<std::vector<double>> balanced;  // [attribute][column]

  std::uint64_t seed = 0;
  std::string config_hash;
  std::string dataset_id;

  void add_column(const std::string& name, const std::vector<Accuracy>& per_attribute);
  /// Column means over attributes.
  std::vector<double> average(bool balanced_metric = false) const;
};

/// Aligned table with an AVERAGE row; header lines carry the metadata.
std::string format_text(const EvalReport& report, bool balanced_metric = false);
std::string format_csv(const EvalReport& report, bool balanced_metric = false);

/// Writes report.txt, report.csv and report_balanced.csv into `dir`.
void write_report(const std::filesystem::path& dir, const EvalReport& report);

/// Parses a CSV written by format_csv (the AVERAGE row is dropped).
EvalReport read_report_csv(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace pedattr
