#include "pedattr/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pedattr/error.hpp"

namespace pedattr {

namespace fs = std::filesystem;

Accuracy evaluate(const std::map<std::string, int>& predictions,
                  const std::map<std::string, int>& truth) {
  if (predictions.size() != truth.size()) {
    throw Error("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                std::to_string(truth.size()) + " labeled nodes");
  }
  if (truth.empty()) throw Error("evaluate: no labeled nodes");
  std::size_t correct = 0;
  std::size_t pos = 0, neg = 0, pos_hit = 0, neg_hit = 0;
  auto p = predictions.begin();
  for (auto t = truth.begin(); t != truth.end(); ++t, ++p) {
    if (p->first != t->first) throw Error("evaluate: key '" + t->first + "' has no prediction");
    if (t->second != 0 && t->second != 1) throw Error("evaluate: truth labels must be 0/1");
    if (p->second != 0 && p->second != 1) throw Error("evaluate: predictions must be 0/1");
    const bool hit = p->second == t->second;
    correct += hit;
    if (t->second == 1) {
      ++pos;
      pos_hit += hit;
    } else {
      ++neg;
      neg_hit += hit;
    }
  }
  Accuracy a;
  a.total = truth.size();
  a.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(a.total);
  // a class absent from the truth contributes no recall term
  double recall_sum = 0;
  int classes = 0;
  if (pos > 0) {
    recall_sum += static_cast<double>(pos_hit) / static_cast<double>(pos);
    ++classes;
  }
  if (neg > 0) {
    recall_sum += static_cast<double>(neg_hit) / static_cast<double>(neg);
    ++classes;
  }
  a.balanced = 100.0 * recall_sum / classes;
  return a;
}

void EvalReport::add_column(const std::string& name, const std::vector<Accuracy>& per_attribute) {
  if (per_attribute.size() != attributes.size()) {
    throw Error("report column '" + name + "' has the wrong number of attributes");
  }
  if (std::find(columns.begin(), columns.end(), name) != columns.end()) {
    throw Error("duplicate report column '" + name + "'");
  }
  columns.push_back(name);
  accuracy.resize(attributes.size());
  balanced.resize(attributes.size());
  for (std::size_t a = 0; a < attributes.size(); ++a) {
    accuracy[a].push_back(per_attribute[a].accuracy);
    balanced[a].push_back(per_attribute[a].balanced);
  }
}

std::vector<double> EvalReport::average(bool balanced_metric) const {
  const auto& table = balanced_metric ? balanced : accuracy;
  std::vector<double> avg(columns.size(), 0.0);
  if (attributes.empty()) return avg;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    double s = 0;
    for (std::size_t a = 0; a < attributes.size(); ++a) s += table[a][c];
    avg[c] = s / static_cast<double>(attributes.size());
  }
  return avg;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string metadata(const EvalReport& r, std::string_view metric) {
  std::ostringstream out;
  out << "# metric " << metric << '\n'
      << "# seed " << r.seed << '\n'
      << "# config " << r.config_hash << '\n'
      << "# dataset " << r.dataset_id << '\n';
  return out.str();
}

}  // namespace

std::string format_text(const EvalReport& report, bool balanced_metric) {
  const auto& table = balanced_metric ? report.balanced : report.accuracy;
  std::size_t name_w = std::string_view("AVERAGE").size();
  for (const auto& a : report.attributes) name_w = std::max(name_w, a.size());
  std::vector<std::size_t> col_w;
  for (const auto& c : report.columns) col_w.push_back(std::max<std::size_t>(c.size(), 6));

  std::ostringstream out;
  out << metadata(report, balanced_metric ? "balanced-accuracy" : "accuracy");
  auto pad = [&](const std::string& s, std::size_t w, bool right) {
    const std::string fill(w > s.size() ? w - s.size() : 0, ' ');
    out << (right ? fill + s : s + fill);
  };
  pad("attribute", name_w, false);
  for (std::size_t c = 0; c < report.columns.size(); ++c) {
    out << "  ";
    pad(report.columns[c], col_w[c], true);
  }
  out << '\n';
  auto row = [&](const std::string& name, const std::vector<double>& values) {
    pad(name, name_w, false);
    for (std::size_t c = 0; c < values.size(); ++c) {
      out << "  ";
      pad(fixed(values[c], 2), col_w[c], true);
    }
    out << '\n';
  };
  for (std::size_t a = 0; a < report.attributes.size(); ++a) row(report.attributes[a], table[a]);
  row("AVERAGE", report.average(balanced_metric));
  return out.str();
}

std::string format_csv(const EvalReport& report, bool balanced_metric) {
  const auto& table = balanced_metric ? report.balanced : report.accuracy;
  std::ostringstream out;
  out << metadata(report, balanced_metric ? "balanced-accuracy" : "accuracy");
  out << "attribute";
  for (const auto& c : report.columns) out << ',' << c;
  out << '\n';
  for (std::size_t a = 0; a < report.attributes.size(); ++a) {
    out << report.attributes[a];
    for (double v : table[a]) out << ',' << fixed(v, 6);
    out << '\n';
  }
  out << "AVERAGE";
  for (double v : report.average(balanced_metric)) out << ',' << fixed(v, 6);
  out << '\n';
  return out.str();
}

void write_report(const fs::path& dir, const EvalReport& report) {
  fs::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << text;
    if (!out) throw Error("write failed for " + (dir / name).string());
  };
  put("report.txt", format_text(report, false));
  put("report.csv", format_csv(report, false));
  put("report_balanced.csv", format_csv(report, true));
}

EvalReport read_report_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open report " + path.string());
  EvalReport r;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string key;
      meta >> key;
      if (key == "seed") meta >> r.seed;
      else if (key == "config") meta >> r.config_hash;
      else if (key == "dataset") meta >> r.dataset_id;
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!header) {
      r.columns.assign(cells.begin() + 1, cells.end());
      header = true;
      continue;
    }
    if (cells.size() != r.columns.size() + 1) throw Error("report: ragged row in " + path.string());
    if (cells[0] == "AVERAGE") continue;
    r.attributes.push_back(cells[0]);
    std::vector<double> values;
    for (std::size_t c = 1; c < cells.size(); ++c) values.push_back(std::stod(cells[c]));
    r.accuracy.push_back(values);
    r.balanced.push_back(values);
  }
  return r;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace pedattr
