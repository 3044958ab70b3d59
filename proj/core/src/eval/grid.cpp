#include "failopt/eval/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

namespace failopt::eval {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string grid_csv(std::span<const EvalReport> reports) {
  std::string out = "detector,attack,task,auroc,base_auroc,asr,tau,n_samples\n";
  for (const auto& r : reports) {
    out += csv_field(r.detector_id) + "," + csv_field(r.attack_name) + "," + csv_field(r.task) + "," +
           format_number(r.auroc) + "," + format_number(r.base_auroc) + "," +
           (r.asr ? format_number(*r.asr) : std::string()) + "," + format_number(r.tau) + "," +
           std::to_string(r.n_samples) + "\n";
  }
  return out;
}

std::string grid_text(std::span<const EvalReport> reports) {
  std::vector<std::array<std::string, 6>> rows;
  rows.push_back({"detector", "attack", "task", "AUROC", "ASR", "n"});
  const auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    rows.push_back({r.detector_id, r.attack_name, r.task, pct(r.auroc), r.asr ? pct(*r.asr) : "-",
                    std::to_string(r.n_samples)});
  }
  std::array<std::size_t, 6> width{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const bool numeric = c >= 3;
      const auto pad = std::string(width[c] - row[c].size(), ' ');
      out += numeric ? pad + row[c] : row[c] + pad;
      if (c + 1 < row.size()) out += "  ";
    }
    out += '\n';
  }
  return out;
}

}  // namespace failopt::eval
