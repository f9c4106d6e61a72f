#pragma once

#include <map>
#include <string>
#include <vector>

namespace aad {

double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& labels);

// One-sided (greater) exact one-sample Wilcoxon signed-rank p-value against
// location mu0. Differences equal to mu0 are dropped; tied magnitudes get
// mid-ranks. Exact enumeration of all 2^n sign patterns, n <= 25.
double wilcoxon_one_sample(const std::vector<double>& samples, double mu0);

struct CellResult {
  std::string pair;
  std::string method;
  std::vector<double> seed_accuracies;
};

struct TableRow {
  std::string pair;
  std::string method;
  std::size_t seed_count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample std, n-1
  double p_value = 1.0;
  bool starred = false;
};

struct ResultsTable {
  std::vector<TableRow> rows;                  // ordered by (pair, method)
  std::map<std::string, double> method_means;  // average row
  std::map<std::string, int> daggers;          // starred pairs per method
};

// Stars any non-baseline cell whose seed accuracies beat the baseline
// method's mean for the same pair at p < 0.05 (one-sided Wilcoxon).
ResultsTable aggregate(const std::vector<CellResult>& cells,
                       const std::string& baseline_method = "baseline");

// format in {csv, json, markdown}; percentages with one decimal, rounded
// half away from zero.
std::string emit_table(const ResultsTable& table, const std::string& format);

std::string format_pct(double fraction);  // e.g. 0.8666 -> "86.7"

}  // namespace aad
