#include "aad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace aad {

double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& labels) {
  if (predictions.empty() || predictions.size() != labels.size())
    throw std::invalid_argument("accuracy: need equal non-empty vectors");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(predictions.size());
}

double wilcoxon_one_sample(const std::vector<double>& samples, double mu0) {
  if (samples.empty())
    throw std::invalid_argument("wilcoxon_one_sample: empty sample");
  std::vector<double> diffs;
  for (double x : samples) {
    double d = x - mu0;
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) return 1.0;  // all ties with mu0
  std::size_t n = diffs.size();
  if (n > 25)
    throw std::invalid_argument("wilcoxon_one_sample: n > 25 unsupported");

  // Mid-ranks over |d|.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(diffs[a]) < std::fabs(diffs[b]);
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n &&
           std::fabs(diffs[order[j + 1]]) == std::fabs(diffs[order[i]]))
      ++j;
    double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }

  double w_obs = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (diffs[k] > 0.0) w_obs += ranks[k];

  // P(W+ >= w_obs) over all equally likely sign assignments.
  std::uint64_t total = 1ull << n;
  std::uint64_t ge = 0;
  const double eps = 1e-12;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (mask & (1ull << k)) w += ranks[k];
    if (w >= w_obs - eps) ++ge;
  }
  return static_cast<double>(ge) / static_cast<double>(total);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = std::accumulate(xs.begin(), xs.end(), 0.0) /
                static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(xs.size() - 1))};
}

}  // namespace

ResultsTable aggregate(const std::vector<CellResult>& cells,
                       const std::string& baseline_method) {
  if (cells.empty()) return {};
  std::map<std::string, double> baseline_mean;  // per pair
  for (const CellResult& c : cells) {
    if (c.seed_accuracies.empty())
      throw std::invalid_argument("aggregate: empty cell " + c.pair + "/" +
                                  c.method);
    if (c.method == baseline_method)
      baseline_mean[c.pair] = mean_std(c.seed_accuracies).first;
  }
  ResultsTable t;
  std::map<std::string, std::vector<double>> per_method;
  for (const CellResult& c : cells) {
    auto [mean, sd] = mean_std(c.seed_accuracies);
    TableRow row{c.pair, c.method, c.seed_accuracies.size(), mean, sd, 1.0,
                 false};
    if (c.method != baseline_method) {
      auto it = baseline_mean.find(c.pair);
      if (it == baseline_mean.end())
        throw std::invalid_argument("aggregate: no baseline result for pair " +
                                    c.pair);
      row.p_value = wilcoxon_one_sample(c.seed_accuracies, it->second);
      row.starred = row.p_value < 0.05;
    }
    per_method[c.method].push_back(mean);
    if (row.starred) ++t.daggers[c.method];
    t.rows.push_back(std::move(row));
  }
  std::sort(t.rows.begin(), t.rows.end(),
            [](const TableRow& a, const TableRow& b) {
              return std::tie(a.pair, a.method) < std::tie(b.pair, b.method);
            });
  for (auto& [method, means] : per_method) {
    t.method_means[method] = mean_std(means).first;
    t.daggers.try_emplace(method, 0);
  }
  return t;
}

std::string format_pct(double fraction) {
  double pct = fraction * 100.0;
  // round half away from zero at one decimal
  double scaled = pct * 10.0;
  double rounded =
      scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
  double out = rounded / 10.0;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << out;
  return os.str();
}

std::string emit_table(const ResultsTable& table, const std::string& format) {
  std::ostringstream os;
  if (format == "csv") {
    os << "pair,method,seed_count,mean_pct,std_pct,p_value,starred\n";
    for (const TableRow& r : table.rows)
      os << r.pair << ',' << r.method << ',' << r.seed_count << ','
         << format_pct(r.mean) << ',' << format_pct(r.stddev) << ','
         << r.p_value << ',' << (r.starred ? 1 : 0) << '\n';
    return os.str();
  }
  if (format == "json") {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const TableRow& r : table.rows)
      j["rows"].push_back({{"pair", r.pair},
                           {"method", r.method},
                           {"seed_count", r.seed_count},
                           {"mean_pct", format_pct(r.mean)},
                           {"std_pct", format_pct(r.stddev)},
                           {"p_value", r.p_value},
                           {"starred", r.starred}});
    j["average"] = nlohmann::json::object();
    for (const auto& [m, v] : table.method_means)
      j["average"][m] = format_pct(v);
    j["daggers"] = table.daggers;
    return j.dump(2) + "\n";
  }
  if (format == "markdown") {
    os << "| pair | method | accuracy |\n|---|---|---|\n";
    for (const TableRow& r : table.rows)
      os << "| " << r.pair << " | " << r.method << " | " << format_pct(r.mean)
         << (r.starred ? "*" : "") << "\xC2\xB1" << format_pct(r.stddev)
         << " |\n";
    for (const auto& [m, v] : table.method_means) {
      auto d = table.daggers.find(m);
      os << "| Average | " << m << " | " << format_pct(v);
      if (d != table.daggers.end() && d->second > 0)
        os << " (" << d->second << "\xE2\x80\xA0)";
      os << " |\n";
    }
    return os.str();
  }
  throw std::invalid_argument("emit_table: unknown format '" + format + "'");
}

}  // namespace aad
