#include "calibqa/report.h"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "calibqa/error.h"
#include "json.hpp"

namespace calibqa {

using nlohmann::json;

namespace {

struct NamedMetric {
  const char* name;
  std::optional<double> EvalReport::*field;
};

constexpr std::array<NamedMetric, 6> kMetrics = {{
    {"calib_accuracy", &EvalReport::calib_accuracy},
    {"auroc", &EvalReport::auroc},
    {"cov_at_acc80", &EvalReport::cov_at_acc80},
    {"risk_coverage_area", &EvalReport::risk_coverage_area},
    {"qa_top1_em", &EvalReport::qa_top1_em},
    {"qa_top5_em", &EvalReport::qa_top5_em},
}};

}  // namespace

EvalReport evaluate_predictions(std::span<const double> probabilities,
                                std::span<const int> classified,
                                std::span<const int> correct) {
  EvalReport report;
  report.n_examples = correct.size();
  report.calib_accuracy = calibration_accuracy(classified, correct);
  try {
    report.auroc = auroc(probabilities, correct);
  } catch (const MetricUndefinedError& e) {
    spdlog::warn("{}", e.what());
  }
  report.cov_at_acc80 = coverage_at_accuracy(probabilities, correct, 0.8);
  report.curve = risk_coverage_curve(probabilities, correct);
  report.risk_coverage_area = calibqa::risk_coverage_area(report.curve);
  return report;
}

void fill_answer_em(EvalReport& report, std::span<const ExampleRecord> records, EmMode em_mode) {
  if (records.empty()) return;
  double top1 = 0.0;
  double top5 = 0.0;
  for (const ExampleRecord& r : records) {
    bool any = false;
    for (std::size_t k = 0; k < r.candidates.size() && k < 5; ++k) {
      const bool ok = answer_is_correct(r.candidates[k].text, r.gold_answers, em_mode);
      if (k == 0 && ok) top1 += 1.0;
      any = any || ok;
    }
    if (any) top5 += 1.0;
  }
  report.qa_top1_em = top1 / static_cast<double>(records.size());
  report.qa_top5_em = top5 / static_cast<double>(records.size());
}

MetricSummary summarize(std::string name, std::span<const double> values) {
  MetricSummary s;
  s.name = std::move(name);
  s.runs = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (const double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) {
    spdlog::debug("{}: fewer than two runs, reporting std 0", s.name);
    return s;
  }
  double sq = 0.0;
  for (const double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return s;
}

AggregateReport aggregate_reports(std::span<const EvalReport> runs) {
  AggregateReport out;
  for (const NamedMetric& metric : kMetrics) {
    std::vector<double> values;
    for (const EvalReport& r : runs) {
      if (const auto& v = r.*(metric.field)) values.push_back(100.0 * *v);
    }
    if (values.empty()) continue;
    out.metrics.push_back(summarize(metric.name, values));
  }
  return out;
}

std::string format_mean_std(double mean, double stddev) {
  // Avoid "-0.0" from rounding tiny negatives.
  const auto clean = [](double v) { return std::abs(v) < 0.05 ? 0.0 : v; };
  return fmt::format("{:.1f}±{:.1f}", clean(mean), clean(stddev));
}

std::string report_to_json(std::span<const EvalReport> runs, const AggregateReport& aggregate) {
  json per_run = json::array();
  for (const EvalReport& r : runs) {
    json entry{{"n_examples", r.n_examples}};
    for (const NamedMetric& metric : kMetrics) {
      const auto& v = r.*(metric.field);
      entry[metric.name] = v ? json(*v) : json(nullptr);
    }
    per_run.push_back(std::move(entry));
  }
  json agg = json::object();
  for (const MetricSummary& s : aggregate.metrics) {
    agg[s.name] = json{{"mean", s.mean},
                       {"std", s.stddev},
                       {"runs", s.runs},
                       {"display", format_mean_std(s.mean, s.stddev)}};
  }
  return json{{"runs", per_run}, {"aggregate", agg}}.dump(2) + "\n";
}

std::string report_to_table(std::span<const EvalReport> runs, const AggregateReport& aggregate) {
  std::string out = "run\tn_examples";
  for (const NamedMetric& metric : kMetrics) out += fmt::format("\t{}", metric.name);
  out += '\n';
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out += fmt::format("{}\t{}", i + 1, runs[i].n_examples);
    for (const NamedMetric& metric : kMetrics) {
      const auto& v = runs[i].*(metric.field);
      out += v ? fmt::format("\t{:.1f}", 100.0 * *v) : std::string("\t-");
    }
    out += '\n';
  }
  out += "aggregate\t-";
  for (const NamedMetric& metric : kMetrics) {
    auto it = std::find_if(aggregate.metrics.begin(), aggregate.metrics.end(),
                           [&](const MetricSummary& s) { return s.name == metric.name; });
    out += it == aggregate.metrics.end() ? std::string("\t-")
                                         : "\t" + format_mean_std(it->mean, it->stddev);
  }
  out += '\n';
  return out;
}

std::string curve_to_csv(std::span<const RiskCoveragePoint> curve) {
  std::string out = "coverage,risk\n";
  for (const auto& p : curve) out += fmt::format("{:.6f},{:.6f}\n", p.coverage, p.risk);
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << contents;
}

}  // namespace calibqa
