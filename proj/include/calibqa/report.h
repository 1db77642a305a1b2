#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calibqa/interchange.h"
#include "calibqa/metrics.h"

namespace calibqa {

// Metrics of one calibrator on one evaluation set; values are fractions in
// [0, 1] and render as percentages.
struct EvalReport {
  std::optional<double> calib_accuracy;
  std::optional<double> auroc;
  std::optional<double> cov_at_acc80;
  std::optional<double> risk_coverage_area;
  // Share of examples whose top-1 / any top-5 candidate is correct.
  std::optional<double> qa_top1_em;
  std::optional<double> qa_top5_em;
  std::vector<RiskCoveragePoint> curve;
  std::size_t n_examples = 0;
};

// Scores one-row-per-example calibrator output. `correct` is the actual
// correctness of each example's answer; `classified` the thresholded
// prediction. AUROC is left empty when only one class is present.
EvalReport evaluate_predictions(std::span<const double> probabilities,
                                std::span<const int> classified,
                                std::span<const int> correct);

// Top-1 / top-5 answer EM of the base model's own candidate order.
void fill_answer_em(EvalReport& report, std::span<const ExampleRecord> records,
                    EmMode em_mode = EmMode::kSquad);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  // Sample standard deviation; 0 with fewer than two runs.
  double stddev = 0.0;
  std::size_t runs = 0;
};

struct AggregateReport {
  std::vector<MetricSummary> metrics;
};

// Per-metric mean and sample std over runs (values on the percentage scale).
AggregateReport aggregate_reports(std::span<const EvalReport> runs);

// Mean and sample std of raw values. Fewer than two values give std 0.
MetricSummary summarize(std::string name, std::span<const double> values);

// "64.0±3.2"
std::string format_mean_std(double mean, double stddev);

std::string report_to_json(std::span<const EvalReport> runs, const AggregateReport& aggregate);
std::string report_to_table(std::span<const EvalReport> runs, const AggregateReport& aggregate);
std::string curve_to_csv(std::span<const RiskCoveragePoint> curve);

void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace calibqa
