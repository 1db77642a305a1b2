#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "calibqa/calibrator.h"
#include "calibqa/grid_search.h"
#include "calibqa/interchange.h"
#include "calibqa/report.h"

namespace calibqa {

// Repeated train/evaluate runs, each with its own partition and seed.
struct RunProtocol {
  int n_runs = 5;
  std::vector<std::uint64_t> seeds;
  bool resplit_each_run = true;
  SplitFractions fractions;

  // n_runs seeds derived from base_seed.
  static RunProtocol with_runs(int n_runs, std::uint64_t base_seed);
  void validate() const;
};

struct ProtocolOptions {
  // When set, GBT hyperparameters are tuned on each run's dev part.
  std::optional<GbtGrid> grid;
  double decision_threshold = 0.5;
  EmMode em_mode = EmMode::kSquad;
  int jobs = 1;
};

struct ProtocolRun {
  EvalReport report;
  std::uint64_t seed = 0;
  // Learner actually trained in this run (after tuning, with the run seed).
  LearnerSpec learner;
  std::optional<double> dev_accuracy;
};

struct ProtocolResult {
  std::vector<ProtocolRun> runs;
  AggregateReport aggregate;

  std::vector<EvalReport> reports() const;
};

ProtocolResult run_protocol(std::span<const ExampleRecord> records, const FeatureConfig& config,
                            const LearnerSpec& learner, const RunProtocol& protocol,
                            const ProtocolOptions& options = {});

// Scores the model on `test`, one row per record (candidate 0).
EvalReport evaluate_model(const CalibratorModel& model, std::span<const ExampleRecord> test,
                          EmMode em_mode = EmMode::kSquad);

}  // namespace calibqa
