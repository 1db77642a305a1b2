#include "calibqa/protocol.h"

#include "calibqa/error.h"
#include "calibqa/parallel.h"

namespace calibqa {

RunProtocol RunProtocol::with_runs(int n_runs, std::uint64_t base_seed) {
  RunProtocol p;
  p.n_runs = n_runs;
  for (int r = 0; r < n_runs; ++r) {
    p.seeds.push_back(mix_seed(base_seed, static_cast<std::uint64_t>(r)));
  }
  return p;
}

void RunProtocol::validate() const {
  if (n_runs < 1) throw InputError("protocol needs at least one run");
  if (seeds.size() != static_cast<std::size_t>(n_runs)) {
    throw InputError("protocol needs exactly one seed per run");
  }
}

std::vector<EvalReport> ProtocolResult::reports() const {
  std::vector<EvalReport> out;
  out.reserve(runs.size());
  for (const ProtocolRun& r : runs) out.push_back(r.report);
  return out;
}

EvalReport evaluate_model(const CalibratorModel& model, std::span<const ExampleRecord> test,
                          EmMode em_mode) {
  const FeatureMatrix features =
      feature_matrix(test, model.feature_config(), /*per_candidate=*/false);
  const std::vector<double> proba = model.predict_proba(features);
  EvalReport report = evaluate_predictions(
      proba, apply_threshold(proba, model.decision_threshold()), features.labels);
  fill_answer_em(report, test, em_mode);
  return report;
}

ProtocolResult run_protocol(std::span<const ExampleRecord> records, const FeatureConfig& config,
                            const LearnerSpec& learner, const RunProtocol& protocol,
                            const ProtocolOptions& options) {
  protocol.validate();
  config.validate();
  const std::vector<ExampleRecord> all(records.begin(), records.end());

  ProtocolResult result;
  result.runs.resize(static_cast<std::size_t>(protocol.n_runs));
  parallel_for(result.runs.size(), options.jobs, [&](std::size_t r) {
    ProtocolRun& run = result.runs[r];
    run.seed = protocol.seeds[r];
    const std::uint64_t split_seed = protocol.resplit_each_run ? run.seed : protocol.seeds[0];
    const RecordSplit split = split_records(all, protocol.fractions, split_seed);
    const FeatureMatrix train = feature_matrix(split.train, config, false);

    run.learner = learner;
    run.learner.gbt.seed = run.seed;
    if (options.grid && learner.kind == LearnerKind::kGbt) {
      const FeatureMatrix dev = feature_matrix(split.dev, config, false);
      GbtGrid grid = *options.grid;
      grid.base = run.learner.gbt;
      const GridSearchResult tuned = grid_search(train, dev, grid, options.decision_threshold);
      run.learner.gbt = tuned.best;
      run.dev_accuracy = tuned.best_dev_accuracy;
    }
    const CalibratorModel model =
        train_calibrator(train, config, run.learner, options.decision_threshold);
    run.report = evaluate_model(model, split.test, options.em_mode);
  });
  result.aggregate = aggregate_reports(result.reports());
  return result;
}

}  // namespace calibqa
