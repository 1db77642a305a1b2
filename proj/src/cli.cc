#include "calibqa/cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "calibqa/calibrator.h"
#include "calibqa/error.h"
#include "calibqa/features.h"
#include "calibqa/grid_search.h"
#include "calibqa/interchange.h"
#include "calibqa/metrics.h"
#include "calibqa/protocol.h"
#include "calibqa/report.h"
#include "calibqa/rerank.h"
#include "calibqa/synth.h"
#include "json.hpp"

namespace calibqa {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  int jobs = 1;
  std::string em_mode = "squad";
  bool strict = false;

  ReadOptions read_options() const { return {strict, parse_em_mode(em_mode)}; }
};

struct FeatureOptions {
  std::string parts = "maxprob";
  std::string pooling = "mean";
};

struct LearnerOptions {
  std::string kind = "gbt";
  GbtHyperparams gbt;
  std::optional<double> colsample;
  LogisticParams logistic;
  int knn_k = 5;
  bool grid = false;
  std::vector<double> grid_colsample;
  std::vector<double> grid_lr;
  std::vector<int> grid_trees;
  double threshold = 0.5;

  LearnerSpec spec() const {
    LearnerSpec s;
    s.kind = parse_learner_kind(kind);
    s.gbt = gbt;
    if (colsample) {
      s.gbt.colsample_by_tree = s.gbt.colsample_by_level = s.gbt.colsample_by_node = *colsample;
    }
    s.logistic = logistic;
    s.knn_k = knn_k;
    return s;
  }

  std::optional<GbtGrid> make_grid() const {
    if (!grid) return std::nullopt;
    GbtGrid g = GbtGrid::defaults();
    if (!grid_colsample.empty()) g.colsample = grid_colsample;
    if (!grid_lr.empty()) g.learning_rates = grid_lr;
    if (!grid_trees.empty()) g.n_estimators = grid_trees;
    g.base = spec().gbt;
    return g;
  }
};

void add_feature_options(CLI::App* cmd, FeatureOptions& f) {
  // INI values like "a,b" arrive as a list; join them back.
  cmd->add_option("--features", f.parts, "Comma separated feature parts")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join)
      ->capture_default_str();
  cmd->add_option("--pooling", f.pooling, "Token pooling: mean or cls")->capture_default_str();
}

void add_learner_options(CLI::App* cmd, LearnerOptions& l) {
  cmd->add_option("--learner", l.kind, "gbt, logistic or knn")->capture_default_str();
  cmd->add_option("--n-estimators", l.gbt.n_estimators)->capture_default_str();
  cmd->add_option("--learning-rate", l.gbt.learning_rate)->capture_default_str();
  cmd->add_option("--max-depth", l.gbt.max_depth)->capture_default_str();
  cmd->add_option("--lambda", l.gbt.l2_leaf_reg, "Leaf L2 regularization")
      ->capture_default_str();
  cmd->add_option("--min-child-weight", l.gbt.min_child_weight)->capture_default_str();
  cmd->add_option("--colsample", l.colsample,
                  "Column subsample rate for tree, level and node");
  cmd->add_option("--seed", l.gbt.seed)->capture_default_str();
  cmd->add_option("--l2", l.logistic.l2, "Logistic L2 penalty")->capture_default_str();
  cmd->add_option("--max-iters", l.logistic.max_iters)->capture_default_str();
  cmd->add_option("--knn-k", l.knn_k)->capture_default_str();
  cmd->add_flag("--grid", l.grid, "Tune GBT hyperparameters on the dev records");
  cmd->add_option("--grid-colsample", l.grid_colsample)->delimiter(',');
  cmd->add_option("--grid-lr", l.grid_lr)->delimiter(',');
  cmd->add_option("--grid-trees", l.grid_trees)->delimiter(',');
  cmd->add_option("--threshold", l.threshold, "Decision threshold")->capture_default_str();
}

FeatureConfig make_config(const FeatureOptions& f, std::span<const ExampleRecord> records) {
  if (records.empty()) throw InputError("no records");
  return FeatureConfig::from_parts(f.parts, parse_pooling(f.pooling),
                                   records.front().embeddings.hidden_dim);
}

json learner_json(const LearnerSpec& s) {
  json j{{"kind", to_string(s.kind)}};
  switch (s.kind) {
    case LearnerKind::kGbt:
      j["n_estimators"] = s.gbt.n_estimators;
      j["learning_rate"] = s.gbt.learning_rate;
      j["max_depth"] = s.gbt.max_depth;
      j["colsample_by_tree"] = s.gbt.colsample_by_tree;
      j["colsample_by_level"] = s.gbt.colsample_by_level;
      j["colsample_by_node"] = s.gbt.colsample_by_node;
      j["lambda"] = s.gbt.l2_leaf_reg;
      j["min_child_weight"] = s.gbt.min_child_weight;
      j["seed"] = s.gbt.seed;
      break;
    case LearnerKind::kLogistic:
      j["l2"] = s.logistic.l2;
      j["max_iters"] = s.logistic.max_iters;
      break;
    case LearnerKind::kKnn:
      j["k"] = s.knn_k;
      break;
  }
  return j;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory: " + dir);
  return dir;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string train;
  std::string dev;
  std::string out_dir;
  bool per_candidate = false;
  FeatureOptions features;
  LearnerOptions learner;
};

void cmd_train(const GlobalOptions& g, const TrainOptions& o, std::ostream& out) {
  const ReadOptions ro = g.read_options();
  const std::vector<ExampleRecord> train = read_records(o.train, ro);
  std::vector<ExampleRecord> dev;
  if (!o.dev.empty()) dev = read_records(o.dev, ro);
  const fs::path dir = prepare_dir(o.out_dir);

  const FeatureConfig config = make_config(o.features, train);
  const FeatureMatrix train_fm = feature_matrix(train, config, o.per_candidate);
  LearnerSpec learner = o.learner.spec();

  json echo;
  if (const auto grid = o.learner.make_grid()) {
    if (learner.kind != LearnerKind::kGbt) throw InputError("--grid needs --learner gbt");
    if (dev.empty()) throw InputError("--grid needs --dev records");
    const FeatureMatrix dev_fm = feature_matrix(dev, config, o.per_candidate);
    const GridSearchResult tuned = grid_search(train_fm, dev_fm, *grid, o.learner.threshold, g.jobs);
    learner.gbt = tuned.best;
    echo["grid_best_dev_accuracy"] = tuned.best_dev_accuracy;
    echo["grid_points"] = tuned.scores.size();
  }
  const CalibratorModel model = train_calibrator(train_fm, config, learner, o.learner.threshold);
  model.save(dir / "model.json");
  out << fmt::format("wrote {}\n", (dir / "model.json").string());

  if (!dev.empty()) {
    const EvalReport report = evaluate_model(model, dev, ro.em_mode);
    const std::vector<EvalReport> runs{report};
    const AggregateReport agg = aggregate_reports(runs);
    json doc = json::parse(report_to_json(runs, agg));
    doc["learner"] = learner_json(learner);
    doc["feature_config"] = config.canonical_text();
    for (auto& [k, v] : echo.items()) doc[k] = v;
    write_text_file(dir / "dev_report.json", doc.dump(2) + "\n");
    const std::string table = report_to_table(runs, agg);
    write_text_file(dir / "dev_report.tsv", table);
    out << table;
  }
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string model;
  std::string test;
  std::string records;
  std::string out_dir;
  int runs = 5;
  std::uint64_t protocol_seed = 0;
  bool fixed_split = false;
  FeatureOptions features;
  LearnerOptions learner;
};

void cmd_eval(const GlobalOptions& g, const EvalOptions& o, std::ostream& out) {
  const ReadOptions ro = g.read_options();
  const fs::path dir = prepare_dir(o.out_dir);
  if (!o.model.empty()) {
    if (o.test.empty()) throw InputError("--model needs --test records");
    const CalibratorModel model = CalibratorModel::load(o.model);
    const std::vector<ExampleRecord> test = read_records(o.test, ro);
    const EvalReport report = evaluate_model(model, test, ro.em_mode);
    const std::vector<EvalReport> runs{report};
    const AggregateReport agg = aggregate_reports(runs);
    write_text_file(dir / "report.json", report_to_json(runs, agg));
    const std::string table = report_to_table(runs, agg);
    write_text_file(dir / "report.tsv", table);
    write_text_file(dir / "curve.csv", curve_to_csv(report.curve));
    out << table;
    return;
  }
  if (o.records.empty()) throw InputError("eval needs --model and --test, or --records");
  const std::vector<ExampleRecord> records = read_records(o.records, ro);
  const FeatureConfig config = make_config(o.features, records);
  RunProtocol protocol = RunProtocol::with_runs(o.runs, o.protocol_seed);
  protocol.resplit_each_run = !o.fixed_split;
  ProtocolOptions options;
  options.grid = o.learner.make_grid();
  options.decision_threshold = o.learner.threshold;
  options.em_mode = ro.em_mode;
  options.jobs = g.jobs;
  const ProtocolResult result = run_protocol(records, config, o.learner.spec(), protocol, options);

  const std::vector<EvalReport> reports = result.reports();
  json doc = json::parse(report_to_json(reports, result.aggregate));
  doc["feature_config"] = config.canonical_text();
  json learners = json::array();
  for (const ProtocolRun& run : result.runs) {
    json l = learner_json(run.learner);
    l["run_seed"] = run.seed;
    if (run.dev_accuracy) l["grid_best_dev_accuracy"] = *run.dev_accuracy;
    learners.push_back(std::move(l));
  }
  doc["learners"] = std::move(learners);
  write_text_file(dir / "report.json", doc.dump(2) + "\n");
  const std::string table = report_to_table(reports, result.aggregate);
  write_text_file(dir / "report.tsv", table);
  for (std::size_t r = 0; r < reports.size(); ++r) {
    write_text_file(dir / fmt::format("curve_run{}.csv", r + 1), curve_to_csv(reports[r].curve));
  }
  out << table;
}

// ---------------------------------------------------------------------------

struct RerankOptions {
  std::string model;
  std::string records;
  std::string out_dir;
  std::string scorer = "calibrator";
  std::size_t top_n = 1000;
};

void cmd_rerank(const GlobalOptions& g, const RerankOptions& o, std::ostream& out) {
  const ReadOptions ro = g.read_options();
  const std::vector<ExampleRecord> records = read_records(o.records, ro);
  const fs::path dir = prepare_dir(o.out_dir);
  std::optional<CalibratorModel> model;
  CandidateScorer scorer;
  if (o.scorer == "calibrator") {
    if (o.model.empty()) throw InputError("--scorer calibrator needs --model");
    model = CalibratorModel::load(o.model);
    scorer = calibrator_scorer(*model);
  } else if (o.scorer == "model") {
    scorer = model_score_scorer();
  } else if (o.scorer == "normalized") {
    scorer = normalized_product_scorer();
  } else if (o.scorer == "unnormalized") {
    scorer = unnormalized_product_scorer();
  } else {
    throw InputError("unknown scorer: " + o.scorer);
  }
  const RerankEvaluation eval = rerank_eval(records, scorer, o.top_n, ro.em_mode, g.jobs);
  std::string lines;
  for (const RerankResult& r : eval.results) lines += rerank_result_to_line(r);
  write_text_file(dir / "rerank.jsonl", lines);
  const std::string table = rerank_table(eval);
  write_text_file(dir / "rerank_em.tsv", table);
  out << table;
}

// ---------------------------------------------------------------------------

struct ProjectOptions {
  std::vector<std::string> inputs;
  std::string out;
  std::string labels_by = "both";
  FeatureOptions features{"emb_original", "mean"};
};

void cmd_project(const GlobalOptions& g, const ProjectOptions& o, std::ostream& out) {
  const ReadOptions ro = g.read_options();
  std::vector<ExampleRecord> records;
  std::vector<int> domain;
  for (std::size_t d = 0; d < o.inputs.size(); ++d) {
    auto part = read_records(o.inputs[d], ro);
    domain.insert(domain.end(), part.size(), static_cast<int>(d));
    std::move(part.begin(), part.end(), std::back_inserter(records));
  }
  const FeatureConfig config = make_config(o.features, records);
  const FeatureMatrix fm = feature_matrix(records, config, false);
  std::vector<int> fit_labels(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (o.labels_by == "domain") {
      fit_labels[i] = domain[i];
    } else if (o.labels_by == "correctness") {
      fit_labels[i] = fm.labels[i];
    } else if (o.labels_by == "both") {
      fit_labels[i] = 2 * domain[i] + fm.labels[i];
    } else {
      throw InputError("--labels-by must be domain, correctness or both");
    }
  }
  const LdaProjection lda = lda_fit(fm.values, fit_labels);
  std::string csv = "id,x,y,domain,correct\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    csv += fmt::format("{},{:.6f},{:.6f},{},{}\n", records[i].id, lda.coordinates(r, 0),
                       lda.coordinates(r, 1), domain[i], fm.labels[i]);
  }
  write_text_file(o.out, csv);

  json summary{{"n", records.size()}, {"labels_by", o.labels_by}, {"eigenvalues", lda.eigenvalues}};
  const auto silhouette = [&](const std::vector<int>& labels) -> json {
    if (std::set<int>(labels.begin(), labels.end()).size() < 2) return nullptr;
    return silhouette_score(lda.coordinates, labels);
  };
  summary["silhouette_domain"] = silhouette(domain);
  summary["silhouette_correctness"] = silhouette(fm.labels);
  out << summary.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

struct SynthOptions {
  SynthSpec spec;
  std::string task = "reading_comprehension";
  std::string out;
};

void cmd_synth(const GlobalOptions& g, SynthOptions o, std::ostream& out) {
  o.spec.task_kind = parse_task_kind(o.task);
  const std::vector<ExampleRecord> records = generate(o.spec, g.jobs);
  write_records(fs::path(o.out), records);
  out << fmt::format("wrote {} records to {}\n", records.size(), o.out);
}

// ---------------------------------------------------------------------------

struct ValidateOptions {
  std::vector<std::string> inputs;
  std::size_t max_errors = 50;
};

int cmd_validate(const GlobalOptions& g, const ValidateOptions& o, std::ostream& out,
                 std::ostream& err) {
  const ReadOptions ro = g.read_options();
  std::size_t total_errors = 0;
  for (const std::string& path : o.inputs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open record file: " + path);
    std::unordered_set<std::string> ids;
    std::optional<int> hidden_dim;
    std::size_t line_number = 0;
    std::size_t records = 0;
    std::size_t errors = 0;
    const auto report = [&](const std::string& message) {
      if (errors < o.max_errors) err << path << ": " << message << "\n";
      ++errors;
    };
    std::string line;
    while (std::getline(in, line)) {
      ++line_number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const ExampleRecord r = record_from_line(line, ro, line_number);
        ++records;
        if (!ids.insert(r.id).second) {
          report(fmt::format("line {}: duplicate id '{}'", line_number, r.id));
        }
        if (!hidden_dim) {
          hidden_dim = r.embeddings.hidden_dim;
        } else if (*hidden_dim != r.embeddings.hidden_dim) {
          report(fmt::format("line {}: record '{}' hidden_dim {} differs from {}", line_number,
                             r.id, r.embeddings.hidden_dim, *hidden_dim));
        }
      } catch (const InputError& e) {
        report(e.what());
      }
    }
    out << fmt::format("{}: {} records, {} errors\n", path, records, errors);
    total_errors += errors;
  }
  return total_errors == 0 ? 0 : static_cast<int>(ExitCode::kInput);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibrators for question answering models", "calibqa"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI file; [command] sections set command options");

  GlobalOptions global;
  app.add_option("--jobs", global.jobs, "Worker threads")
      ->envname("CALIBQA_JOBS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--em-mode", global.em_mode, "squad or strict")->capture_default_str();
  app.add_flag("--strict", global.strict, "Reject unknown record keys");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a calibrator");
  train_cmd->add_option("--train", train.train)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--dev", train.dev)->check(CLI::ExistingFile);
  train_cmd->add_option("--out-dir", train.out_dir)->required();
  train_cmd->add_flag("--per-candidate", train.per_candidate,
                      "One training row per candidate (reranking calibrators)");
  add_feature_options(train_cmd, train.features);
  add_learner_options(train_cmd, train.learner);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model, or run the multi-run protocol");
  eval_cmd->add_option("--model", eval.model)->check(CLI::ExistingFile);
  eval_cmd->add_option("--test", eval.test)->check(CLI::ExistingFile);
  eval_cmd->add_option("--records", eval.records, "Records for the multi-run protocol")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out-dir", eval.out_dir)->required();
  eval_cmd->add_option("--runs", eval.runs)->capture_default_str();
  eval_cmd->add_option("--protocol-seed", eval.protocol_seed)->capture_default_str();
  eval_cmd->add_flag("--fixed-split", eval.fixed_split, "Reuse the first run's partition");
  add_feature_options(eval_cmd, eval.features);
  add_learner_options(eval_cmd, eval.learner);

  RerankOptions rerank;
  auto* rerank_cmd = app.add_subcommand("rerank", "Rerank open-extractive candidates");
  rerank_cmd->add_option("--model", rerank.model)->check(CLI::ExistingFile);
  rerank_cmd->add_option("--records", rerank.records)->required()->check(CLI::ExistingFile);
  rerank_cmd->add_option("--out-dir", rerank.out_dir)->required();
  rerank_cmd->add_option("--scorer", rerank.scorer, "calibrator, model, normalized, unnormalized")
      ->capture_default_str();
  rerank_cmd->add_option("--top-n", rerank.top_n)->check(CLI::PositiveNumber)->capture_default_str();

  ProjectOptions project;
  auto* project_cmd = app.add_subcommand("project", "2-D LDA projection for plotting");
  project_cmd->add_option("--input", project.inputs, "One record file per domain")
      ->required()
      ->check(CLI::ExistingFile);
  project_cmd->add_option("--out", project.out)->required();
  project_cmd->add_option("--labels-by", project.labels_by, "domain, correctness or both")
      ->capture_default_str();
  add_feature_options(project_cmd, project.features);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic records");
  synth_cmd->add_option("--out", synth.out)->required();
  synth_cmd->add_option("--n", synth.spec.n_examples)->capture_default_str();
  synth_cmd->add_option("--m", synth.spec.m)->capture_default_str();
  synth_cmd->add_option("--score-informativeness", synth.spec.score_informativeness)
      ->capture_default_str();
  synth_cmd->add_option("--embedding-informativeness", synth.spec.embedding_informativeness)
      ->capture_default_str();
  synth_cmd->add_option("--candidates", synth.spec.candidates_per_example)->capture_default_str();
  synth_cmd->add_option("--passages", synth.spec.passages_per_example)->capture_default_str();
  synth_cmd->add_option("--noise-std", synth.spec.noise_std)->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed)->capture_default_str();
  synth_cmd->add_option("--encoder-seed", synth.spec.encoder_seed)->capture_default_str();
  synth_cmd->add_option("--task", synth.task)->capture_default_str();
  synth_cmd->add_option("--token-rows", synth.spec.token_rows)->capture_default_str();
  synth_cmd->add_option("--label-noise", synth.spec.label_noise)->capture_default_str();
  synth_cmd->add_option("--label-offset", synth.spec.label_offset)->capture_default_str();
  synth_cmd->add_option("--domain", synth.spec.domain)->capture_default_str();
  synth_cmd->add_option("--domain-shift", synth.spec.domain_shift)->capture_default_str();
  synth_cmd->add_option("--span-signal", synth.spec.span_signal)->capture_default_str();

  ValidateOptions validate;
  auto* validate_cmd = app.add_subcommand("validate", "Check record files");
  validate_cmd->add_option("--input", validate.inputs)->required();
  validate_cmd->add_option("--max-errors", validate.max_errors, "Errors printed per file")
      ->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    // A missing input file is an input error like any other.
    return static_cast<int>(ExitCode::kInput);
  }

  try {
    if (*train_cmd) cmd_train(global, train, out);
    if (*eval_cmd) cmd_eval(global, eval, out);
    if (*rerank_cmd) cmd_rerank(global, rerank, out);
    if (*project_cmd) cmd_project(global, project, out);
    if (*synth_cmd) cmd_synth(global, synth, out);
    if (*validate_cmd) return cmd_validate(global, validate, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kFailure);
  }
  return 0;
}

}  // namespace calibqa
