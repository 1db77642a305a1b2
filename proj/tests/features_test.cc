#include "calibqa/features.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "calibqa/error.h"
#include "calibqa/synth.h"
#include "test_support.h"

namespace calibqa {
namespace {

using testing::make_record;

Embedding tokens(const Matrix& x) {
  std::vector<float> data;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) data.push_back(static_cast<float>(x(i, j)));
  }
  return Embedding::Tokens(static_cast<int>(x.rows()), static_cast<int>(x.cols()), data);
}

TEST(PoolMeanTest, Examples) {
  EXPECT_EQ(pool_mean(Embedding::Tokens(2, 2, {1, 3, 3, 5})), (std::vector<double>{2, 4}));
  EXPECT_EQ(pool_mean(Embedding::Tokens(1, 3, {7, -1, 0})), (std::vector<double>{7, -1, 0}));
}

TEST(PoolMeanTest, MatchesColumnSumOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = testing::random_matrix(rng, 5, 3);
    const Embedding e = tokens(x);
    const auto pooled = pool_mean(e);
    for (int j = 0; j < 3; ++j) {
      double sum = 0.0;
      for (int i = 0; i < 5; ++i) sum += e.data[static_cast<std::size_t>(i * 3 + j)];
      EXPECT_NEAR(pooled[static_cast<std::size_t>(j)], sum / 5.0, 1e-6);
    }
  }
}

TEST(PoolMeanTest, Linear) {
  std::mt19937_64 rng(4);
  const Matrix a = testing::random_matrix(rng, 6, 4);
  const Matrix b = testing::random_matrix(rng, 6, 4);
  const double alpha = 0.7;
  const double beta = -1.3;
  const auto pa = pool_mean(tokens(a));
  const auto pb = pool_mean(tokens(b));
  const auto pab = pool_mean(tokens(alpha * a + beta * b));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(pab[j], alpha * pa[j] + beta * pb[j], 1e-6);
}

TEST(PoolMeanTest, EmptyRejected) {
  EXPECT_THROW(pool_mean(Embedding::Tokens(0, 3, {})), InputError);
}

TEST(SoftmaxTest, SumsToOneAndPositive) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 30.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> logits(1 + trial % 9);
    for (double& v : logits) v = n(rng);
    const auto p = softmax(logits);
    double sum = 0.0;
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(FeatureConfigTest, DimensionLaw) {
  const auto c = FeatureConfig::from_parts("kamath17,emb_original,emb_context_bt", Pooling::kMean, 768);
  EXPECT_EQ(c.dimension(), 17u + 2u * 768u);
  const auto all = FeatureConfig::from_parts(
      "maxprob,kamath17,emb_original,emb_question_bt,emb_context_bt,emb_cls,likelihood,"
      "norm_scores,unnorm_scores,span_embedding,max_score",
      Pooling::kMean, 10);
  EXPECT_EQ(all.dimension(), 1u + 17u + 5u * 10u + 1u + 2u + 2u + 1u);
}

TEST(FeatureConfigTest, Validation) {
  EXPECT_THROW(FeatureConfig::from_parts("", Pooling::kMean, 4), InputError);
  EXPECT_THROW(FeatureConfig::from_parts("maxprob,maxprob", Pooling::kMean, 4), InputError);
  EXPECT_THROW(FeatureConfig::from_parts("nonsense", Pooling::kMean, 4), InputError);
  EXPECT_THROW(FeatureConfig::from_parts("emb_original", Pooling::kMean, 0), InputError);
  EXPECT_EQ(FeatureConfig::from_parts("baseline17", Pooling::kMean, 4).parts,
            std::vector<FeaturePart>{FeaturePart::kKamath17});
}

TEST(FeatureConfigTest, CanonicalTextAndFingerprint) {
  const auto c = FeatureConfig::from_parts("kamath17,emb_original", Pooling::kMean, 768);
  EXPECT_EQ(c.canonical_text(), "parts=kamath17,emb_original;pooling=mean;hidden_dim=768");
  EXPECT_EQ(FeatureConfig::parse(c.canonical_text()), c);
  EXPECT_EQ(c.fingerprint().size(), 16u);
  const auto swapped = FeatureConfig::from_parts("emb_original,kamath17", Pooling::kMean, 768);
  EXPECT_NE(swapped.fingerprint(), c.fingerprint());
  const auto cls = FeatureConfig::from_parts("kamath17,emb_original", Pooling::kCls, 768);
  EXPECT_NE(cls.fingerprint(), c.fingerprint());
}

ExampleRecord full_record() {
  ExampleRecord r = make_record("a", {3.0, 2.0, 0.5}, {"x", "y", "z"}, {"x"}, 2);
  r.embeddings.original = Embedding::Tokens(2, 2, {1, 3, 3, 5});
  r.embeddings.question_bt = Embedding::Tokens(1, 2, {10, 20});
  r.embeddings.context_bt = Embedding::Pooled({-1, -2});
  r.embeddings.cls = std::vector<float>{0.5f, 0.25f};
  AuxSignals aux;
  aux.top5_softmax = {0.6, 0.3, 0.1, 0, 0};
  aux.dropout_mean_top5 = {0.5, 0.2, 0.1, 0.05, 0.01};
  aux.dropout_var_top5 = {0.01, 0.02, 0.03, 0.04, 0.05};
  aux.context_length = 120;
  aux.prediction_length = 3;
  r.aux = aux;
  return r;
}

TEST(BuildFeaturesTest, Kamath17Layout) {
  const ExampleRecord r = full_record();
  const auto c = FeatureConfig::from_parts("kamath17", Pooling::kMean, 2);
  const FeatureVector fv = build_features(r, 0, c);
  ASSERT_EQ(fv.values.size(), 17u);
  const double z = std::exp(3.0) + std::exp(2.0) + std::exp(0.5);
  EXPECT_NEAR(fv.values[0], std::exp(3.0) / z, 1e-12);
  EXPECT_NEAR(fv.values[1], std::exp(2.0) / z, 1e-12);
  EXPECT_NEAR(fv.values[2], std::exp(0.5) / z, 1e-12);
  // Fewer than five candidates: padded with zeros.
  EXPECT_EQ(fv.values[3], 0.0);
  EXPECT_EQ(fv.values[4], 0.0);
  EXPECT_EQ(fv.values[5], 0.5);
  EXPECT_EQ(fv.values[14], 0.05);
  EXPECT_EQ(fv.values[15], 120.0);
  EXPECT_EQ(fv.values[16], 3.0);
  EXPECT_EQ(fv.config_fingerprint, c.fingerprint());
  EXPECT_EQ(fv.example_id, "a");
}

TEST(BuildFeaturesTest, EmbeddingPartsInDeclaredOrder) {
  const ExampleRecord r = full_record();
  const auto c = FeatureConfig::from_parts("emb_context_bt,emb_original,emb_question_bt,emb_cls,maxprob",
                                           Pooling::kMean, 2);
  const auto v = build_features(r, 0, c).values;
  const double z = std::exp(3.0) + std::exp(2.0) + std::exp(0.5);
  const std::vector<double> expected = {-1, -2, 2, 4, 10, 20, 0.5, 0.25, std::exp(3.0) / z};
  ASSERT_EQ(v.size(), expected.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], expected[i], 1e-12) << i;
}

TEST(BuildFeaturesTest, ClsPoolingTakesFirstTokenRow) {
  ExampleRecord r = full_record();
  const auto c = FeatureConfig::from_parts("emb_original", Pooling::kCls, 2);
  EXPECT_EQ(build_features(r, 0, c).values, (std::vector<double>{1, 3}));
  const auto bt = FeatureConfig::from_parts("emb_context_bt", Pooling::kCls, 2);
  EXPECT_THROW(build_features(r, 0, bt), MissingFeatureError);
}

TEST(BuildFeaturesTest, MaxProbInvariantToCandidateOrder) {
  ExampleRecord r = full_record();
  const auto c = FeatureConfig::from_parts("maxprob", Pooling::kMean, 2);
  const double before = build_features(r, 0, c).values[0];
  std::reverse(r.candidates.begin(), r.candidates.end());
  EXPECT_DOUBLE_EQ(build_features(r, 0, c).values[0], before);
}

TEST(BuildFeaturesTest, MissingSourcesNamePartAndRecord) {
  ExampleRecord r = make_record("rec-9", {1.0}, {"x"}, {"x"}, 2);
  for (const char* part : {"kamath17", "emb_question_bt", "emb_context_bt", "emb_cls",
                           "likelihood", "norm_scores", "unnorm_scores", "span_embedding"}) {
    const auto c = FeatureConfig::from_parts(part, Pooling::kMean, 2);
    try {
      build_features(r, 0, c);
      ADD_FAILURE() << part;
    } catch (const MissingFeatureError& e) {
      EXPECT_NE(std::string(e.what()).find("rec-9"), std::string::npos);
      EXPECT_NE(std::string(e.what()).find(part), std::string::npos) << e.what();
    }
  }
}

TEST(BuildFeaturesTest, HiddenDimMismatchIsCompatibilityError) {
  const ExampleRecord r = full_record();
  const auto c = FeatureConfig::from_parts("emb_original", Pooling::kMean, 3);
  EXPECT_THROW(build_features(r, 0, c), CompatibilityError);
}

ExampleRecord extractive(std::vector<double> scores, std::vector<std::int64_t> passages,
                         std::vector<double> passage_scores) {
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < scores.size(); ++i) texts.push_back("t" + std::to_string(i));
  ExampleRecord r = make_record("e", scores, texts, {"t0"}, 2);
  r.task_kind = TaskKind::kOpenExtractive;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    r.candidates[i].passage_id = passages[i];
    r.candidates[i].passage_score = passage_scores[i];
  }
  return r;
}

TEST(NormScoresTest, SingletonIsOne) {
  const ExampleRecord r = extractive({1.5}, {4}, {0.3});
  const auto c = FeatureConfig::from_parts("norm_scores", Pooling::kMean, 2);
  EXPECT_EQ(build_features(r, 0, c).values, (std::vector<double>{1.0, 1.0}));
}

TEST(NormScoresTest, MatchesDirectComputation) {
  const ExampleRecord r = extractive({3.0, 2.0, 1.0, 0.0}, {1, 2, 1, 2}, {0.5, -0.5, 0.5, -0.5});
  const auto v = normalized_scores(r);
  const double pz = std::exp(0.5) + std::exp(-0.5);
  EXPECT_NEAR(v[0][0], std::exp(0.5) / pz, 1e-12);
  EXPECT_NEAR(v[1][0], std::exp(-0.5) / pz, 1e-12);
  EXPECT_NEAR(v[0][1], std::exp(3.0) / (std::exp(3.0) + std::exp(1.0)), 1e-12);
  EXPECT_NEAR(v[3][1], std::exp(0.0) / (std::exp(2.0) + std::exp(0.0)), 1e-12);
  const auto u = build_features(r, 2, FeatureConfig::from_parts("unnorm_scores", Pooling::kMean, 2));
  EXPECT_EQ(u.values, (std::vector<double>{0.5, 1.0}));
}

TEST(NormScoresTest, SpanNormalizationUsesTopTenPerPassage) {
  std::vector<double> scores;
  for (int i = 0; i < 12; ++i) scores.push_back(12.0 - i);
  const ExampleRecord r = extractive(scores, std::vector<std::int64_t>(12, 0),
                                     std::vector<double>(12, 0.0));
  const auto v = normalized_scores(r);
  double z = 0.0;
  for (int i = 0; i < 10; ++i) z += std::exp(scores[static_cast<std::size_t>(i)]);
  EXPECT_NEAR(v[0][1], std::exp(12.0) / z, 1e-12);
  EXPECT_NEAR(v[11][1], std::exp(1.0) / z, 1e-12);
}

TEST(BuildFeaturesTest, LikelihoodIsExpLogLikelihood) {
  SynthSpec spec;
  spec.n_examples = 3;
  spec.m = 4;
  spec.task_kind = TaskKind::kOpenGenerative;
  const auto records = generate(spec);
  const auto c = FeatureConfig::from_parts("likelihood,max_score", Pooling::kMean, 4);
  for (const auto& r : records) {
    const auto v = build_features(r, 1, c).values;
    EXPECT_DOUBLE_EQ(v[0], std::exp(*r.candidates[1].log_likelihood));
    EXPECT_DOUBLE_EQ(v[1], r.candidates[0].model_score);
  }
}

TEST(FeatureMatrixTest, RowsAndLabels) {
  std::vector<ExampleRecord> rs = {make_record("a", {2, 1}, {"x", "y"}, {"x"}),
                                   make_record("b", {2, 1}, {"q", "x"}, {"x"}),
                                   make_record("c", {2, 1}, {"x", "x"}, {"x"})};
  const auto c = FeatureConfig::from_parts("maxprob", Pooling::kMean, 4);
  const auto one = feature_matrix(rs, c, false);
  EXPECT_EQ(one.size(), 3u);
  EXPECT_EQ(one.values.rows(), 3);
  EXPECT_EQ(one.labels, (std::vector<int>{1, 0, 1}));
  const auto all = feature_matrix(rs, c, true);
  EXPECT_EQ(all.size(), 6u);
  EXPECT_EQ(all.labels, (std::vector<int>{1, 0, 0, 1, 1, 1}));
  EXPECT_EQ(all.rows[3].record_index, 1u);
  EXPECT_EQ(all.rows[3].candidate_index, 1u);
  EXPECT_EQ(all.fingerprint, c.fingerprint());
}

TEST(FeatureMatrixTest, MissingLabelsListIds) {
  std::vector<ExampleRecord> rs = {make_record("a", {2}, {"x"}, {"x"}),
                                   make_record("b", {2}, {"x"}, {"x"})};
  rs[1].candidates[0].is_correct.reset();
  const auto c = FeatureConfig::from_parts("maxprob", Pooling::kMean, 4);
  try {
    feature_matrix(rs, c, false);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
  }
  EXPECT_TRUE(feature_matrix(rs, c, false, LabelPolicy::kIgnore).labels.empty());
}

}  // namespace
}  // namespace calibqa
