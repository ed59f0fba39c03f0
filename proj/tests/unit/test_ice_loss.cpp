#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ice/error.hpp"
#include "ice/ice_loss.hpp"
#include "ice/rng.hpp"
#include "oracles.hpp"

namespace ice {
namespace {

constexpr double kE = std::numbers::e;

EmbeddingBatch make_batch(std::vector<double> rows, std::size_t dim, std::vector<Label> labels) {
  const std::size_t n = labels.size();
  return EmbeddingBatch(Mat64(n, dim, std::move(rows)), std::move(labels));
}

// Two classes of two: rows 0,1 at e1 and rows 2,3 at e2.
EmbeddingBatch separated_two_by_two() {
  return make_batch({1, 0, 1, 0, 0, 1, 0, 1}, 2, {0, 0, 1, 1});
}

SimilarityMatrix sim_from(std::size_t n, std::vector<double> values) {
  return SimilarityMatrix(Mat64(n, n, std::move(values)));
}

// ---- EmbeddingBatch / SimilarityMatrix -------------------------------------

TEST(EmbeddingBatch, ValidatesInvariants) {
  EXPECT_THROW(make_batch({3, 4, 1, 0}, 2, {0, 0}), InvalidArgument);         // not unit
  EXPECT_THROW(make_batch({1, 0, 0, 1, 1, 0}, 2, {0, 0, 1}), InvalidArgument);  // singleton
  EXPECT_THROW(make_batch({1, 0, 0, 1}, 2, {0}), InvalidArgument);             // count
  EXPECT_THROW(make_batch({1, 0, 0, 1}, 2, {-1, -1}), InvalidArgument);        // negative label

  const EmbeddingBatch b = make_batch({1, 0, 0, 1, 1, 0, 0, 1, 1, 0}, 2, {7, 3, 7, 3, 3});
  ASSERT_EQ(b.num_classes(), 2u);
  EXPECT_EQ(b.class_index()[0].label, 3);
  EXPECT_EQ(b.class_index()[0].rows, (std::vector<std::size_t>{1, 3, 4}));
  EXPECT_EQ(b.class_index()[1].rows, (std::vector<std::size_t>{0, 2}));
}

TEST(SimilarityMatrix, Examples) {
  const auto same = similarity_matrix(make_batch({1, 0, 1, 0}, 2, {0, 0}));
  EXPECT_EQ(same.values(), Mat64(2, 2, std::vector<double>{1, 1, 1, 1}));

  const auto orth = similarity_matrix(make_batch({1, 0, 0, 1}, 2, {0, 0}));
  EXPECT_EQ(orth.values(), Mat64(2, 2, std::vector<double>{1, 0, 0, 1}));

  const auto mixed = similarity_matrix(make_batch({0.6, 0.8, 0.8, 0.6}, 2, {0, 0}));
  EXPECT_NEAR(mixed(0, 1), 0.96, 1e-15);
  EXPECT_EQ(mixed(0, 1), mixed(1, 0));
}

TEST(SimilarityMatrix, RejectsInvalidTables) {
  EXPECT_THROW(sim_from(2, {1, 0.5, 0.4, 1}), InvalidArgument);  // asymmetric
  EXPECT_THROW(sim_from(2, {0.9, 0, 0, 1}), InvalidArgument);    // diagonal
  EXPECT_THROW(sim_from(2, {1, 1.1, 1.1, 1}), InvalidArgument);  // range
}

// ---- matching probabilities ------------------------------------------------

TEST(MatchProb, SymmetricCaseIsOneHalf) {
  const std::vector<Label> labels{0, 0, 1};
  for (double sigma : {-0.4, 0.0, 0.7}) {
    const auto sim = sim_from(3, {1, sigma, sigma, sigma, 1, 0.2, sigma, 0.2, 1});
    for (double s : {1.0, 16.0, 64.0}) {
      EXPECT_NEAR(match_prob_pos(sim, labels, 0, 1, s), 0.5, 1e-15);
      EXPECT_NEAR(match_prob_neg(sim, labels, 0, 1, 2, s), 0.5, 1e-15);
    }
  }
}

TEST(MatchProb, OnePositiveTwoNegativesAtZero) {
  const auto batch = separated_two_by_two();
  const auto sim = similarity_matrix(batch);
  EXPECT_NEAR(match_prob_pos(sim, batch.labels(), 0, 1, 1.0), kE / (kE + 2), 1e-15);
  EXPECT_NEAR(match_prob_pos(sim, batch.labels(), 0, 1, 1.0), 0.576117, 1e-6);
  EXPECT_NEAR(match_prob_neg(sim, batch.labels(), 0, 1, 2, 1.0), 1 / (kE + 2), 1e-15);
  EXPECT_NEAR(match_prob_neg(sim, batch.labels(), 0, 1, 3, 1.0), 0.211942, 1e-6);
  EXPECT_GE(match_prob_pos(sim, batch.labels(), 0, 1, 64.0), 1.0 - 1e-12);
}

TEST(MatchProb, OtherPositivesStayOutOfTheDenominator) {
  // Anchor 0 has positives 1 and 2; only the queried one competes.
  Rng rng(3);
  const auto ob = oracle::random_unit_batch(rng, 2, 3, 4);
  const EmbeddingBatch batch(ob.rows, ob.labels);
  const auto sim = similarity_matrix(batch);
  for (std::size_t i : {1u, 2u}) {
    EXPECT_NEAR(match_prob_pos(sim, batch.labels(), 0, i, 4.0),
                oracle::naive_prob_pos(ob.rows, ob.labels, 0, i, 4.0), 1e-14);
  }
}

TEST(MatchProb, Errors) {
  const auto batch = separated_two_by_two();
  const auto sim = similarity_matrix(batch);
  EXPECT_THROW(match_prob_pos(sim, batch.labels(), 0, 2, 1.0), InvalidArgument);  // not a positive
  EXPECT_THROW(match_prob_pos(sim, batch.labels(), 0, 0, 1.0), InvalidArgument);  // self
  EXPECT_THROW(match_prob_pos(sim, batch.labels(), 0, 1, 0.5), InvalidArgument);  // s < 1
  EXPECT_THROW(match_prob_neg(sim, batch.labels(), 0, 1, 1, 1.0), InvalidArgument);
  const std::vector<Label> one_class{0, 0, 0, 0};
  EXPECT_THROW(match_prob_pos(sim, one_class, 0, 1, 1.0), InvalidArgument);  // no negatives
}

TEST(MatchProb, ProbabilitiesNormalizeOnRandomBatches) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ob = oracle::random_unit_batch(rng, 2 + rng.uniform_index(3), 2 + rng.uniform_index(3),
                                              2 + rng.uniform_index(6));
    const EmbeddingBatch batch(ob.rows, ob.labels);
    const auto sim = similarity_matrix(batch);
    const double s = 1.0 + 63.0 * rng.uniform01();
    for (std::size_t a = 0; a < batch.size(); ++a) {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (i == a || ob.labels[i] != ob.labels[a]) continue;
        double total = match_prob_pos(sim, batch.labels(), a, i, s);
        for (std::size_t j = 0; j < batch.size(); ++j) {
          if (ob.labels[j] == ob.labels[a]) continue;
          const double p = match_prob_neg(sim, batch.labels(), a, i, j, s);
          EXPECT_GT(p, 0.0);
          EXPECT_LE(p, 1.0);
          total += p;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
    }
  }
}

// ---- loss --------------------------------------------------------------------

TEST(IceLoss, SeparatedTwoByTwo) {
  const auto batch = separated_two_by_two();
  EXPECT_NEAR(ice_loss(batch, 1.0), -4.0 * std::log(kE / (kE + 2)), 1e-14);
  EXPECT_NEAR(ice_loss(batch, 1.0), 2.205780, 5e-6);  // 4 x 0.551445, rounded
  EXPECT_LE(ice_loss(batch, 64.0), 1e-10);
  EXPECT_GT(ice_loss(batch, 64.0), 0.0);
}

TEST(IceLoss, UniformSimilaritiesGiveLogOnePlusM) {
  // Regular simplex: all off-diagonal similarities equal -1/(n-1).
  for (const auto& [classes, per_class] : {std::pair{2u, 2u}, {3u, 2u}, {2u, 3u}}) {
    const std::size_t n = classes * per_class;
    Mat64 rows(n, n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t t = 0; t < n; ++t) rows(r, t) = (r == t ? 1.0 : 0.0) - 1.0 / static_cast<double>(n);
      const double norm = std::sqrt(oracle::naive_dot(rows, r, r));
      for (std::size_t t = 0; t < n; ++t) rows(r, t) /= norm;
    }
    std::vector<Label> labels;
    for (std::size_t r = 0; r < n; ++r) labels.push_back(static_cast<Label>(r / per_class));
    const EmbeddingBatch batch(rows, labels);
    const double negatives = static_cast<double>(n - per_class);
    const double pairs = static_cast<double>(n * (per_class - 1));
    for (double s : {1.0, 16.0}) {
      EXPECT_NEAR(ice_loss(batch, s), pairs * std::log(1.0 + negatives), 1e-12);
    }
  }
}

TEST(IceLoss, MatchesNaiveOracleOnRandomBatches) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto ob = oracle::random_unit_batch(rng, 2 + rng.uniform_index(3), 2 + rng.uniform_index(3),
                                              2 + rng.uniform_index(6));
    const EmbeddingBatch batch(ob.rows, ob.labels);
    for (double s : {1.0, 8.0, 32.0}) {
      const double expected = oracle::naive_ice_loss(ob.rows, ob.labels, s);
      EXPECT_NEAR(ice_loss(batch, s), expected, 1e-11 * std::max(1.0, expected));
      EXPECT_EQ(unchecked::ice_loss(ob.rows, ob.labels, s), ice_loss(batch, s));
      EXPECT_EQ(ice_loss_and_gradients(batch, s, GradMode::exact).loss, ice_loss(batch, s));
    }
  }
}

TEST(IceLoss, StableAtLargeScale) {
  const auto batch = make_batch({1, 0, 1, 0, -1, 0, -1, 0}, 2, {0, 0, 1, 1});
  const double loss = ice_loss(batch, 80.0);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_GE(loss, 0.0);
  const auto flipped = make_batch({1, 0, -1, 0, 1, 0, -1, 0}, 2, {0, 0, 1, 1});
  // each positive at -1, one negative at +1 and one at -1: -log p = log(e^160 + 2)
  EXPECT_NEAR(ice_loss(flipped, 80.0), 4.0 * 160.0, 1e-9);
  const auto g = ice_gradients_exact(flipped, 80.0);
  EXPECT_TRUE(g.grads.all_finite());
}

TEST(IceLoss, RejectsSmallScale) {
  EXPECT_THROW(ice_loss(separated_two_by_two(), 0.99), InvalidArgument);
  EXPECT_THROW(ice_loss(separated_two_by_two(), NAN), InvalidArgument);
}

// ---- weights -----------------------------------------------------------------

TEST(Weights, SymmetricOnePositiveOneNegative) {
  const auto sim = sim_from(3, {1, 0.3, 0.3, 0.3, 1, -0.2, 0.3, -0.2, 1});
  const std::vector<Label> labels{0, 0, 1};
  const IceWeights w = raw_weights(sim, labels);
  EXPECT_EQ(w.stage, WeightStage::raw);
  EXPECT_NEAR(w.pos(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(w.neg(0, 2), 0.5, 1e-15);
  EXPECT_EQ(w.pos(0, 2), 0.0);
  EXPECT_EQ(w.neg(0, 1), 0.0);
}

TEST(Weights, SeparatedTwoByTwoRawPositiveWeight) {
  const auto batch = separated_two_by_two();
  const IceWeights w = raw_weights(similarity_matrix(batch), batch.labels());
  for (auto [a, i] : {std::pair{0, 1}, {1, 0}, {2, 3}, {3, 2}}) {
    EXPECT_NEAR(w.pos(a, i), 2.0 / (kE + 2), 1e-15);
    EXPECT_NEAR(w.pos(a, i), 0.423883, 1e-6);
  }
}

TEST(Weights, MatchNaiveOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ob = oracle::random_unit_batch(rng, 2 + rng.uniform_index(3), 2 + rng.uniform_index(3),
                                              2 + rng.uniform_index(6));
    const EmbeddingBatch batch(ob.rows, ob.labels);
    const double s = 1.0 + 31.0 * rng.uniform01();
    const IceWeights w = scaled_weights(similarity_matrix(batch), batch.labels(), s);
    const auto ref = oracle::naive_scaled_weights(ob.rows, ob.labels, s);
    for (std::size_t k = 0; k < w.pos.size(); ++k) {
      EXPECT_NEAR(w.pos.values()[k], ref.pos.values()[k], 1e-12);
      EXPECT_NEAR(w.neg.values()[k], ref.neg.values()[k], 1e-12);
    }
  }
}

TEST(Weights, ScaledAtOneEqualsRaw) {
  Rng rng(8);
  const auto ob = oracle::random_unit_batch(rng, 3, 3, 5);
  const EmbeddingBatch batch(ob.rows, ob.labels);
  const auto sim = similarity_matrix(batch);
  const IceWeights raw = raw_weights(sim, batch.labels());
  const IceWeights scaled = scaled_weights(sim, batch.labels(), 1.0);
  EXPECT_EQ(raw.pos, scaled.pos);
  EXPECT_EQ(raw.neg, scaled.neg);
  EXPECT_EQ(scaled.stage, WeightStage::scaled);
}

TEST(Weights, NegativeRatioGrowsWithScale) {
  // anchor 0, positive 1, negatives 2 (sim 0.9) and 3 (sim 0.1)
  const auto sim = sim_from(4, {1, 0.5, 0.9, 0.1,  //
                                0.5, 1, 0.2, 0.2,  //
                                0.9, 0.2, 1, 0.2,  //
                                0.1, 0.2, 0.2, 1});
  const std::vector<Label> labels{0, 0, 1, 1};
  const IceWeights w = scaled_weights(sim, labels, 16.0);
  const double ratio = w.neg(0, 2) / w.neg(0, 3);
  EXPECT_NEAR(ratio / std::exp(0.8 * 16.0), 1.0, 1e-9);
  EXPECT_NEAR(ratio, 362217.45, 0.01);
}

TEST(Weights, EqualSimilaritiesGiveEqualPositiveWeights) {
  const auto sim = sim_from(4, {1, 0.3, 0.3, 0.3, 0.3, 1, 0.3, 0.3, 0.3, 0.3, 1, 0.3, 0.3, 0.3, 0.3, 1});
  const std::vector<Label> labels{0, 0, 1, 1};
  const IceWeights w = scaled_weights(sim, labels, 16.0);
  EXPECT_EQ(w.pos(0, 1), w.pos(1, 0));
  EXPECT_EQ(w.pos(0, 1), w.pos(2, 3));
  EXPECT_EQ(w.pos(0, 1), w.pos(3, 2));
}

TEST(Weights, NormalizedTwoPerClassIsExactlyOneOverTwoN) {
  Rng rng(13);
  for (std::size_t classes : {2u, 3u, 5u}) {
    const auto ob = oracle::random_unit_batch(rng, classes, 2, 4);
    const EmbeddingBatch batch(ob.rows, ob.labels);
    const std::size_t n = batch.size();
    const IceWeights w =
        normalized_weights(scaled_weights(similarity_matrix(batch), batch.labels(), 16.0), n);
    EXPECT_EQ(w.stage, WeightStage::normalized);
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t i = a ^ 1u;  // partner in the pair
      EXPECT_EQ(w.pos(a, i), 1.0 / (2.0 * static_cast<double>(n)));
      const auto neg = w.neg.row(a);
      EXPECT_NEAR(std::accumulate(neg.begin(), neg.end(), 0.0), w.pos(a, i), 1e-12);
    }
  }
  const auto batch = separated_two_by_two();
  const IceWeights w4 = normalized_weights(scaled_weights(similarity_matrix(batch), batch.labels(), 1.0), 4);
  EXPECT_EQ(w4.pos(0, 1), 0.125);
}

TEST(Weights, NormalizationErrors) {
  const auto batch = separated_two_by_two();
  const auto sim = similarity_matrix(batch);
  EXPECT_THROW(normalized_weights(raw_weights(sim, batch.labels()), 4), InvalidArgument);
  IceWeights scaled = scaled_weights(sim, batch.labels(), 2.0);
  EXPECT_THROW(normalized_weights(scaled, 5), InvalidArgument);
  for (double& v : scaled.pos.row(2)) v = 0.0;
  EXPECT_THROW(normalized_weights(scaled, 4), DegenerateInput);
}

// ---- gradients ---------------------------------------------------------------

TEST(ExactGradient, MatchesFiniteDifferences) {
  Rng rng(17);
  for (int trial = 0; trial < 12; ++trial) {
    const auto ob = oracle::random_unit_batch(rng, 2 + rng.uniform_index(3), 2 + rng.uniform_index(3),
                                              2 + rng.uniform_index(7));
    const EmbeddingBatch batch(ob.rows, ob.labels);
    for (double s : {1.0, 8.0, 32.0}) {
      const Mat64 analytic = ice_gradients_exact(batch, s).grads;
      const Mat64 numeric = oracle::finite_difference(
          [&](const Mat64& m) { return oracle::naive_ice_loss(m, ob.labels, s); }, ob.rows, 1e-5);
      EXPECT_LE(oracle::max_relative_error(analytic, numeric), 1e-4) << "s=" << s;
    }
  }
}

TEST(ExactGradient, DecomposesIntoRawWeightTerms) {
  // At s = 1 each anchor pushes positive i by -(1 - p) f_a and negative j by
  // +sum_i p(j|a,i) f_a; the anchor row collects the mirrored terms.
  Rng rng(19);
  const auto ob = oracle::random_unit_batch(rng, 3, 3, 4);
  const EmbeddingBatch batch(ob.rows, ob.labels);
  const IceWeights w = raw_weights(similarity_matrix(batch), batch.labels());
  const Mat64 g = ice_gradients_exact(batch, 1.0).grads;
  const std::size_t n = batch.size();
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t t = 0; t < batch.dim(); ++t) {
      double expected = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        expected += (w.neg(a, k) - w.pos(a, k)) * ob.rows(a, t);
        expected += (w.neg(k, a) - w.pos(k, a)) * ob.rows(a, t);
      }
      EXPECT_NEAR(g(k, t), expected, 1e-13);
    }
  }
}

TEST(ExactGradient, UniformBatchHasEqualRowNorms) {
  const std::size_t n = 6;
  Mat64 rows(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t t = 0; t < n; ++t) rows(r, t) = (r == t ? 1.0 : 0.0) - 1.0 / 6.0;
    const double norm = std::sqrt(oracle::naive_dot(rows, r, r));
    for (std::size_t t = 0; t < n; ++t) rows(r, t) /= norm;
  }
  const EmbeddingBatch batch(rows, {0, 0, 1, 1, 2, 2});
  const Mat64 g = ice_gradients_exact(batch, 4.0).grads;
  const double first = l2_norm(g.row(0));
  for (std::size_t r = 1; r < n; ++r) EXPECT_NEAR(l2_norm(g.row(r)), first, 1e-12);
}

TEST(ReweightedGradient, PairContributionsHaveWeightMagnitudeAndAnchorDirection) {
  Rng rng(23);
  const auto ob = oracle::random_unit_batch(rng, 3, 3, 5);
  const EmbeddingBatch batch(ob.rows, ob.labels);
  const std::size_t n = batch.size();
  const IceWeights w =
      normalized_weights(scaled_weights(similarity_matrix(batch), batch.labels(), 16.0), n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t k = 0; k < n; ++k) {
      if (k == a) continue;
      const Vec64 c = reweighted_pair_contribution(batch, w, a, k);
      const bool positive = ob.labels[k] == ob.labels[a];
      const double weight = positive ? w.pos(a, k) : w.neg(a, k);
      EXPECT_NEAR(l2_norm(c), weight, 1e-15);
      const double cosine = dot(c, batch.embeddings().row(a)) / l2_norm(c);
      EXPECT_NEAR(cosine, positive ? -1.0 : 1.0, 1e-12);
    }
  }
}

TEST(ReweightedGradient, TwoPerClassPositiveMagnitude) {
  Rng rng(29);
  const auto ob = oracle::random_unit_batch(rng, 4, 2, 3);
  const EmbeddingBatch batch(ob.rows, ob.labels);
  const std::size_t n = batch.size();
  const IceWeights w =
      normalized_weights(scaled_weights(similarity_matrix(batch), batch.labels(), 32.0), n);
  for (std::size_t a = 0; a < n; ++a) {
    EXPECT_NEAR(l2_norm(reweighted_pair_contribution(batch, w, a, a ^ 1u)), 1.0 / (2.0 * n), 1e-15);
  }
}

TEST(ReweightedGradient, AggregatesPairContributionsInAnchorOrder) {
  Rng rng(31);
  const auto ob = oracle::random_unit_batch(rng, 3, 3, 4);
  const EmbeddingBatch batch(ob.rows, ob.labels);
  const std::size_t n = batch.size();
  const double s = 16.0;
  const IceWeights w =
      normalized_weights(scaled_weights(similarity_matrix(batch), batch.labels(), s), n);
  for (bool anchor_grad : {true, false}) {
    const Mat64 g = ice_gradients_reweighted(batch, s, {anchor_grad}).grads;
    Mat64 expected(n, batch.dim());
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t k = 0; k < n; ++k) {
        if (k == a) continue;
        const Vec64 c = reweighted_pair_contribution(batch, w, a, k);
        const double coeff = w.neg(a, k) - w.pos(a, k);
        for (std::size_t t = 0; t < batch.dim(); ++t) {
          expected(k, t) += c[t];
          if (anchor_grad) expected(a, t) += coeff * ob.rows(k, t);
        }
      }
    }
    for (std::size_t x = 0; x < g.size(); ++x) EXPECT_NEAR(g.values()[x], expected.values()[x], 1e-15);
    EXPECT_EQ(ice_gradients_reweighted(batch, s, {anchor_grad}).mode, GradMode::reweighted);
  }
}

// ---- properties --------------------------------------------------------------

class IceProperties : public ::testing::Test {
 protected:
  Rng rng{97};
  oracle::Batch random_batch() {
    return oracle::random_unit_batch(rng, 2 + rng.uniform_index(4), 2 + rng.uniform_index(3),
                                     2 + rng.uniform_index(7));
  }
};

TEST_F(IceProperties, RelativeWeightLawAndMonotonicity) {
  for (int trial = 0; trial < 30; ++trial) {
    const auto ob = random_batch();
    const EmbeddingBatch batch(ob.rows, ob.labels);
    const auto sim = similarity_matrix(batch);
    const std::size_t a = rng.uniform_index(batch.size());
    std::vector<std::size_t> negs;
    for (std::size_t j = 0; j < batch.size(); ++j) {
      if (ob.labels[j] != ob.labels[a]) negs.push_back(j);
    }
    const std::size_t j = negs[0], k = negs[1];
    double previous = 0.0;
    for (double s : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
      const IceWeights w = scaled_weights(sim, batch.labels(), s);
      const double ratio = w.neg(a, j) / w.neg(a, k);
      EXPECT_NEAR(ratio / std::exp(s * (sim(a, j) - sim(a, k))), 1.0, 1e-9);
      const double hi_over_lo = sim(a, j) > sim(a, k) ? ratio : 1.0 / ratio;
      if (s > 1.0) EXPECT_GT(hi_over_lo, previous);
      previous = hi_over_lo;
      if (s == 1.0) EXPECT_LE(hi_over_lo, std::exp(2.0) * (1 + 1e-12));
    }
  }
}

TEST_F(IceProperties, HardnessOrdering) {
  for (int trial = 0; trial < 30; ++trial) {
    const auto ob = random_batch();
    const EmbeddingBatch batch(ob.rows, ob.labels);
    const auto sim = similarity_matrix(batch);
    const IceWeights w = raw_weights(sim, batch.labels());
    for (std::size_t a = 0; a < batch.size(); ++a) {
      for (std::size_t x = 0; x < batch.size(); ++x) {
        for (std::size_t y = 0; y < batch.size(); ++y) {
          if (x == a || y == a || sim(a, x) >= sim(a, y)) continue;
          const bool x_pos = ob.labels[x] == ob.labels[a];
          const bool y_pos = ob.labels[y] == ob.labels[a];
          if (x_pos && y_pos) EXPECT_GT(w.pos(a, x), w.pos(a, y));   // harder positive
          if (!x_pos && !y_pos) EXPECT_LT(w.neg(a, x), w.neg(a, y)); // harder negative
        }
      }
    }
  }
}

TEST_F(IceProperties, NormalizationIdentities) {
  for (int trial = 0; trial < 30; ++trial) {
    const auto ob = random_batch();
    const EmbeddingBatch batch(ob.rows, ob.labels);
    const std::size_t n = batch.size();
    const double s = 1.0 + 79.0 * rng.uniform01();
    const IceWeights w = normalized_weights(scaled_weights(similarity_matrix(batch), batch.labels(), s), n);
    double total = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      const auto p = w.pos.row(a);
      const auto q = w.neg.row(a);
      const double ps = std::accumulate(p.begin(), p.end(), 0.0);
      const double qs = std::accumulate(q.begin(), q.end(), 0.0);
      EXPECT_NEAR(ps, 1.0 / (2.0 * n), 1e-12);
      EXPECT_NEAR(qs, 1.0 / (2.0 * n), 1e-12);
      total += ps + qs;
      for (double v : p) EXPECT_GE(v, 0.0);
      for (double v : q) EXPECT_GE(v, 0.0);
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
  }
}

TEST_F(IceProperties, PermutationEquivariance) {
  for (int trial = 0; trial < 20; ++trial) {
    const auto ob = random_batch();
    const std::size_t n = ob.labels.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    for (std::size_t k = n - 1; k > 0; --k) std::swap(perm[k], perm[rng.uniform_index(k + 1)]);
    Mat64 rows(n, ob.rows.cols());
    std::vector<Label> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t t = 0; t < rows.cols(); ++t) rows(r, t) = ob.rows(perm[r], t);
      labels[r] = ob.labels[perm[r]];
    }
    const EmbeddingBatch original(ob.rows, ob.labels);
    const EmbeddingBatch permuted(rows, labels);
    for (GradMode mode : {GradMode::exact, GradMode::reweighted}) {
      const auto a = ice_loss_and_gradients(original, 16.0, mode);
      const auto b = ice_loss_and_gradients(permuted, 16.0, mode);
      EXPECT_NEAR(a.loss, b.loss, 1e-11 * a.loss);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t t = 0; t < rows.cols(); ++t) {
          EXPECT_NEAR(b.gradients.grads(r, t), a.gradients.grads(perm[r], t), 1e-12);
        }
      }
    }
  }
}

TEST_F(IceProperties, DeterministicAcrossRepeatedCalls) {
  const auto ob = random_batch();
  const EmbeddingBatch batch(ob.rows, ob.labels);
  const auto first = ice_loss_and_gradients(batch, 16.0, GradMode::reweighted);
  for (int k = 0; k < 5; ++k) {
    const auto again = ice_loss_and_gradients(batch, 16.0, GradMode::reweighted);
    EXPECT_EQ(again.loss, first.loss);
    EXPECT_EQ(again.gradients.grads, first.gradients.grads);
  }
}

}  // namespace
}  // namespace ice
