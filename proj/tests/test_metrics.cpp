#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ssc/error.hpp"
#include "ssc/metrics.hpp"

namespace ssc {
namespace {

// O(n^2) rank definition: 1 + (#strictly smaller) + (#equal others) / 2.
std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++less;
      if (j != i && v[j] == v[i]) ++equal;
    }
    r[i] = 1.0 + less + equal / 2.0;
  }
  return r;
}

// Spearman via the brute-force ranks and a textbook two-pass Pearson.
double brute_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = brute_ranks(a), rb = brute_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i] / n;
    mb += rb[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

TEST(Spearman, WorkedExample) {
  // ranks [1..5] vs [2,1,4,3,5]: d^2 sum = 4, rho = 1 - 6*4/(5*24) = 0.8
  const auto rho = spearman(Tensor::vector({1, 2, 3, 4, 5}), Tensor::vector({5, 6, 7, 8, 7.5}),
                            Preprocessing::Signed);
  ASSERT_TRUE(rho);
  EXPECT_NEAR(*rho, brute_spearman({1, 2, 3, 4, 5}, {5, 6, 7, 8, 7.5}), 1e-12);
  const auto rho2 = spearman(Tensor::vector({1, 2, 3, 4, 5}), Tensor::vector({2, 1, 4, 3, 5}),
                             Preprocessing::Signed);
  EXPECT_NEAR(*rho2, 0.8, 1e-12);
}

TEST(Spearman, TiesUseAverageRanks) {
  EXPECT_EQ(average_ranks(std::vector<double>{1, 1, 2}), (std::vector<double>{1.5, 1.5, 3}));
  const auto rho = spearman(Tensor::vector({1, 1, 2}), Tensor::vector({1, 2, 2}),
                            Preprocessing::Signed);
  ASSERT_TRUE(rho);
  EXPECT_NEAR(*rho, 0.5, 1e-12);
}

TEST(Spearman, MatchesBruteForceOnRandomPairs) {
  std::mt19937_64 gen(42);
  std::uniform_int_distribution<int> len(2, 60);
  std::uniform_int_distribution<int> small(-3, 3);  // forces ties
  std::normal_distribution<double> normal;
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(len(gen));
    std::vector<double> a(n), b(n);
    const bool tied = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = tied ? small(gen) : normal(gen);
      b[i] = tied ? small(gen) : normal(gen);
    }
    const auto rho = spearman(Tensor::vector(a), Tensor::vector(b), Preprocessing::Signed);
    const auto ra = brute_ranks(a), rb = brute_ranks(b);
    const bool constant = std::all_of(ra.begin(), ra.end(), [&](double r) { return r == ra[0]; }) ||
                          std::all_of(rb.begin(), rb.end(), [&](double r) { return r == rb[0]; });
    if (constant) {
      EXPECT_FALSE(rho);
      continue;
    }
    ASSERT_TRUE(rho);
    EXPECT_NEAR(*rho, brute_spearman(a, b), 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 900);
}

TEST(Spearman, SymmetricAndBounded) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) {
      a[i] = normal(gen);
      b[i] = a[i] * 0.3 + normal(gen);
    }
    for (auto pre : {Preprocessing::Absolute, Preprocessing::Signed}) {
      const auto ab = spearman(Tensor::vector(a), Tensor::vector(b), pre);
      const auto ba = spearman(Tensor::vector(b), Tensor::vector(a), pre);
      ASSERT_TRUE(ab && ba);
      EXPECT_EQ(*ab, *ba);
      EXPECT_GE(*ab, -1.0);
      EXPECT_LE(*ab, 1.0);
    }
  }
}

TEST(Spearman, InvariantUnderMonotoneMaps) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal;
  std::vector<double> a(50), b(50), ea(50), fb(50);
  for (std::size_t i = 0; i < 50; ++i) {
    a[i] = normal(gen);
    b[i] = normal(gen) + a[i];
    ea[i] = std::exp(a[i]);
    fb[i] = 3.0 * b[i] + 2.0;
  }
  const auto base = spearman(Tensor::vector(a), Tensor::vector(b), Preprocessing::Signed);
  const auto moved = spearman(Tensor::vector(ea), Tensor::vector(fb), Preprocessing::Signed);
  EXPECT_NEAR(*base, *moved, 1e-12);
  EXPECT_NEAR(*spearman(Tensor::vector(a), Tensor::vector(ea), Preprocessing::Signed), 1.0, 1e-12);
}

TEST(Spearman, AbsoluteIgnoresSign) {
  const Tensor a = Tensor::vector({-3, 1, 2, -0.5});
  const Tensor b = Tensor::vector({3, 1, 2, 0.5});
  EXPECT_NEAR(*spearman(a, b, Preprocessing::Absolute), 1.0, 1e-12);
  EXPECT_LT(*spearman(a, b, Preprocessing::Signed), 1.0);
  EXPECT_NEAR(*spearman(a, scale(a, -1.0), Preprocessing::Absolute), 1.0, 1e-12);
  EXPECT_NEAR(*spearman(a, scale(a, -1.0), Preprocessing::Signed), -1.0, 1e-12);
}

TEST(Spearman, DegenerateAndInvalid) {
  EXPECT_FALSE(spearman(Tensor::vector({2, 2, 2}), Tensor::vector({1, 2, 3})));
  EXPECT_FALSE(spearman(Tensor({2, 2}), Tensor({2, 2})));
  // |.| collapses the sign, so this is constant only under Absolute.
  EXPECT_FALSE(spearman(Tensor::vector({-1, 1, 1}), Tensor::vector({1, 2, 3}), Preprocessing::Absolute));
  EXPECT_TRUE(spearman(Tensor::vector({-1, 1, 1}), Tensor::vector({1, 2, 3}), Preprocessing::Signed));
  EXPECT_THROW(spearman(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), Error);
  EXPECT_THROW(spearman(Tensor::vector({1}), Tensor::vector({1})), Error);
}

TEST(Spearman, ShapesAreFlattened) {
  const Tensor a({2, 3}, std::vector<double>{1, 5, 2, 6, 3, 4});
  const Tensor b = Tensor::vector({1, 5, 2, 6, 3, 4});
  EXPECT_NEAR(*spearman(a, a), 1.0, 1e-12);
  EXPECT_EQ(*spearman(a, scale(a, 2.0), Preprocessing::Signed),
            *spearman(a.reshaped({6}), b, Preprocessing::Signed));
  EXPECT_THROW(spearman(a, b), Error);
}

CorrelationRecord rec(const std::string& method, int stage, std::size_t image, std::optional<double> rho) {
  return {method, "cascading", stage, stage < 0 ? "original" : "layer", image, Preprocessing::Absolute, rho};
}

TEST(Summarize, MeanAndPopulationStd) {
  const auto out = summarize({rec("gradient", 0, 0, 0.2), rec("gradient", 0, 1, 0.4),
                              rec("gradient", 0, 2, std::nullopt), rec("gbp", 0, 0, 1.0)});
  ASSERT_EQ(out.summaries.size(), 2u);
  const auto& g = out.summaries[0];
  EXPECT_EQ(g.method, "gradient");
  EXPECT_NEAR(g.mean_rho, 0.3, 1e-15);
  EXPECT_NEAR(g.std_rho, 0.1, 1e-15);
  EXPECT_EQ(g.n_images, 2u);
  EXPECT_EQ(g.n_degenerate, 1u);
  EXPECT_EQ(out.summaries[1].method, "gbp");
  EXPECT_EQ(out.summaries[1].std_rho, 0.0);
  EXPECT_EQ(out.degenerate_count, 1u);
  EXPECT_TRUE(out.empty_groups.empty());
}

TEST(Summarize, AllDegenerateGroupIsReported) {
  const auto out = summarize({rec("vargrad", 2, 0, std::nullopt), rec("vargrad", 2, 1, std::nullopt),
                              rec("gradient", 2, 0, 0.5)});
  ASSERT_EQ(out.summaries.size(), 1u);
  ASSERT_EQ(out.empty_groups.size(), 1u);
  EXPECT_NE(out.empty_groups[0].find("vargrad"), std::string::npos);
  EXPECT_EQ(out.degenerate_count, 2u);
}

TEST(Summarize, GroupsBySeparateKeys) {
  auto a = rec("gradient", 0, 0, 0.1);
  auto b = a;
  b.preprocessing = Preprocessing::Signed;
  auto c = a;
  c.mode = "independent";
  auto d = a;
  d.stage_index = 1;
  EXPECT_EQ(summarize({a, b, c, d}).summaries.size(), 4u);
}

TEST(Preprocessing, Names) {
  EXPECT_EQ(parse_preprocessing("absolute"), Preprocessing::Absolute);
  EXPECT_EQ(parse_preprocessing(to_string(Preprocessing::Signed)), Preprocessing::Signed);
  EXPECT_THROW(parse_preprocessing("square"), Error);
}

}  // namespace
}  // namespace ssc
