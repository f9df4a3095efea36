#include <catch2/catch_amalgamated.hpp>

#include "lwgait/analysis.hpp"

using namespace lwgait;

namespace {

FeatureStack stack_of(std::vector<Tensor> layers) {
  FeatureStack s;
  for (auto& l : layers) {
    s.layer_meta.push_back({l.dim(1), l.dim(2), l.dim(3)});
    s.layers.push_back(std::move(l));
  }
  return s;
}

Tensor random_layer(int64_t t, int64_t c, int64_t h, int64_t w, uint64_t seed) {
  Rng rng(seed);
  Tensor m({t, c, h, w});
  for (int64_t i = 0; i < m.size(); ++i) m[i] = static_cast<float>(rng.normal());
  return m;
}

SimilarityMatrix manual_matrix(int n, const std::function<double(int, int)>& fn) {
  SimilarityMatrix sim;
  sim.n = n;
  sim.values.assign(static_cast<size_t>(n * n), 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) sim.values[static_cast<size_t>(a * n + b)] = fn(a, b);
  return sim;
}

// exhaustive contiguous-partition search: smallest group count whose parts
// all satisfy the min-pairwise-similarity constraint
int oracle_min_groups(const SimilarityMatrix& sim, double tau) {
  const int n = sim.n;
  int best = n;
  for (uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    int groups = 1, start = 0;
    bool ok = true;
    auto check_group = [&](int lo, int hi) {
      for (int a = lo; a <= hi && ok; ++a)
        for (int b = a + 1; b <= hi && ok; ++b)
          if (!(sim.at(a, b) >= tau)) ok = false;
    };
    int lo = 0;
    for (int i = 0; i < n - 1 && ok; ++i) {
      if (mask & (1u << i)) {
        check_group(lo, i);
        lo = i + 1;
        ++groups;
      }
    }
    if (ok) check_group(lo, n - 1);
    (void)start;
    if (ok) best = std::min(best, groups);
  }
  return best;
}

}  // namespace

TEST_CASE("identical layers have unit similarity") {
  Tensor layer = random_layer(2, 8, 4, 4, 1);
  const auto sim = layer_cosine_matrix({stack_of({layer, layer})});
  REQUIRE(sim.at(0, 1) == Catch::Approx(1.0).margin(1e-6));
  REQUIRE(sim.at(0, 0) == Catch::Approx(1.0).margin(1e-6));
  REQUIRE(sim.at(1, 0) == sim.at(0, 1));
}

TEST_CASE("negated layers have similarity minus one") {
  Tensor a = random_layer(1, 8, 4, 4, 2);
  Tensor b = a;
  b.scale_(-1.0f);
  const auto sim = layer_cosine_matrix({stack_of({a, b})});
  REQUIRE(sim.at(0, 1) == Catch::Approx(-1.0).margin(1e-6));
}

TEST_CASE("orthogonal one-hot channels have similarity zero") {
  Tensor a({1, 4, 2, 2}), b({1, 4, 2, 2});
  for (int64_t pos = 0; pos < 4; ++pos) {
    a[0 * 4 + pos] = 1.0f;  // channel 0 hot
    b[1 * 4 + pos] = 1.0f;  // channel 1 hot
  }
  const auto sim = layer_cosine_matrix({stack_of({a, b})});
  REQUIRE(sim.at(0, 1) == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("zero vectors are excluded and counted") {
  Tensor a({1, 2, 2, 1});
  a[0] = 1.0f; a[2] = 1.0f;  // position 1 is a zero vector in layer a
  a[1] = 0.0f; a[3] = 0.0f;
  Tensor b({1, 2, 2, 1});
  b[0] = 1.0f; b[1] = 1.0f; b[2] = 1.0f; b[3] = 1.0f;
  const auto sim = layer_cosine_matrix({stack_of({a, b})});
  REQUIRE(sim.zero_vectors_excluded > 0);
  // the surviving position still contributes a clean cosine
  REQUIRE(sim.at(0, 1) >= -1.0);
  REQUIRE(sim.at(0, 1) <= 1.0);
}

TEST_CASE("matrix over random stacks is symmetric with unit diagonal") {
  std::vector<FeatureStack> stacks;
  for (uint64_t s = 0; s < 3; ++s)
    stacks.push_back(stack_of({random_layer(2, 6, 4, 2, 10 + s), random_layer(2, 6, 4, 2, 20 + s),
                               random_layer(2, 6, 4, 2, 30 + s)}));
  const auto sim = layer_cosine_matrix(stacks);
  for (int a = 0; a < 3; ++a) {
    REQUIRE(sim.at(a, a) == Catch::Approx(1.0).margin(1e-6));
    for (int b = 0; b < 3; ++b) {
      REQUIRE(sim.at(a, b) == Catch::Approx(sim.at(b, a)).margin(1e-6));
      REQUIRE(sim.at(a, b) >= -1.0 - 1e-9);
      REQUIRE(sim.at(a, b) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("mismatched channel counts are incomparable") {
  const auto sim = layer_cosine_matrix({stack_of({random_layer(1, 4, 2, 2, 40),
                                                  random_layer(1, 8, 2, 2, 41)})});
  REQUIRE_FALSE(sim.comparable(0, 1));
  REQUIRE(sim.incomparable_pairs == 1);
  REQUIRE(sim.comparable(0, 0));
}

TEST_CASE("spatial mismatch is equalized to the smaller grid") {
  const auto sim = layer_cosine_matrix({stack_of({random_layer(1, 4, 8, 4, 42),
                                                  random_layer(1, 4, 4, 2, 43)})});
  REQUIRE(sim.comparable(0, 1));
}

TEST_CASE("all-similar layers merge into a single group") {
  const auto sim = manual_matrix(12, [](int, int) { return 1.0; });
  const GroupingPlan plan = suggest_grouping(sim, 0.9, 1);
  REQUIRE(plan.group_count() == 1);
  REQUIRE(plan.depth_groups[0] == std::pair<int, int>{1, 12});
  REQUIRE(plan.encoder_count() == 1);
}

TEST_CASE("block similarity splits into two groups at the block boundary") {
  const auto sim = manual_matrix(12, [](int a, int b) {
    if (a == b) return 1.0;
    const bool same_block = (a < 6) == (b < 6);
    return same_block ? 0.95 : 0.5;
  });
  const GroupingPlan plan = suggest_grouping(sim, 0.9, 2);
  REQUIRE(plan.group_count() == 2);
  REQUIRE(plan.depth_groups[0] == std::pair<int, int>{1, 6});
  REQUIRE(plan.depth_groups[1] == std::pair<int, int>{7, 12});
  REQUIRE(plan.encoder_assignment == std::vector<int>{1, 2});

  // hand-traced rule agrees with the exhaustive contiguous-partition search
  REQUIRE(plan.group_count() >= oracle_min_groups(sim, 0.9));
  REQUIRE(oracle_min_groups(sim, 0.9) == 2);
}

TEST_CASE("dissimilar layers stay singletons") {
  const auto sim = manual_matrix(5, [](int a, int b) { return a == b ? 1.0 : 0.0; });
  const GroupingPlan plan = suggest_grouping(sim, 0.5, 3);
  REQUIRE(plan.group_count() == 5);
  for (int g = 0; g < 5; ++g) REQUIRE(plan.depth_groups[static_cast<size_t>(g)] == std::pair<int, int>{g + 1, g + 1});
  REQUIRE(plan.encoder_count() == 3);
}

TEST_CASE("greedy grouping is feasible against the exhaustive oracle") {
  for (uint64_t seed = 0; seed < 6; ++seed) {
    Rng rng(seed);
    const int n = 8;
    // random symmetric matrix with clustered structure
    std::vector<double> base(static_cast<size_t>(n), 0.0);
    for (auto& v : base) v = rng.uniform();
    auto sim = manual_matrix(n, [&](int a, int b) {
      if (a == b) return 1.0;
      return 0.5 + 0.5 * std::cos(base[static_cast<size_t>(a)] - base[static_cast<size_t>(b)]);
    });
    for (double tau : {0.8, 0.9, 0.95}) {
      const GroupingPlan plan = suggest_grouping(sim, tau, 2);
      plan.validate(n);
      REQUIRE(plan.group_count() >= oracle_min_groups(sim, tau));
    }
  }
}

TEST_CASE("suggest_grouping rejects bad parameters") {
  const auto sim = manual_matrix(3, [](int, int) { return 1.0; });
  REQUIRE_THROWS_AS(suggest_grouping(sim, 0.0, 1), Error);
  REQUIRE_THROWS_AS(suggest_grouping(sim, 1.5, 1), Error);
  REQUIRE_THROWS_AS(suggest_grouping(sim, 0.9, 0), Error);
}

TEST_CASE("ensemble matching the best layer gives zero deltas") {
  const std::vector<std::vector<double>> grid = {
      {80.0, 70.0}, {85.0, 75.0}, {85.0, 75.0}};  // last row = ensemble
  const EnsembleComparison cmp = ensemble_vs_separate_report(grid);
  REQUIRE(cmp.delta[0] == 0.0);
  REQUIRE(cmp.delta[1] == 0.0);
  REQUIRE_FALSE(cmp.negative[0]);
}

TEST_CASE("a two-point ensemble lead shows up as plus two") {
  const std::vector<std::vector<double>> grid = {{80.0, 90.0}, {82.0, 88.0}, {84.0, 87.0}};
  const EnsembleComparison cmp = ensemble_vs_separate_report(grid);
  REQUIRE(cmp.delta[0] == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(cmp.delta[1] == Catch::Approx(-3.0).margin(1e-12));
  REQUIRE(cmp.negative[1]);
  REQUIRE(cmp.best_layer_row[0] == 1);
}

TEST_CASE("deltas agree with an independent recomputation") {
  Rng rng(50);
  std::vector<std::vector<double>> grid;
  for (int r = 0; r < 13; ++r) {
    std::vector<double> row;
    for (int c = 0; c < 5; ++c) row.push_back(rng.uniform(50.0, 100.0));
    grid.push_back(std::move(row));
  }
  const EnsembleComparison cmp = ensemble_vs_separate_report(grid);
  for (int c = 0; c < 5; ++c) {
    double best = -1.0;
    for (int r = 0; r < 12; ++r) best = std::max(best, grid[static_cast<size_t>(r)][static_cast<size_t>(c)]);
    REQUIRE(cmp.delta[static_cast<size_t>(c)] ==
            Catch::Approx(grid[12][static_cast<size_t>(c)] - best).margin(1e-9));
  }
}
