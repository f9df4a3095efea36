#include <catch2/catch_amalgamated.hpp>

#include "lwgait/evalkit.hpp"

using namespace lwgait;

namespace {

Tensor emb1(float v) {
  Tensor t({1, 1});
  t[0] = v;
  return t;
}

EvalEntry entry1(float v, int identity, Condition cond = Condition::NM, int view = 0,
                 const std::string& id = "") {
  EvalEntry e;
  e.set.units.push_back(emb1(v));
  e.identity = identity;
  e.condition = cond;
  e.view = view;
  e.sequence_id = id;
  return e;
}

EvalEntry random_entry(Rng& rng, int units, int identity, Condition cond, int view) {
  EvalEntry e;
  for (int u = 0; u < units; ++u) {
    Tensor t({2, 8});
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
    e.set.units.push_back(std::move(t));
  }
  e.identity = identity;
  e.condition = cond;
  e.view = view;
  return e;
}

}  // namespace

TEST_CASE("identical embeddings are at distance zero") {
  Tensor a({4, 64});
  Rng rng(1);
  for (int64_t i = 0; i < a.size(); ++i) a[i] = static_cast<float>(rng.normal());
  REQUIRE(layer_distance(a, a) == 0.0);
}

TEST_CASE("distance on a 2-vector fixture") {
  Tensor a({1, 2}), b({1, 2});
  a[0] = 1.0f; a[1] = 2.0f;
  b[0] = 1.0f; b[1] = 0.0f;
  REQUIRE(layer_distance(a, b) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("distance matches the flattened sum of squares") {
  Rng rng(2);
  Tensor a({4, 64}), b({4, 64});
  for (int64_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<float>(rng.normal());
    b[i] = static_cast<float>(rng.normal());
  }
  double ss = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) ss += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
  REQUIRE(layer_distance(a, b) == Catch::Approx(std::sqrt(ss)).margin(1e-6));
  REQUIRE(layer_distance(a, b) == layer_distance(b, a));
  REQUIRE_THROWS_AS(layer_distance(a, Tensor({4, 32})), Error);
}

TEST_CASE("ensemble distance is the arithmetic mean") {
  REQUIRE(ensemble_distance({1.0, 2.0, 3.0}) == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(ensemble_distance({0.7}) == Catch::Approx(0.7).margin(1e-12));
  REQUIRE_THROWS_AS(ensemble_distance({}), Error);
}

TEST_CASE("table ensemble equals the mean of per-unit distances") {
  Rng rng(3);
  std::vector<EvalEntry> probes, gallery;
  for (int i = 0; i < 5; ++i) probes.push_back(random_entry(rng, 4, i, Condition::CL, 0));
  for (int i = 0; i < 6; ++i) gallery.push_back(random_entry(rng, 4, i, Condition::NM, 1));
  const DistanceTable table = build_distance_table(probes, gallery);
  for (int64_t p = 0; p < table.probes; ++p)
    for (int64_t g = 0; g < table.gallery; ++g) {
      double mean = 0.0;
      for (int u = 0; u < 4; ++u) mean += table.unit_distance(u, p, g);
      mean /= 4.0;
      REQUIRE(table.ensemble_dist(p, g) == Catch::Approx(mean).margin(1e-6));
    }
}

TEST_CASE("gallery copied from probes scores perfect rank-1") {
  Rng rng(4);
  std::vector<EvalEntry> probes;
  for (int i = 0; i < 8; ++i) probes.push_back(random_entry(rng, 3, i, Condition::NM, i % 2));
  const DistanceTable table = build_distance_table(probes, probes);
  EvalProtocol protocol;
  protocol.exclude_same_view = false;
  const RankAccuracy acc = rank_k(table, protocol, UnitSelector::mean(), 1);
  REQUIRE(acc.overall_pct == 100.0);
}

TEST_CASE("hand-set distances give exactly half accuracy") {
  // gallery identities 0 and 1; probe 1 lands on its identity, probe 2 does not
  std::vector<EvalEntry> gallery = {entry1(0.0f, 0, Condition::NM, 0, "g0"),
                                    entry1(10.0f, 1, Condition::NM, 0, "g1")};
  std::vector<EvalEntry> probes = {entry1(1.0f, 0, Condition::CL, 1, "p0"),
                                   entry1(0.2f, 1, Condition::CL, 1, "p1")};
  const DistanceTable table = build_distance_table(probes, gallery);
  EvalProtocol protocol;
  const RankAccuracy acc = rank_k(table, protocol, UnitSelector::layer(0), 1);
  REQUIRE(acc.overall_pct == Catch::Approx(50.0).margin(1e-12));

  // brute-force check of the 2x2 table
  REQUIRE(table.unit_distance(0, 0, 0) == Catch::Approx(1.0));
  REQUIRE(table.unit_distance(0, 0, 1) == Catch::Approx(9.0));
  REQUIRE(table.unit_distance(0, 1, 0) == Catch::Approx(0.2));
  REQUIRE(table.unit_distance(0, 1, 1) == Catch::Approx(9.8));
}

TEST_CASE("random embeddings match the null model") {
  Rng rng(5);
  std::vector<EvalEntry> gallery, probes;
  for (int i = 0; i < 10; ++i) gallery.push_back(random_entry(rng, 1, i, Condition::NM, 0));
  for (int i = 0; i < 1000; ++i)
    probes.push_back(random_entry(rng, 1, i % 10, Condition::CL, 1));
  const DistanceTable table = build_distance_table(probes, gallery);
  EvalProtocol protocol;
  const RankAccuracy acc = rank_k(table, protocol, UnitSelector::layer(0), 1);
  REQUIRE(acc.overall_pct > 7.0);
  REQUIRE(acc.overall_pct < 13.0);
}

TEST_CASE("a probe with no admissible gallery is a protocol error") {
  std::vector<EvalEntry> gallery = {entry1(0.0f, 0, Condition::NM, 3, "g0")};
  std::vector<EvalEntry> probes = {entry1(1.0f, 0, Condition::CL, 3, "p0")};
  const DistanceTable table = build_distance_table(probes, gallery);
  EvalProtocol protocol;  // same-view exclusion removes the only entry
  try {
    rank_k(table, protocol, UnitSelector::layer(0), 1);
    FAIL("expected protocol error");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::protocol);
    REQUIRE(std::string(e.what()).find("p0") != std::string::npos);
  }
}

TEST_CASE("distance ties break by gallery enumeration order") {
  std::vector<EvalEntry> gallery = {entry1(1.0f, 7, Condition::NM, 0, "first"),
                                    entry1(1.0f, 3, Condition::NM, 0, "second")};
  std::vector<EvalEntry> probes = {entry1(0.0f, 7, Condition::CL, 1, "p")};
  const DistanceTable table = build_distance_table(probes, gallery);
  EvalProtocol protocol;
  // identity 7 enumerates first, so the tie goes its way
  REQUIRE(rank_k(table, protocol, UnitSelector::layer(0), 1).overall_pct == 100.0);

  std::swap(gallery[0], gallery[1]);
  const DistanceTable swapped = build_distance_table(probes, gallery);
  REQUIRE(rank_k(swapped, protocol, UnitSelector::layer(0), 1).overall_pct == 0.0);
}

TEST_CASE("ranking is invariant under strictly increasing transforms") {
  Rng rng(6);
  std::vector<EvalEntry> gallery, probes;
  for (int i = 0; i < 6; ++i) gallery.push_back(random_entry(rng, 3, i, Condition::NM, 0));
  for (int i = 0; i < 30; ++i) probes.push_back(random_entry(rng, 3, i % 6, Condition::UP, 1));
  DistanceTable table = build_distance_table(probes, gallery);
  EvalProtocol protocol;
  const RankAccuracy base1 = rank_k(table, protocol, UnitSelector::mean(), 1);
  const RankAccuracy base5 = rank_k(table, protocol, UnitSelector::layer(1), 5);

  auto monotone = [](double d) { return d * d * d + 2.0 * d + 0.5; };
  for (auto& mat : table.per_unit)
    for (double& d : mat) d = monotone(d);
  for (double& d : table.ensemble) d = monotone(d);

  REQUIRE(rank_k(table, protocol, UnitSelector::mean(), 1).overall_pct == base1.overall_pct);
  REQUIRE(rank_k(table, protocol, UnitSelector::layer(1), 5).overall_pct == base5.overall_pct);
}

TEST_CASE("per-layer grid carries one row per unit plus the ensemble") {
  Rng rng(7);
  std::vector<EvalEntry> gallery, probes;
  for (int i = 0; i < 4; ++i)
    for (int v = 0; v < 2; ++v) gallery.push_back(random_entry(rng, 5, i, Condition::NM, v));
  for (int i = 0; i < 4; ++i)
    for (Condition c : {Condition::CL, Condition::UP, Condition::BG})
      probes.push_back(random_entry(rng, 5, i, c, 2));
  const DistanceTable table = build_distance_table(probes, gallery);
  EvalProtocol protocol;
  protocol.probe_conditions = {Condition::CL, Condition::UP, Condition::BG};
  const PerLayerReport report = per_layer_report(table, protocol);
  REQUIRE(report.row_names.size() == 6);  // 5 layers + ensemble
  REQUIRE(report.row_names.back() == "ensemble");
  REQUIRE(report.grid.at(1).size() == 6);
  REQUIRE(report.grid.at(1)[0].size() == 4);  // 3 conditions + AVG
  REQUIRE(report.best_row_per_column.at(1).size() == 4);

  // rank-5 dominates rank-1 row by row, column by column
  for (size_t row = 0; row < 6; ++row)
    for (size_t col = 0; col < 4; ++col)
      REQUIRE(report.grid.at(5)[row][col] >= report.grid.at(1)[row][col]);

  // deterministic reruns
  const PerLayerReport again = per_layer_report(table, protocol);
  REQUIRE(again.grid.at(1) == report.grid.at(1));
}
