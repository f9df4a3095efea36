#include <catch2/catch_amalgamated.hpp>

#include "lwgait/gaitnet.hpp"

using namespace lwgait;

namespace {

Tensor random_map(int64_t t, int64_t c, int64_t h, int64_t w, uint64_t seed) {
  Rng rng(seed);
  Tensor m({t, c, h, w});
  for (int64_t i = 0; i < m.size(); ++i) m[i] = static_cast<float>(rng.normal());
  return m;
}

MaskedFeatureStack random_masked(int n, int64_t t, int64_t c, int64_t h, int64_t w, uint64_t seed) {
  MaskedFeatureStack masked;
  for (int i = 0; i < n; ++i) masked.layers.push_back(random_map(t, c, h, w, seed + static_cast<uint64_t>(i)));
  return masked;
}

std::vector<ProjectionHead> make_heads(int n, int64_t in_ch, uint64_t seed) {
  std::vector<ProjectionHead> heads;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    heads.emplace_back(in_ch);
    heads.back().init(rng);
  }
  return heads;
}

std::vector<GaitEncoder> make_encoders(int n, uint64_t seed) {
  std::vector<GaitEncoder> encoders;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    encoders.emplace_back(GaitEncoderConfig{});
    encoders.back().init(rng);
  }
  return encoders;
}

}  // namespace

TEST_CASE("projection emits the working resolution with sigmoid range") {
  Rng rng(1);
  ProjectionHead head(64);
  head.init(rng);
  const Tensor x = random_map(2, 64, 8, 4, 2);
  const Tensor y = head.forward(x, /*train=*/false);
  REQUIRE(y.shape() == std::vector<int64_t>{2, 16, 64, 32});
  for (int64_t i = 0; i < y.size(); ++i) {
    REQUIRE(y[i] > 0.0f);
    REQUIRE(y[i] < 1.0f);
  }
}

TEST_CASE("zeroed projection head outputs exactly one half") {
  ProjectionHead head(32);  // weights and biases default to zero, BN identity
  const Tensor x = random_map(1, 32, 8, 4, 3);
  const Tensor y = head.forward(x, /*train=*/false);
  for (int64_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == 0.5f);
}

TEST_CASE("encoder embedding is frame-permutation invariant bitwise") {
  Rng rng(4);
  GaitEncoder enc(GaitEncoderConfig{});
  enc.init(rng);
  Tensor x = random_map(5, 16, 64, 32, 5);
  const Tensor out = enc.forward(x, /*train=*/false);

  // reversed frame order
  Tensor shuffled(x.shape());
  const int64_t frame = 16 * 64 * 32;
  for (int64_t f = 0; f < 5; ++f)
    std::copy(x.data() + f * frame, x.data() + (f + 1) * frame, shuffled.data() + (4 - f) * frame);
  const Tensor out2 = enc.forward(shuffled, /*train=*/false);
  REQUIRE(out.bitwise_equal(out2));
}

TEST_CASE("duplicated frames collapse to the single-frame embedding") {
  Rng rng(6);
  GaitEncoder enc(GaitEncoderConfig{});
  enc.init(rng);
  const Tensor one = random_map(1, 16, 64, 32, 7);
  Tensor thirty({30, 16, 64, 32});
  for (int64_t f = 0; f < 30; ++f)
    std::copy(one.data(), one.data() + one.size(), thirty.data() + f * one.size());
  const Tensor e1 = enc.forward(one, /*train=*/false);
  const Tensor e30 = enc.forward(thirty, /*train=*/false);
  REQUIRE(e1.bitwise_equal(e30));
}

TEST_CASE("encoder rejects empty sequences and reports embedding shape") {
  Rng rng(8);
  GaitEncoderConfig cfg;
  cfg.embed_dim = 32;
  GaitEncoder enc(cfg);
  enc.init(rng);
  const Tensor x = random_map(3, 16, 64, 32, 9);
  const Tensor out = enc.forward(x, /*train=*/false);
  REQUIRE(out.shape() == std::vector<int64_t>{4, 32});
  Tensor empty({0, 16, 64, 32});
  REQUIRE_THROWS_AS(enc.forward(empty, false), Error);
}

TEST_CASE("forward_standard produces one unit per layer") {
  const int n = 12;
  MaskedFeatureStack masked = random_masked(n, 2, 64, 8, 4, 100);
  auto heads = make_heads(n, 64, 10);
  auto encoders = make_encoders(n, 11);
  const GaitEmbeddingSet set = forward_standard(masked, heads, encoders, /*train=*/false);
  REQUIRE(set.units.size() == 12);
  REQUIRE(set.mode == EmbeddingMode::standard);
}

TEST_CASE("single-branch reduction still works") {
  MaskedFeatureStack masked = random_masked(1, 2, 64, 8, 4, 200);
  auto heads = make_heads(1, 64, 12);
  auto encoders = make_encoders(1, 13);
  const GaitEmbeddingSet set = forward_standard(masked, heads, encoders, false);
  REQUIRE(set.units.size() == 1);
}

TEST_CASE("identical branches on identical inputs give identical units") {
  MaskedFeatureStack masked;
  const Tensor layer = random_map(2, 64, 8, 4, 300);
  for (int i = 0; i < 4; ++i) masked.layers.push_back(layer);
  auto heads = make_heads(4, 64, 14);
  auto encoders = make_encoders(4, 15);
  // copy branch 0 parameters into every branch
  for (int i = 1; i < 4; ++i) {
    ParamRegistry src, dst;
    heads[0].register_params(src, "h");
    encoders[0].register_params(src, "e");
    heads[static_cast<size_t>(i)].register_params(dst, "h");
    encoders[static_cast<size_t>(i)].register_params(dst, "e");
    copy_state(src, dst);
  }
  const GaitEmbeddingSet set = forward_standard(masked, heads, encoders, false);
  for (int i = 1; i < 4; ++i) REQUIRE(set.units[static_cast<size_t>(i)].bitwise_equal(set.units[0]));
}

TEST_CASE("count mismatch is a configuration error") {
  MaskedFeatureStack masked = random_masked(3, 1, 64, 8, 4, 400);
  auto heads = make_heads(2, 64, 16);
  auto encoders = make_encoders(3, 17);
  REQUIRE_THROWS_AS(forward_standard(masked, heads, encoders, false), Error);
}

TEST_CASE("identity grouping reproduces each layer bitwise") {
  MaskedFeatureStack masked = random_masked(5, 2, 8, 4, 2, 500);
  const GroupingPlan plan = GroupingPlan::identity(5);
  const auto groups = depth_group_concat(masked, plan);
  REQUIRE(groups.size() == 5);
  for (size_t i = 0; i < 5; ++i) REQUIRE(groups[i].bitwise_equal(masked.layers[i]));
}

TEST_CASE("paired grouping doubles channels") {
  MaskedFeatureStack masked = random_masked(12, 2, 64, 8, 4, 600);
  const GroupingPlan plan = GroupingPlan::default_paired(12);
  REQUIRE(plan.group_count() == 6);
  REQUIRE(plan.encoder_count() == 2);
  const auto groups = depth_group_concat(masked, plan);
  REQUIRE(groups.size() == 6);
  for (const auto& g : groups) REQUIRE(g.dim(1) == 128);
}

TEST_CASE("concatenation keeps member order and content") {
  MaskedFeatureStack masked = random_masked(2, 3, 64, 4, 2, 700);
  GroupingPlan plan;
  plan.depth_groups = {{1, 2}};
  plan.encoder_assignment = {1};
  const auto groups = depth_group_concat(masked, plan);
  REQUIRE(groups.size() == 1);
  REQUIRE(groups[0].dim(1) == 128);
  const int64_t plane = 4 * 2;
  for (int64_t f = 0; f < 3; ++f)
    for (int64_t c = 0; c < 64; ++c)
      for (int64_t i = 0; i < plane; ++i) {
        REQUIRE(groups[0][(f * 128 + c) * plane + i] == masked.layers[0][(f * 64 + c) * plane + i]);
        REQUIRE(groups[0][(f * 128 + 64 + c) * plane + i] == masked.layers[1][(f * 64 + c) * plane + i]);
      }
}

TEST_CASE("invalid plans are rejected") {
  GroupingPlan holes;
  holes.depth_groups = {{1, 2}, {4, 5}};
  holes.encoder_assignment = {1, 1};
  REQUIRE_THROWS_AS(holes.validate(5), Error);

  GroupingPlan missing_encoder;
  missing_encoder.depth_groups = {{1, 2}, {3, 4}};
  missing_encoder.encoder_assignment = {2, 2};  // encoder 1 never used
  REQUIRE_THROWS_AS(missing_encoder.validate(4), Error);
}

TEST_CASE("grouping identity matches the standard forward bitwise") {
  const int n = 6;
  MaskedFeatureStack masked = random_masked(n, 2, 64, 8, 4, 800);
  auto heads = make_heads(n, 64, 18);
  auto encoders = make_encoders(n, 19);
  auto heads_g = make_heads(n, 64, 20);
  auto encoders_g = make_encoders(n, 21);
  ParamRegistry src, dst;
  for (int i = 0; i < n; ++i) {
    heads[static_cast<size_t>(i)].register_params(src, "h" + std::to_string(i));
    encoders[static_cast<size_t>(i)].register_params(src, "e" + std::to_string(i));
    heads_g[static_cast<size_t>(i)].register_params(dst, "h" + std::to_string(i));
    encoders_g[static_cast<size_t>(i)].register_params(dst, "e" + std::to_string(i));
  }
  copy_state(src, dst);

  const GaitEmbeddingSet std_set = forward_standard(masked, heads, encoders, false);
  const GaitEmbeddingSet grp_set =
      forward_grouped(masked, GroupingPlan::identity(n), heads_g, encoders_g, false);
  REQUIRE(grp_set.mode == EmbeddingMode::grouped);
  REQUIRE(grp_set.units.size() == std_set.units.size());
  for (size_t i = 0; i < std_set.units.size(); ++i)
    REQUIRE(grp_set.units[i].bitwise_equal(std_set.units[i]));
}

TEST_CASE("default paired plan with two shared encoders yields six units") {
  MaskedFeatureStack masked = random_masked(12, 2, 64, 8, 4, 900);
  const GroupingPlan plan = GroupingPlan::default_paired(12);
  std::vector<ProjectionHead> heads;
  Rng rng(22);
  for (int g = 0; g < 6; ++g) {
    heads.emplace_back(128);
    heads.back().init(rng);
  }
  auto encoders = make_encoders(2, 23);
  const GaitEmbeddingSet set = forward_grouped(masked, plan, heads, encoders, false);
  REQUIRE(set.units.size() == 6);
}

TEST_CASE("single shared encoder still yields one unit per group") {
  MaskedFeatureStack masked = random_masked(4, 1, 32, 8, 4, 1000);
  GroupingPlan plan;
  plan.depth_groups = {{1, 2}, {3, 4}};
  plan.encoder_assignment = {1, 1};
  std::vector<ProjectionHead> heads;
  Rng rng(24);
  for (int g = 0; g < 2; ++g) {
    heads.emplace_back(64);
    heads.back().init(rng);
  }
  auto encoders = make_encoders(1, 25);
  const GaitEmbeddingSet set = forward_grouped(masked, plan, heads, encoders, false);
  REQUIRE(set.units.size() == 2);
}

TEST_CASE("encoder bank parameters scale exactly linearly") {
  GaitEncoder enc(GaitEncoderConfig{});
  const int64_t s = enc.parameter_count();
  REQUIRE(count_encoder_parameters(12, s) == 12 * s);
  REQUIRE(count_encoder_parameters(12, s) / count_encoder_parameters(1, s) == 12);
  REQUIRE(count_encoder_parameters(2, s) == 2 * s);
}

TEST_CASE("encoder parameter count matches a layer-by-layer enumeration") {
  GaitEncoderConfig cfg;
  GaitEncoder enc(cfg);
  // closed form: stem 4x4 conv + bias, two 3x3 convs + biases, three BN
  // gamma/beta pairs, parts bias-free linears
  const int64_t expected = (4 * 4 * cfg.in_channels * cfg.stage1 + cfg.stage1) +
                           (2 * cfg.stage1) +
                           (3 * 3 * cfg.stage1 * cfg.stage2 + cfg.stage2) + (2 * cfg.stage2) +
                           (3 * 3 * cfg.stage2 * cfg.stage3 + cfg.stage3) + (2 * cfg.stage3) +
                           cfg.parts * (cfg.stage3 * cfg.embed_dim);
  REQUIRE(enc.parameter_count() == expected);

  // enumeration oracle over the registry
  ParamRegistry reg;
  enc.register_params(reg, "enc");
  REQUIRE(reg.parameter_count() == expected);
}

TEST_CASE("fidelity gap is zero under identity grouping") {
  GaitEmbeddingSet std_set, grp_set;
  for (int i = 0; i < 3; ++i) {
    std_set.units.push_back(random_map(1, 1, 4, 64, 1100 + static_cast<uint64_t>(i)));
    std_set.units.back().view({4, 64});
    grp_set.units.push_back(std_set.units.back());
  }
  const auto alignment = plan_alignment(GroupingPlan::identity(3));
  REQUIRE(fidelity_gap(std_set, grp_set, alignment) == 0.0);
}

TEST_CASE("constant offset from the aligned mean gives its square") {
  GaitEmbeddingSet std_set, grp_set;
  Tensor a = random_map(1, 1, 4, 64, 1200);
  a.view({4, 64});
  Tensor b = random_map(1, 1, 4, 64, 1201);
  b.view({4, 64});
  std_set.units = {a, b};
  Tensor g({4, 64});
  for (int64_t i = 0; i < g.size(); ++i) g[i] = 0.5f * (a[i] + b[i]) + 0.1f;
  grp_set.units = {g};
  const double gap = fidelity_gap(std_set, grp_set, {{0, 1}});
  REQUIRE(gap == Catch::Approx(0.01).margin(1e-6));
}

TEST_CASE("fidelity gap matches brute-force recomputation") {
  Rng rng(26);
  GaitEmbeddingSet std_set, grp_set;
  for (int i = 0; i < 4; ++i) {
    Tensor u({4, 16});
    for (int64_t k = 0; k < u.size(); ++k) u[k] = static_cast<float>(rng.normal());
    std_set.units.push_back(u);
  }
  for (int g = 0; g < 2; ++g) {
    Tensor u({4, 16});
    for (int64_t k = 0; k < u.size(); ++k) u[k] = static_cast<float>(rng.normal());
    grp_set.units.push_back(u);
  }
  const std::vector<std::vector<int>> alignment = {{0, 1}, {2, 3}};
  const double gap = fidelity_gap(std_set, grp_set, alignment);

  double expected = 0.0;
  for (int g = 0; g < 2; ++g) {
    double acc = 0.0;
    for (int64_t k = 0; k < 64; ++k) {
      const double mean = 0.5 * (static_cast<double>(std_set.units[static_cast<size_t>(2 * g)][k]) +
                                 std_set.units[static_cast<size_t>(2 * g + 1)][k]);
      const double d = grp_set.units[static_cast<size_t>(g)][k] - mean;
      acc += d * d;
    }
    expected += acc / 64.0;
  }
  expected /= 2.0;
  REQUIRE(gap == Catch::Approx(expected).margin(1e-6));
}

TEST_CASE("fidelity gap rejects incompatible unit shapes") {
  GaitEmbeddingSet std_set, grp_set;
  Tensor a({4, 64}), b({4, 32});
  std_set.units = {a};
  grp_set.units = {b};
  REQUIRE_THROWS_AS(fidelity_gap(std_set, grp_set, {{0}}), Error);
}

TEST_CASE("plan json round-trip") {
  const GroupingPlan plan = GroupingPlan::default_paired(12);
  const json j = plan.to_json(12);
  int n = 0;
  const GroupingPlan loaded = GroupingPlan::from_json(j, &n);
  REQUIRE(n == 12);
  REQUIRE(loaded.depth_groups == plan.depth_groups);
  REQUIRE(loaded.encoder_assignment == plan.encoder_assignment);
  REQUIRE(loaded.epsilon == plan.epsilon);
}

TEST_CASE("encoder forward counter tracks invocations") {
  Rng rng(27);
  GaitEncoder enc(GaitEncoderConfig{});
  enc.init(rng);
  enc.reset_forward_count();
  const Tensor x = random_map(1, 16, 64, 32, 1300);
  enc.forward(x, false);
  enc.forward(x, false);
  REQUIRE(enc.forward_count() == 2);
}
