#include <doctest.h>

#include <cmath>
#include <sstream>

#include "boxemb/embedding.hpp"
#include "test_util.hpp"

using namespace boxemb;

TEST_CASE("invert_param closed forms") {
  const auto md = invert_param(ParamKind::MinDelta, 0.2, 0.3);
  REQUIRE(md.has_value());
  CHECK(md->first == 0.2);
  CHECK(md->second == doctest::Approx(-1.0502256128148467).epsilon(1e-12));

  const auto raw = invert_param(ParamKind::Raw, 0.2, 0.3);
  REQUIRE(raw.has_value());
  CHECK(raw->first == 0.2);
  CHECK(raw->second == 0.5);

  CHECK_FALSE(invert_param(ParamKind::Sigmoid, 0.8, 0.3).has_value());  // min + side >= 1
  CHECK_FALSE(invert_param(ParamKind::Tanh, 0.5, 0.4).has_value());     // side >= (1-min)/2
}

TEST_CASE("init round trip: realize reproduces the sampled coordinates") {
  InitSpec spec;
  for (ParamKind pk :
       {ParamKind::Raw, ParamKind::MinDelta, ParamKind::Sigmoid, ParamKind::Tanh}) {
    const EmbeddingTable table = init_uniform(50, 6, pk, spec, 321);
    const RealizedBoxes rb = realize_all(table);
    const double tol =
        (pk == ParamKind::Raw || pk == ParamKind::MinDelta) ? 1e-9 : 1e-7;
    for (std::size_t i = 0; i < rb.z.size(); ++i) {
      const double side = rb.Z[i] - rb.z[i];
      CHECK(rb.z[i] >= spec.min_lo - tol);
      CHECK(rb.z[i] <= spec.min_hi + tol);
      CHECK(side >= spec.side_lo - tol);
      CHECK(side <= spec.side_hi + tol);
    }
  }
}

TEST_CASE("init inversion error stays within the per-kind tolerance") {
  Xoshiro256ss rng(9);
  for (ParamKind pk :
       {ParamKind::Raw, ParamKind::MinDelta, ParamKind::Sigmoid, ParamKind::Tanh}) {
    const double tol = (pk == ParamKind::Raw || pk == ParamKind::MinDelta) ? 1e-9 : 1e-7;
    for (int rep = 0; rep < 100; ++rep) {
      const double min = rng.uniform(0.05, 0.6);
      const double side = rng.uniform(0.05, 0.19);  // feasible for every kind
      const auto th = invert_param(pk, min, side);
      REQUIRE(th.has_value());
      Tape t;
      Box b = realize(pk, t.leaf(Array(Shape{2}, {th->first, th->second})));
      CHECK(std::abs(b.z.value()[0] - min) <= tol);
      CHECK(std::abs(b.Z.value()[0] - (min + side)) <= tol);
    }
  }
}

TEST_CASE("init determinism and seed sensitivity") {
  InitSpec spec;
  const EmbeddingTable a = init_uniform(20, 4, ParamKind::MinDelta, spec, 7);
  const EmbeddingTable b = init_uniform(20, 4, ParamKind::MinDelta, spec, 7);
  CHECK(a.params == b.params);  // bit-identical
  const EmbeddingTable c = init_uniform(20, 4, ParamKind::MinDelta, spec, 8);
  CHECK(a.params != c.params);
}

TEST_CASE("init rejects an uninvertible range") {
  InitSpec spec;
  spec.min_lo = spec.min_hi = 0.9;
  spec.side_lo = spec.side_hi = 0.5;  // sigmoid needs min + side < 1
  CHECK_THROWS_WITH_AS(init_uniform(3, 2, ParamKind::Sigmoid, spec, 1),
                       doctest::Contains("100 attempts"), std::runtime_error);
  CHECK_THROWS_AS(init_uniform(0, 2, ParamKind::Raw, spec, 1), std::invalid_argument);
  InitSpec bad;
  bad.side_lo = 0.0;
  CHECK_THROWS_AS(init_uniform(3, 2, ParamKind::Raw, bad, 1), std::invalid_argument);
}

TEST_CASE("lookup") {
  const EmbeddingTable table = init_uniform(10, 3, ParamKind::MinDelta, InitSpec{}, 5);

  SUBCASE("repeated indices give identical boxes") {
    Tape t;
    const std::vector<std::int64_t> ids{0, 0};
    const LookupResult lr = lookup(t, table, ids);
    CHECK(lr.box.box_shape() == Shape{2});
    for (std::int64_t c = 0; c < 3; ++c)
      CHECK(lr.box.z.value()[c] == lr.box.z.value()[3 + c]);
  }

  SUBCASE("empty lookup") {
    Tape t;
    const std::vector<std::int64_t> ids;
    const LookupResult lr = lookup(t, table, ids);
    CHECK(lr.box.box_shape() == Shape{0});
  }

  SUBCASE("out of range is rejected by index") {
    Tape t;
    const std::vector<std::int64_t> ids{10};
    CHECK_THROWS_WITH_AS(lookup(t, table, ids), doctest::Contains("10"), std::invalid_argument);
  }

  SUBCASE("gradient lands only in the looked-up row") {
    Tape t;
    const std::vector<std::int64_t> ids{3};
    const LookupResult lr = lookup(t, table, ids);
    t.backward(sum_axis(sum_axis(lr.box.z, 1), 0));
    const SparseGrad sg = accumulate_sparse_grad(lr.ids, lr.theta.grad());
    CHECK(sg.size() == 1);
    CHECK(sg.count(3) == 1);
    // finite-difference cross-check: wiggling row 0 must not move the loss
    double base;
    {
      Tape tt;
      base = sum_axis(sum_axis(lookup(tt, table, ids).box.z, 1), 0).item();
    }
    EmbeddingTable moved = table;
    moved.row(0)[0] += 0.1;
    {
      Tape tt;
      CHECK(sum_axis(sum_axis(lookup(tt, moved, ids).box.z, 1), 0).item() == base);
    }
    EmbeddingTable moved3 = table;
    moved3.row(3)[0] += 1e-6;
    {
      Tape tt;
      const double fwd = sum_axis(sum_axis(lookup(tt, moved3, ids).box.z, 1), 0).item();
      CHECK((fwd - base) / 1e-6 ==
            doctest::Approx(sg.at(3)[0]).epsilon(1e-5));
    }
  }
}

TEST_CASE("accumulate_sparse_grad") {
  Array g(Shape{2, 3}, {1, 2, 3, 1, 2, 3});
  const std::vector<std::int64_t> dup{1, 1};
  const SparseGrad summed = accumulate_sparse_grad(dup, g);
  CHECK(summed.size() == 1);
  CHECK(summed.at(1) == std::vector<double>{2, 4, 6});

  const std::vector<std::int64_t> two{0, 2};
  const SparseGrad sep = accumulate_sparse_grad(two, g);
  CHECK(sep.size() == 2);
  CHECK(sep.at(0) == std::vector<double>{1, 2, 3});
  CHECK(sep.at(2) == std::vector<double>{1, 2, 3});
  CHECK(sep.count(1) == 0);

  const std::vector<std::int64_t> none;
  CHECK(accumulate_sparse_grad(none, Array(Shape{0, 3})).empty());
}

TEST_CASE("boxes tsv round trip") {
  const EmbeddingTable table = init_uniform(7, 4, ParamKind::Sigmoid, InitSpec{}, 123);
  std::stringstream ss;
  dump_boxes_tsv(table, ss);
  const RealizedBoxes loaded = load_boxes_tsv(ss);
  const RealizedBoxes direct = realize_all(table);
  CHECK(loaded.num_entities == 7);
  CHECK(loaded.n == 4);
  CHECK(loaded.z == direct.z);  // shortest round-trip formatting is lossless
  CHECK(loaded.Z == direct.Z);
}
