#include <doctest.h>

#include <cmath>
#include <set>
#include <smcglmm/rng.hpp>

using namespace smcglmm;

// Known-answer vectors for the Philox4x64-10 block function, cross-checked
// against an independent implementation of the same variant.
TEST_CASE("philox4x64-10 known-answer vectors") {
  struct Case {
    std::uint64_t ctr[4];
    std::uint64_t key[2];
    std::uint64_t expect[4];
  };
  const Case cases[] = {
      {{0, 0, 0, 0},
       {0, 0},
       {0x16554d9eca36314cull, 0xdb20fe9d672d0fdcull, 0xd7e772cee186176bull,
        0x7e68b68aec7ba23bull}},
      {{1, 0, 0, 0},
       {0, 0},
       {0x02f4ba6408e4d89bull, 0x3dd62b0b9ca8c5b2ull, 0x1c8667a55d902e79ull,
        0x907d7a052fd5b4dcull}},
      {{0xFFFFFFFFFFFFFFFFull, 0xFFFFFFFFFFFFFFFFull, 0xFFFFFFFFFFFFFFFFull,
        0xFFFFFFFFFFFFFFFFull},
       {0xFFFFFFFFFFFFFFFFull, 0xFFFFFFFFFFFFFFFFull},
       {0x87b092c3013fe90bull, 0x438c3c67be8d0224ull, 0x9cc7d7c69cd777b6ull,
        0xa09caebf594f0ba0ull}},
      {{5, 7, 11, 13},
       {0x123456789abcdef0ull, 0x0f1e2d3c4b5a6978ull},
       {0x4fa5fa551fd70fceull, 0x95971cf91e02d050ull, 0x4cb9873a606d98aaull,
        0x9818d92ab7ad2f5cull}},
      {{2, 1, 42, 3},
       {0xdeadbeefcafef00dull, 0},
       {0x25991b04c6d654f8ull, 0x1b7b6eebc3b606daull, 0x8eac4616a7310940ull,
        0x9ab2220dd71a4b09ull}},
  };
  for (const Case& c : cases) {
    std::uint64_t out[4];
    Philox4x64::block(c.ctr, c.key, out);
    for (int i = 0; i < 4; ++i) CHECK(out[i] == c.expect[i]);
  }
}

TEST_CASE("stream addressing matches the philox counter layout") {
  // Key carries (seed, domain); the counter carries (block, 0, id, stage).
  RngStream s(42, RngDomain::move, 9, 3);
  std::uint64_t ctr[4] = {0, 0, 3, 9};
  std::uint64_t key[2] = {42, static_cast<std::uint64_t>(RngDomain::move)};
  std::uint64_t expect[4];
  Philox4x64::block(ctr, key, expect);
  for (int i = 0; i < 4; ++i) CHECK(s.next_u64() == expect[i]);

  // Next block increments the counter word 0.
  ctr[0] = 1;
  Philox4x64::block(ctr, key, expect);
  CHECK(s.next_u64() == expect[0]);
}

TEST_CASE("streams with distinct addresses do not collide") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t stage = 0; stage < 8; ++stage)
    for (std::uint64_t id = 0; id < 8; ++id) {
      RngStream s(1, RngDomain::move, stage, id);
      CHECK(seen.insert(s.next_u64()).second);
    }
  // Same address, different domain.
  RngStream a(1, RngDomain::move, 2, 2);
  RngStream b(1, RngDomain::resample, 2, 2);
  CHECK(a.next_u64() != b.next_u64());
}

TEST_CASE("identical address replays identically") {
  RngStream a(7, RngDomain::generic, 1, 2);
  RngStream b(7, RngDomain::generic, 1, 2);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform01() == b.uniform01());
}

TEST_CASE("uniform bounds") {
  RngStream s(3, RngDomain::generic, 0, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = s.uniform_open();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("normal moments") {
  RngStream s(11, RngDomain::generic, 0, 0);
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    m1 += z;
    m2 += z * z;
  }
  m1 /= n;
  m2 /= n;
  CHECK(std::abs(m1) < 0.01);
  CHECK(std::abs(m2 - 1.0) < 0.02);
}

TEST_CASE("gamma mean and variance") {
  RngStream s(12, RngDomain::generic, 0, 0);
  const double shape = 2.7;
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = s.gamma(shape);
    CHECK(g > 0.0);
    m1 += g;
    m2 += g * g;
  }
  m1 /= n;
  m2 /= n;
  CHECK(m1 == doctest::Approx(shape).epsilon(0.01));
  CHECK(m2 - m1 * m1 == doctest::Approx(shape).epsilon(0.03));

  // shape < 1 branch
  double small = 0.0;
  for (int i = 0; i < n; ++i) small += s.gamma(0.4);
  CHECK(small / n == doctest::Approx(0.4).epsilon(0.02));
}

TEST_CASE("poisson mean") {
  RngStream s(13, RngDomain::generic, 0, 0);
  const double lambda = 7.5;
  const int n = 100000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += static_cast<double>(s.poisson(lambda));
  CHECK(acc / n == doctest::Approx(lambda).epsilon(0.01));
  CHECK_THROWS_AS((void)s.poisson(-1.0), ValidationError);
}
