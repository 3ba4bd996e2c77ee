#include "nerguide/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include <doctest.h>

using nerguide::Rng;

TEST_CASE("same seed reproduces the same stream") {
  Rng a(123), b(123);
  for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different streams") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() == b.next_u64()) ++same;
  }
  CHECK(same == 0);
}

TEST_CASE("derived substreams are pure functions of their arguments") {
  Rng first = Rng::derive(9, 5, 100);
  Rng again = Rng::derive(9, 5, 100);
  CHECK(first.next_u64() == again.next_u64());

  // Neighboring items and streams decorrelate.
  std::set<std::uint64_t> heads;
  for (std::uint64_t stream = 0; stream < 4; ++stream) {
    for (std::uint64_t item = 0; item < 64; ++item) {
      heads.insert(Rng::derive(9, stream, item).next_u64());
    }
  }
  CHECK(heads.size() == 4 * 64);
}

TEST_CASE("uniform stays in the half-open unit interval") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("below returns values under the bound and covers them") {
  Rng rng(11);
  CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
  std::vector<int> counts(7, 0);
  const int n = 21000;
  for (int i = 0; i < n; ++i) {
    std::uint64_t v = rng.below(7);
    REQUIRE(v < 7);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) {
    CHECK(c > 2700);  // expected 3000 per bucket
    CHECK(c < 3300);
  }
}

TEST_CASE("shuffle produces a seeded permutation") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> a = v, b = v;
  Rng r1(3), r2(3), r3(4);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
  std::vector<int> c = v;
  r3.shuffle(c);
  CHECK(a != c);
  std::sort(a.begin(), a.end());
  CHECK(a == v);
}

TEST_CASE("normal matches its first two moments loosely") {
  Rng rng(19);
  const int n = 40000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("pick draws members of the vector") {
  Rng rng(5);
  std::vector<std::string> words = {"a", "b", "c"};
  std::set<std::string> seen;
  for (int i = 0; i < 100; ++i) seen.insert(rng.pick(words));
  CHECK(seen == std::set<std::string>(words.begin(), words.end()));
}
