#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "relayrd/probability.hpp"

using namespace relayrd;

namespace {

double hb(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

// Doubly symmetric binary pair: X uniform, Y = X through a crossover-q flip.
prob::JointSource dsbs(double q) {
  return prob::JointSource({"X", "Y"}, {2, 2},
                           {(1 - q) / 2, q / 2, q / 2, (1 - q) / 2});
}

}  // namespace

// =============================================================================
// JointSource construction and validation
// =============================================================================

TEST_CASE("joint source normalizes and records the factor") {
  prob::JointSource js({"X"}, {4}, {2.0, 2.0, 2.0, 2.0});
  CHECK(js.normalization_factor() == doctest::Approx(8.0));
  for (double v : js.pmf()) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("joint source rejects malformed input") {
  CHECK_THROWS_AS(prob::JointSource({"X"}, {2}, {0.5, -0.1}), std::invalid_argument);
  CHECK_THROWS_AS(prob::JointSource({"X"}, {2}, {0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(prob::JointSource({"X"}, {2}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(prob::JointSource({"X", "X"}, {2, 2}, {0.25, 0.25, 0.25, 0.25}),
                  std::invalid_argument);
}

TEST_CASE("variable lookup and symbol extraction") {
  prob::JointSource js({"A", "B"}, {2, 3}, {1, 1, 1, 1, 1, 1});
  CHECK(js.var_index("B") == 1);
  CHECK(js.has_label("A"));
  CHECK_FALSE(js.has_label("C"));
  CHECK_THROWS_AS(js.var_index("C"), std::invalid_argument);
  // Flat index 5 = (a=1, b=2) in row-major order.
  CHECK(js.symbol_at(5, 0) == 1);
  CHECK(js.symbol_at(5, 1) == 2);
}

// =============================================================================
// Marginals
// =============================================================================

TEST_CASE("marginal keeps original variable order") {
  // p(a,b,c) with all three binary; marginal over {C, A} must come back (A, C).
  std::vector<double> pmf(8);
  for (int i = 0; i < 8; ++i) pmf[i] = (i + 1);
  prob::JointSource js({"A", "B", "C"}, {2, 2, 2}, pmf);
  prob::JointSource m = prob::marginal(js, {"C", "A"});
  REQUIRE(m.labels().size() == 2);
  CHECK(m.labels()[0] == "A");
  CHECK(m.labels()[1] == "C");
  double total = 0.0;
  for (int i = 0; i < 8; ++i) total += (i + 1);
  // m(a=0,c=1) = p(0,0,1) + p(0,1,1) = (2 + 4) / total.
  CHECK(m.pmf()[1] == doctest::Approx(6.0 / total));
}

TEST_CASE("marginal of everything is the source itself") {
  prob::JointSource js = dsbs(0.3);
  prob::JointSource m = prob::marginal(js, {"X", "Y"});
  for (std::size_t i = 0; i < 4; ++i) CHECK(m.pmf()[i] == doctest::Approx(js.pmf()[i]));
}

// =============================================================================
// Entropy and mutual information against closed forms
// =============================================================================

TEST_CASE("entropy closed forms") {
  prob::JointSource js = dsbs(0.25);
  CHECK(prob::entropy(js, {"X"}, {}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(prob::entropy(js, {"X", "Y"}, {}) == doctest::Approx(1.0 + hb(0.25)).epsilon(1e-12));
  CHECK(prob::entropy(js, {"X"}, {"Y"}) == doctest::Approx(hb(0.25)).epsilon(1e-12));
}

TEST_CASE("mutual information closed forms") {
  prob::JointSource js = dsbs(0.25);
  CHECK(prob::mutual_information(js, {"X"}, {"Y"}, {}) ==
        doctest::Approx(1.0 - hb(0.25)).epsilon(1e-12));
  // Independent pair.
  prob::JointSource ind({"X", "Y"}, {2, 2}, {0.35, 0.35, 0.15, 0.15});
  CHECK(prob::mutual_information(ind, {"X"}, {"Y"}, {}) == doctest::Approx(0.0));
  // Identical pair carries the full entropy.
  prob::JointSource eq({"X", "Y"}, {2, 2}, {0.4, 0.0, 0.0, 0.6});
  CHECK(prob::mutual_information(eq, {"X"}, {"Y"}, {}) ==
        doctest::Approx(hb(0.4)).epsilon(1e-12));
}

TEST_CASE("conditional mutual information detects chain structure") {
  // X -> Y -> Z: I(X; Z | Y) = 0 while I(X; Z) > 0.
  std::vector<double> pmf(8, 0.0);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) {
        double px = 0.5;
        double pyx = (y == x) ? 0.8 : 0.2;
        double pzy = (z == y) ? 0.7 : 0.3;
        pmf[(x * 2 + y) * 2 + z] = px * pyx * pzy;
      }
  prob::JointSource js({"X", "Y", "Z"}, {2, 2, 2}, pmf);
  CHECK(prob::markov_slack(js, {"X"}, {"Y"}, {"Z"}) == doctest::Approx(0.0));
  // Composed crossover 0.2 * 0.7 + 0.8 * 0.3 = 0.38 leaves I(X;Z) = 1 - h(0.38).
  CHECK(prob::mutual_information(js, {"X"}, {"Z"}, {}) == doctest::Approx(0.0419571).epsilon(1e-5));
  // Overlap convention: conditioning absorbs shared variables.
  CHECK(prob::mutual_information(js, {"X", "Y"}, {"Z"}, {"Y"}) ==
        doctest::Approx(prob::mutual_information(js, {"X"}, {"Z"}, {"Y"})).epsilon(1e-12));
}

// =============================================================================
// Channels and extension
// =============================================================================

TEST_CASE("channel rows are normalized and validated") {
  prob::ConditionalChannel ch({"U"}, {2}, {"X"}, {2}, {2.0, 2.0, 1.0, 3.0});
  CHECK(ch.values()[0] == doctest::Approx(0.5));
  CHECK(ch.values()[3] == doctest::Approx(0.75));
  CHECK_THROWS_AS(prob::ConditionalChannel({"U"}, {2}, {"X"}, {2}, {0.0, 0.0, 1.0, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("deterministic copy and constant channels") {
  prob::ConditionalChannel copy =
      prob::ConditionalChannel::deterministic_copy({"U"}, {3}, {"X"}, {3}, {0, 1, 2});
  for (int x = 0; x < 3; ++x)
    for (int u = 0; u < 3; ++u)
      CHECK(copy.values()[static_cast<std::size_t>(x) * 3 + u] == (x == u ? 1.0 : 0.0));
  prob::ConditionalChannel cons = prob::ConditionalChannel::constant({"U"}, {4}, {"X"}, {2});
  for (int x = 0; x < 2; ++x)
    for (int u = 0; u < 4; ++u)
      CHECK(cons.values()[static_cast<std::size_t>(x) * 4 + u] == (u == 0 ? 1.0 : 0.0));
}

TEST_CASE("extend attaches a channel and preserves information identities") {
  prob::JointSource js = dsbs(0.25);
  // U = X through a crossover-e flip; then I(U;Y) = 1 - h(e * q) with the
  // crossover composition e*q = e(1-q) + q(1-e).
  double e = 0.1, q = 0.25;
  prob::ConditionalChannel ch({"U"}, {2}, {"X"}, {2}, {1 - e, e, e, 1 - e});
  prob::JointSource ext = prob::extend(js, ch);
  REQUIRE(ext.labels().size() == 3);
  CHECK(ext.labels()[2] == "U");
  double comp = e * (1 - q) + q * (1 - e);
  CHECK(prob::mutual_information(ext, {"U"}, {"Y"}, {}) ==
        doctest::Approx(1.0 - hb(comp)).epsilon(1e-10));
  // Markov X -> U holds by construction: I(U; Y | X) = 0.
  CHECK(prob::markov_slack(ext, {"U"}, {"X"}, {"Y"}) == doctest::Approx(0.0));
  // Label collision is rejected.
  prob::ConditionalChannel clash({"Y"}, {2}, {"X"}, {2}, {1, 0, 0, 1});
  CHECK_THROWS_AS(prob::extend(js, clash), std::invalid_argument);
}

TEST_CASE("extend with a multi-output channel") {
  prob::JointSource js({"X"}, {2}, {0.5, 0.5});
  // Joint pair (U, V) with U = X and V uniform, independent of X.
  prob::ConditionalChannel ch({"U", "V"}, {2, 2}, {"X"}, {2},
                              {0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5});
  prob::JointSource ext = prob::extend(js, ch);
  CHECK(prob::mutual_information(ext, {"U"}, {"X"}, {}) == doctest::Approx(1.0));
  CHECK(prob::mutual_information(ext, {"V"}, {"X"}, {}) == doctest::Approx(0.0));
  CHECK(prob::entropy(ext, {"U", "V"}, {}) == doctest::Approx(2.0));
}
