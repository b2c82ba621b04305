#include <random>

#include "basketforge/basket.hpp"
#include "basketforge/errors.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace basketforge;

TEST_CASE("parse_transactions reads one transaction per line") {
  const auto ds = parse_transactions("a,b\na,c\n");
  REQUIRE(ds.size() == 2);
  CHECK(ds.transactions()[0].items == Itemset({"a", "b"}));
  CHECK(ds.transactions()[1].items == Itemset({"a", "c"}));
  CHECK(ds.transactions()[1].id == 1);
  CHECK(ds.universe() == std::vector<Item>{"a", "b", "c"});
}

TEST_CASE("parse_transactions trims, dedups and sorts within a line") {
  const auto ds = parse_transactions("b, a ,a\n");
  REQUIRE(ds.size() == 1);
  CHECK(ds.transactions()[0].items == Itemset({"a", "b"}));
}

TEST_CASE("parse_transactions keeps interior whitespace") {
  const auto ds = parse_transactions("  ice cream , soda\n");
  CHECK(ds.transactions()[0].items == Itemset({"ice cream", "soda"}));
}

TEST_CASE("parse_transactions rejects empty items with the line number") {
  try {
    parse_transactions("a,,b\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  try {
    parse_transactions("a\n\n , \n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_transactions("a,b,\n"), ParseError);
}

TEST_CASE("parse_transactions skips blank and comment lines") {
  const auto ds = parse_transactions("# header\n\na\r\n   \n#b,c\nc\n");
  REQUIRE(ds.size() == 2);
  CHECK(ds.transactions()[0].items == Itemset({"a"}));
  CHECK(ds.transactions()[1].items == Itemset({"c"}));
}

TEST_CASE("an empty or comment-only file has no transactions") {
  CHECK_THROWS_WITH_AS(parse_transactions(""), "no transactions", ParseError);
  CHECK_THROWS_AS(parse_transactions("# nothing\n\n"), ParseError);
}

TEST_CASE("Itemset enforces canonical form") {
  CHECK_THROWS(Itemset({"b", "a"}));
  CHECK_THROWS(Itemset({"a", "a"}));
  CHECK_THROWS(Itemset({" a"}));
  CHECK_THROWS(Itemset({"a,b"}));
  CHECK(Itemset::from_unsorted({"c", "a", "c"}) == Itemset({"a", "c"}));
  CHECK(Itemset::from_key("a,b c") == Itemset({"a", "b c"}));
  CHECK(Itemset({"a", "b"}).key() == "a,b");
  CHECK(Itemset({"a", "c"}).with("b") == Itemset({"a", "b", "c"}));
  CHECK(Itemset({"a", "b", "c"}).minus(Itemset({"b"})) == Itemset({"a", "c"}));
}

TEST_CASE("absolute_support_threshold is a ceiling with floor 1") {
  CHECK(absolute_support_threshold(0.5, 4) == 2);
  CHECK(absolute_support_threshold(0.5, 5) == 3);
  CHECK(absolute_support_threshold(1.0, 7) == 7);
  CHECK(absolute_support_threshold(0.01, 7) == 1);
  // 0.07 * 100 evaluates to 7.000000000000001 in binary floating point.
  CHECK(absolute_support_threshold(0.07, 100) == 7);
  CHECK_THROWS_AS(absolute_support_threshold(0.0, 4), ConfigError);
  CHECK_THROWS_AS(absolute_support_threshold(0.5, 0), ConfigError);
}

TEST_CASE("count_support on D4") {
  const auto ds = testing::d4();
  CHECK(count_support(ds, Itemset({"diaper"})) == 3);
  CHECK(count_support(ds, Itemset({"beer", "diaper", "milk"})) == 1);
  CHECK(count_support(ds, Itemset({"tea"})) == 0);
}

TEST_CASE("MiningParams validation") {
  CHECK_NOTHROW(MiningParams{1.0, 1.0}.validate());
  CHECK_THROWS_AS((MiningParams{0.0, 0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((MiningParams{0.5, 1.5}.validate()), ConfigError);
}

TEST_CASE("property: support is anti-monotone") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 100; ++round) {
    const auto ds = testing::random_dataset(rng, 40, 8);
    const auto& u = ds.universe();
    std::uniform_int_distribution<std::size_t> pick(0, u.size() - 1);
    const auto x = Itemset({u[pick(rng)]});
    std::vector<Item> wider = x.items();
    for (int extra = 0; extra < 3; ++extra) wider.push_back(u[pick(rng)]);
    const auto y = Itemset::from_unsorted(std::move(wider));
    REQUIRE(x.is_subset_of(y));
    CHECK(count_support(ds, x) >= count_support(ds, y));
  }
}

TEST_CASE("property: parse/serialize round trip is idempotent") {
  std::mt19937_64 rng(12);
  for (int round = 0; round < 100; ++round) {
    const auto ds = testing::random_dataset(rng, 30, 10);
    const auto text = serialize_transactions(ds);
    const auto again = parse_transactions(text);
    CHECK(again == ds);
    CHECK(serialize_transactions(again) == text);
  }
}

TEST_CASE("property: singleton supports sum to total memberships") {
  std::mt19937_64 rng(13);
  for (int round = 0; round < 100; ++round) {
    const auto ds = testing::random_dataset(rng, 50, 10);
    std::uint64_t memberships = 0;
    for (const auto& t : ds.transactions()) memberships += t.items.size();
    std::uint64_t sum = 0;
    for (const auto& item : ds.universe()) sum += count_support(ds, Itemset({item}));
    CHECK(sum == memberships);
  }
}
