#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "damext/metrics.hpp"
#include "damext/rng.hpp"
#include "oracles.hpp"

using namespace damext;

namespace {

LabelMask random_mask(int w, int h, int arity, Rng& rng) {
  LabelMask m(w, h, arity);
  for (Eigen::Index i = 0; i < m.values.size(); ++i)
    m.values[i] = static_cast<std::uint8_t>(rng.index(arity));
  return m;
}

LabelMask mask_row(const std::vector<int>& vals, int arity) {
  LabelMask m(static_cast<int>(vals.size()), 1, arity);
  for (std::size_t i = 0; i < vals.size(); ++i)
    m.values[static_cast<Eigen::Index>(i)] = static_cast<std::uint8_t>(vals[i]);
  return m;
}

}  // namespace

TEST_CASE("iou agrees with the counting oracle") {
  Rng rng(83);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 4 + static_cast<int>(rng.index(28));
    const int h = 4 + static_cast<int>(rng.index(28));
    const LabelMask a = random_mask(w, h, 3, rng);
    const LabelMask b = random_mask(w, h, 3, rng);
    for (int cls = 0; cls < 3; ++cls)
      CHECK(std::abs(iou(a, b, cls) - oracles::iou_reference(a, b, cls)) <= 1e-9);
  }

  SUBCASE("class missing from both sides scores 1 and sets the flag") {
    const LabelMask a = mask_row({0, 1, 1, 0}, 3);
    const LabelMask b = mask_row({1, 1, 0, 0}, 3);
    bool flag = false;
    CHECK(iou(a, b, 2, &flag) == 1.0);
    CHECK(flag);
    flag = false;
    CHECK(iou(a, b, 1, &flag) == doctest::Approx(1.0 / 3.0));
    CHECK_FALSE(flag);  // untouched when the class appears
  }
  SUBCASE("class on exactly one side scores 0") {
    CHECK(iou(mask_row({2, 0}, 3), mask_row({0, 0}, 3), 2) == 0.0);
    CHECK(iou(mask_row({0, 0}, 3), mask_row({0, 2}, 3), 2) == 0.0);
  }
  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(iou(mask_row({0, 1}, 2), mask_row({0, 1, 0}, 2), 1), ShapeError);
  }
}

TEST_CASE("report averages per image before averaging the set") {
  // image A: water IoU 2/5, image B: 6/10. Per-image averaging gives exactly
  // 0.5; pooling counts across the set would give 8/15 instead.
  const LabelMask pa = mask_row({1, 1, 1, 0, 0}, 2);
  const LabelMask ga = mask_row({0, 1, 1, 1, 1}, 2);
  CHECK(iou(pa, ga, 1) == doctest::Approx(0.4));
  const LabelMask pb = mask_row({1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0}, 2);
  const LabelMask gb = mask_row({0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0}, 2);
  CHECK(iou(pb, gb, 1) == doctest::Approx(0.6));

  const MetricsReport rep = report({pa, pb}, {ga, gb}, ClassSelection::Water);
  REQUIRE(rep.iou_water.has_value());
  CHECK(*rep.iou_water == doctest::Approx(0.5));
  CHECK(rep.n == 2);
  CHECK_FALSE(rep.miou.has_value());
  CHECK_FALSE(rep.iou_d.has_value());
}

TEST_CASE("selection variants fill the matching fields") {
  SUBCASE("water-land miou") {
    const LabelMask p = mask_row({1, 1, 0, 0}, 2);
    const LabelMask g = mask_row({1, 0, 1, 0}, 2);
    // water: 1/3, land: 1/3
    const MetricsReport rep = report({p}, {g}, ClassSelection::WaterLand);
    REQUIRE(rep.miou.has_value());
    REQUIRE(rep.iou_water.has_value());
    CHECK(*rep.miou == doctest::Approx(1.0 / 3.0));
    CHECK(*rep.iou_water == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("dam-only and dam-natural") {
    const LabelMask p = mask_row({2, 2, 1, 0, 0, 1}, 3);
    const LabelMask g = mask_row({2, 1, 1, 0, 2, 1}, 3);
    // dam: inter 1, union 3 -> 1/3; natural: inter 2, union 3 -> 2/3
    const MetricsReport dam = report({p}, {g}, ClassSelection::Dam);
    REQUIRE(dam.iou_d.has_value());
    CHECK(*dam.iou_d == doctest::Approx(1.0 / 3.0));
    CHECK_FALSE(dam.miou_dn.has_value());

    const MetricsReport dn = report({p}, {g}, ClassSelection::DamNatural);
    REQUIRE(dn.miou_dn.has_value());
    REQUIRE(dn.iou_d.has_value());
    CHECK(*dn.miou_dn == doctest::Approx(0.5 * (1.0 / 3.0 + 2.0 / 3.0)));
    CHECK(*dn.iou_d == doctest::Approx(1.0 / 3.0));

    const MetricsReport dnb = report({p}, {g}, ClassSelection::DamNaturalLand);
    REQUIRE(dnb.miou_dnb.has_value());
    // land: inter 1, union 2 -> 1/2
    CHECK(*dnb.miou_dnb == doctest::Approx((1.0 / 3.0 + 2.0 / 3.0 + 0.5) / 3.0));
    CHECK(*dnb.iou_d == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("missing dam on both sides counts as 1 and is reported") {
    const LabelMask p = mask_row({1, 1, 0, 0}, 3);
    const LabelMask g = mask_row({1, 0, 1, 0}, 3);
    const MetricsReport rep = report({p}, {g}, ClassSelection::DamNatural);
    CHECK(rep.empty_class_used);
    CHECK(*rep.iou_d == 1.0);
    CHECK(*rep.miou_dn == doctest::Approx(0.5 * (1.0 + 1.0 / 3.0)));
  }
  SUBCASE("identical masks score 1 everywhere") {
    Rng rng(89);
    const LabelMask m = random_mask(16, 16, 3, rng);
    const MetricsReport rep = report({m, m}, {m, m}, ClassSelection::DamNaturalLand);
    CHECK(*rep.miou_dnb == doctest::Approx(1.0));
    CHECK(*rep.iou_d == doctest::Approx(1.0));
  }
  SUBCASE("input validation") {
    const LabelMask m = mask_row({0, 1}, 2);
    CHECK_THROWS_AS(report({}, {}, ClassSelection::Water), DataError);
    CHECK_THROWS_AS(report({m}, {m, m}, ClassSelection::Water), DataError);
  }
}

TEST_CASE("label accuracy") {
  CHECK(accuracy({1, 0, 1}, {1, 1, 1}) == doctest::Approx(2.0 / 3.0));
  CHECK(accuracy({0, 0}, {0, 0}) == 1.0);
  CHECK_THROWS_AS(accuracy({}, {}), DataError);
  CHECK_THROWS_AS(accuracy({1}, {1, 0}), DataError);
}

TEST_CASE("json rendering keeps unset metrics null") {
  MetricsReport rep;
  rep.iou_water = 0.25;
  rep.n = 3;
  const auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j["iou_water"] == 0.25);
  CHECK(j["miou"].is_null());
  CHECK(j["iou_d"].is_null());
  CHECK(j["accuracy"].is_null());
  CHECK(j["n"] == 3);
  CHECK(j["empty_class_used"] == false);
}
