#include <gtest/gtest.h>

#include "agri/agronomy.hpp"
#include "agri/errors.hpp"
#include "support.hpp"

using namespace agri;

namespace {

const CropBandTable& table() {
    static const auto t = CropBandTable::load(fx::data_dir() / "crop_bands.json");
    return t;
}

} // namespace

TEST(CropBands, ShippedCropsPresent) {
    for (const auto* crop : {"maize", "sugarcane", "spinach", "cotton"}) {
        EXPECT_TRUE(table().has_crop(crop)) << crop;
        const auto band = table().band_for(crop);
        for (auto m : kAllMetrics) {
            ASSERT_TRUE(band.band(m)) << crop << " " << metric_name(m);
            const auto r = *band.band(m);
            EXPECT_GE(r.lo, valid_range(m).lo);
            EXPECT_LE(r.hi, valid_range(m).hi);
        }
    }
    EXPECT_THROW((void)table().band_for("rice"), ConfigError);
    EXPECT_FALSE(table().find("rice"));
}

TEST(CropBands, StageOverridesOnlyNamedMetrics) {
    const auto veg = table().band_for("cotton", GrowthStage::vegetative);
    const auto germ = table().band_for("cotton", GrowthStage::germination);
    EXPECT_EQ(germ.band(Metric::moisture)->lo, 50.0);
    EXPECT_EQ(veg.band(Metric::moisture)->lo, 40.0);
    EXPECT_EQ(germ.band(Metric::ph)->lo, veg.band(Metric::ph)->lo);
}

TEST(CropBands, ParseErrors) {
    EXPECT_THROW((void)CropBandTable::parse("[]"), ConfigError);
    EXPECT_THROW((void)CropBandTable::parse(R"({"version": 2, "crops": {}})"), ConfigError);
    EXPECT_THROW((void)CropBandTable::parse(R"({"version": 1, "crops": {"x": {"bands": {"ph": [7, 6]}}}})"),
                 ConfigError);
}

TEST(Urgency, Grades) {
    const auto band = table().band_for("cotton");
    auto r = fx::reading("n1", 1, 0);
    EXPECT_EQ(classify_urgency(r, band), Urgency::routine);
    r.set(Metric::moisture, 41.0);
    EXPECT_EQ(classify_urgency(r, band), Urgency::elevated);
    r.set(Metric::moisture, 38.0);
    EXPECT_EQ(classify_urgency(r, band), Urgency::elevated);
    r.set(Metric::moisture, 30.0);
    EXPECT_EQ(classify_urgency(r, band), Urgency::alert);
    EXPECT_EQ(classify_urgency(r, table(), "rice"), Urgency::routine);
}

TEST(Stages, Names) {
    for (auto s : {GrowthStage::germination, GrowthStage::vegetative, GrowthStage::maturity}) {
        EXPECT_EQ(parse_stage(stage_name(s)), s);
    }
}
