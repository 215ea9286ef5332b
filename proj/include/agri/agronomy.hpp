#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "agri/telemetry.hpp"

namespace agri {

enum class GrowthStage : std::uint8_t { germination, vegetative, maturity };

[[nodiscard]] std::string_view stage_name(GrowthStage s);
[[nodiscard]] GrowthStage parse_stage(std::string_view name);

/// Acceptable interval per metric for one crop at one growth stage.
/// Metrics without a declared interval are unconstrained.
struct CropBand {
    std::string crop;
    GrowthStage stage = GrowthStage::vegetative;
    std::array<std::optional<Range>, kMetricCount> bands{};

    [[nodiscard]] const std::optional<Range>& band(Metric m) const { return bands[index_of(m)]; }
};

/// Crop band configuration:
///
///   {"version": 1, "crops": {"cotton": {
///       "bands": {"moisture": [40, 80], ...},
///       "stages": {"germination": {"moisture": [50, 85]}}}}}
///
/// Stage entries override the base bands for that stage.
class CropBandTable {
  public:
    static CropBandTable parse(std::string_view json_text);
    static CropBandTable load(const std::filesystem::path& path);

    /// Throws agri::ConfigError for an unknown crop.
    [[nodiscard]] CropBand band_for(std::string_view crop, GrowthStage stage = GrowthStage::vegetative) const;
    [[nodiscard]] std::optional<CropBand> find(std::string_view crop,
                                               GrowthStage stage = GrowthStage::vegetative) const;
    [[nodiscard]] bool has_crop(std::string_view crop) const;

  private:
    struct Entry {
        std::array<std::optional<Range>, kMetricCount> base{};
        std::map<GrowthStage, std::array<std::optional<Range>, kMetricCount>> stages;
    };
    std::map<std::string, Entry, std::less<>> crops_;
};

enum class Urgency : std::uint8_t { routine, elevated, alert };

[[nodiscard]] std::string_view urgency_name(Urgency u);

/// Fraction of a band's width tolerated outside the band before a reading is
/// treated as an alert.
inline constexpr double kBandMarginFraction = 0.10;

/// alert: some metric lies outside its band by more than the margin;
/// elevated: some metric lies within the margin of a band boundary;
/// routine otherwise.
[[nodiscard]] Urgency classify_urgency(const SensorReading& reading, const CropBand& band);
/// Unknown crops classify as routine.
[[nodiscard]] Urgency classify_urgency(const SensorReading& reading, const CropBandTable& table,
                                       std::string_view crop);

} // namespace agri
