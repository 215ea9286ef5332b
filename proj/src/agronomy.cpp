#include "agri/agronomy.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "agri/errors.hpp"

namespace agri {

std::string_view stage_name(GrowthStage s) {
    switch (s) {
    case GrowthStage::germination: return "germination";
    case GrowthStage::vegetative: return "vegetative";
    case GrowthStage::maturity: return "maturity";
    }
    return "vegetative";
}

GrowthStage parse_stage(std::string_view name) {
    if (name == "germination") return GrowthStage::germination;
    if (name == "vegetative") return GrowthStage::vegetative;
    if (name == "maturity") return GrowthStage::maturity;
    throw std::invalid_argument(fmt::format("unknown growth stage '{}'", name));
}

std::string_view urgency_name(Urgency u) {
    switch (u) {
    case Urgency::routine: return "routine";
    case Urgency::elevated: return "elevated";
    case Urgency::alert: return "alert";
    }
    return "routine";
}

namespace {

std::array<std::optional<Range>, kMetricCount> parse_bands(const nlohmann::json& j, std::string_view crop) {
    std::array<std::optional<Range>, kMetricCount> out{};
    for (const auto& [name, iv] : j.items()) {
        auto m = try_parse_metric(name);
        if (!m) {
            throw ConfigError(fmt::format("crop bands: {} has unknown metric '{}'", crop, name));
        }
        if (!iv.is_array() || iv.size() != 2) {
            throw ConfigError(fmt::format("crop bands: {}.{} must be [lo, hi]", crop, name));
        }
        Range r{iv[0].get<double>(), iv[1].get<double>()};
        auto envelope = valid_range(*m);
        if (!(r.lo < r.hi) || !envelope.contains(r.lo) || !envelope.contains(r.hi)) {
            throw ConfigError(fmt::format("crop bands: {}.{} [{}, {}] is empty or outside the sensor range",
                                          crop, name, r.lo, r.hi));
        }
        out[index_of(*m)] = r;
    }
    return out;
}

} // namespace

CropBandTable CropBandTable::parse(std::string_view json_text) {
    CropBandTable table;
    try {
        auto j = nlohmann::json::parse(json_text);
        if (j.at("version").get<int>() != 1) {
            throw ConfigError("crop bands: unsupported version");
        }
        for (const auto& [crop, spec] : j.at("crops").items()) {
            Entry e;
            e.base = parse_bands(spec.at("bands"), crop);
            if (spec.contains("stages")) {
                for (const auto& [stage, overrides] : spec["stages"].items()) {
                    e.stages[parse_stage(stage)] = parse_bands(overrides, crop);
                }
            }
            table.crops_.emplace(crop, std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("crop bands: {}", e.what()));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("crop bands: {}", e.what()));
    }
    return table;
}

CropBandTable CropBandTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open crop band file {}", path.string()));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::optional<CropBand> CropBandTable::find(std::string_view crop, GrowthStage stage) const {
    auto it = crops_.find(crop);
    if (it == crops_.end()) {
        return std::nullopt;
    }
    CropBand band;
    band.crop = std::string(crop);
    band.stage = stage;
    band.bands = it->second.base;
    if (auto st = it->second.stages.find(stage); st != it->second.stages.end()) {
        for (auto m : kAllMetrics) {
            if (st->second[index_of(m)]) {
                band.bands[index_of(m)] = st->second[index_of(m)];
            }
        }
    }
    return band;
}

CropBand CropBandTable::band_for(std::string_view crop, GrowthStage stage) const {
    if (auto b = find(crop, stage)) {
        return *b;
    }
    throw ConfigError(fmt::format("no crop band for '{}'", crop));
}

bool CropBandTable::has_crop(std::string_view crop) const { return crops_.find(crop) != crops_.end(); }

Urgency classify_urgency(const SensorReading& reading, const CropBand& band) {
    Urgency worst = Urgency::routine;
    for (auto m : kAllMetrics) {
        const auto& b = band.band(m);
        if (!b) {
            continue;
        }
        const double v = reading.value(m);
        const double margin = kBandMarginFraction * b->width();
        if (v < b->lo - margin || v > b->hi + margin) {
            return Urgency::alert;
        }
        if (std::abs(v - b->lo) <= margin || std::abs(v - b->hi) <= margin) {
            worst = Urgency::elevated;
        }
    }
    return worst;
}

Urgency classify_urgency(const SensorReading& reading, const CropBandTable& table, std::string_view crop) {
    auto band = table.find(crop);
    if (!band) {
        return Urgency::routine;
    }
    return classify_urgency(reading, *band);
}

} // namespace agri
