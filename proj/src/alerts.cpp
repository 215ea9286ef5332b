#include "agri/alerts.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "agri/pipeline.hpp"
#include "agri/text.hpp"

namespace agri::alerts {

std::string_view alert_kind_name(AlertKind k) {
    switch (k) {
    case AlertKind::irrigation: return "irrigation";
    case AlertKind::waterlogging: return "waterlogging";
    case AlertKind::acidity: return "acidity";
    case AlertKind::alkalinity: return "alkalinity";
    case AlertKind::salinity: return "salinity";
    case AlertKind::nutrient_low: return "nutrient_low";
    case AlertKind::nutrient_high: return "nutrient_high";
    case AlertKind::heat: return "heat";
    case AlertKind::cold: return "cold";
    }
    return "irrigation";
}

namespace {

constexpr std::array<Metric, kMetricCount> kPriority = {Metric::moisture,   Metric::ph,         Metric::ec,
                                                         Metric::nitrogen,   Metric::phosphorus, Metric::potassium,
                                                         Metric::temperature};

std::optional<AlertKind> kind_for(Metric m, bool low) {
    switch (m) {
    case Metric::moisture: return low ? AlertKind::irrigation : AlertKind::waterlogging;
    case Metric::ph: return low ? AlertKind::acidity : AlertKind::alkalinity;
    case Metric::ec: return low ? std::nullopt : std::optional(AlertKind::salinity);
    case Metric::temperature: return low ? AlertKind::cold : AlertKind::heat;
    default: return low ? AlertKind::nutrient_low : AlertKind::nutrient_high;
    }
}

std::string kb_query(const AlertCandidate& c, const std::string& crop) {
    const auto metric = std::string(metric_name(c.metric));
    switch (c.kind) {
    case AlertKind::irrigation: return "irrigation water stress scheduling " + crop;
    case AlertKind::waterlogging: return "waterlogging drainage " + crop;
    case AlertKind::acidity: return "soil acidity lime neem ph " + crop;
    case AlertKind::alkalinity: return "alkaline soil gypsum ph " + crop;
    case AlertKind::salinity: return "salinity leaching ec " + crop;
    case AlertKind::nutrient_low: return metric + " deficiency fertilizer " + crop;
    case AlertKind::nutrient_high: return "excess " + metric + " fertilizer " + crop;
    case AlertKind::heat: return "heat stress " + crop;
    case AlertKind::cold: return "cold frost protection " + crop;
    }
    return crop;
}

std::string action_sentence(AlertKind k, const std::string& crop) {
    switch (k) {
    case AlertKind::irrigation: return fmt::format("Irrigate the {} field within the next day to avoid water stress.", crop);
    case AlertKind::waterlogging: return "Open the field drains and pause irrigation until the soil dries.";
    case AlertKind::acidity:
        return "Apply agricultural lime to raise the soil pH; neem-based organic amendments can also help.";
    case AlertKind::alkalinity: return "Apply gypsum or organic matter to bring the soil pH down.";
    case AlertKind::salinity: return "Leach the salts with a heavy irrigation where drainage allows.";
    case AlertKind::nutrient_low: return "Plan a top-dressing of the deficient nutrient.";
    case AlertKind::nutrient_high: return "Skip the next fertilizer application for this nutrient.";
    case AlertKind::heat: return "Irrigate in the evening and avoid field work in the afternoon heat.";
    case AlertKind::cold: return "Protect young plants and irrigate lightly before a cold night.";
    }
    return {};
}

pipeline::EnrichedContext alert_context(const SensorReading& reading, const FarmProfile& profile,
                                        const AlertCandidate& c, const std::optional<feeds::ForecastWindow>& forecast,
                                        AlertDeps& deps) {
    pipeline::EnrichedContext ctx;
    ctx.profile = profile;
    ctx.now = reading.timestamp;
    ctx.requirement.reply_language = profile.language;
    const auto label = std::string(metric_label(c.metric));
    const Citation rc{CitationKind::reading, reading_id(reading)};
    ctx.extra_facts.push_back(
        {fmt::format("Latest {} is {}, outside the {} range of {} to {}. {}", label,
                     pipeline::format_metric_value(c.metric, c.observed), profile.primary_crop(),
                     pipeline::format_metric_value(c.metric, c.band.lo),
                     pipeline::format_metric_value(c.metric, c.band.hi), rc.marker()),
         {rc}});
    const Timestamp from = reading.timestamp - kSecondsPerDay;
    const Timestamp to = reading.timestamp + 1;
    auto recent = deps.store.window(profile.farm_id, c.metric, from, to);
    if (recent.size() > 1) {
        const Citation wc{CitationKind::window, fmt::format("{}@{}-{}", metric_name(c.metric), from, to)};
        ctx.extra_facts.push_back(
            {fmt::format("Over the last day {} ranged from {} to {}. {}", label,
                         pipeline::format_metric_value(c.metric, store::aggregate(recent, store::AggOp::min)),
                         pipeline::format_metric_value(c.metric, store::aggregate(recent, store::AggOp::max)),
                         wc.marker()),
             {wc}});
    }
    if (c.kind == AlertKind::irrigation) {
        if (forecast) {
            auto w = *forecast;
            if (w.days.size() > static_cast<std::size_t>(deps.policy.rain_days)) {
                w.days.resize(static_cast<std::size_t>(deps.policy.rain_days));
            }
            ctx.forecast = std::move(w);
        } else {
            ctx.absent.emplace_back("forecast");
        }
    }
    if (deps.retriever != nullptr) {
        try {
            ctx.passages = deps.retriever->search(kb_query(c, profile.primary_crop()), deps.policy.passages);
        } catch (const std::exception&) {
            ctx.absent.emplace_back("knowledge");
        }
    }
    return ctx;
}

std::string template_recommendation(const pipeline::EnrichedContext& ctx, const AlertCandidate& c) {
    std::string out;
    for (const auto& f : ctx.facts()) {
        out += out.empty() ? f.text : " " + f.text;
    }
    out += " " + action_sentence(c.kind, ctx.profile.primary_crop());
    if (!ctx.passages.empty()) {
        const auto& p = ctx.passages.front().passage;
        if (auto s = text::lead_sentence(p.text); !s.empty()) {
            out += " " + s + " " + p.ref().marker();
        }
    }
    for (const auto& g : ctx.gaps()) {
        out += " " + g;
    }
    return out;
}

std::string model_recommendation(const pipeline::EnrichedContext& ctx, const AlertCandidate& c, AlertDeps& deps) {
    if (deps.backend == nullptr || deps.templates == nullptr) {
        return {};
    }
    llm::TemplateVars vars;
    std::string facts;
    for (const auto& f : ctx.facts()) {
        facts += "- " + f.text + "\n";
    }
    std::string passages;
    for (const auto& sp : ctx.passages) {
        passages += fmt::format("{} ({}) {}\n", sp.passage.ref().marker(), sp.passage.citation(), sp.passage.text);
    }
    std::string gaps;
    for (const auto& g : ctx.gaps()) {
        gaps += "- " + g + "\n";
    }
    vars["kind"] = std::string(alert_kind_name(c.kind));
    vars["metric"] = std::string(metric_label(c.metric));
    vars["crop"] = ctx.profile.primary_crop();
    vars["stage"] = std::string(stage_name(ctx.profile.stage_or_default()));
    vars["facts"] = text::trim(facts);
    vars["passages"] = text::trim(passages);
    vars["gaps"] = text::trim(gaps);
    auto draft = deps.backend->complete(deps.templates->render(llm::Stage::alert_assess, vars));
    if (!pipeline::check_grounding(draft, ctx.supports(), true).ok()) {
        return {};
    }
    return draft;
}

} // namespace

std::vector<AlertCandidate> rule_gate(const SensorReading& reading, const CropBand& band,
                                      const std::optional<feeds::ForecastWindow>& forecast,
                                      const AlertPolicy& policy) {
    std::vector<AlertCandidate> out;
    for (auto m : kPriority) {
        const auto& r = band.band(m);
        if (!r) {
            continue;
        }
        const double v = reading.value(m);
        if (r->contains(v)) {
            continue;
        }
        const bool low = v < r->lo;
        auto kind = kind_for(m, low);
        if (!kind) {
            continue;
        }
        if (*kind == AlertKind::irrigation && forecast &&
            forecast->rain_total(static_cast<std::size_t>(policy.rain_days)) >= policy.dry_rain_mm) {
            continue;
        }
        const double margin = kBandMarginFraction * r->width();
        const double excess = low ? r->lo - v : v - r->hi;
        out.push_back({m, *kind, v, *r, excess > margin ? Severity::critical : Severity::warning});
    }
    return out;
}

std::optional<Alert> assess_alert(const SensorReading& reading, const FarmProfile& profile, const CropBand& band,
                                  const std::optional<feeds::ForecastWindow>& forecast, AlertDeps& deps) noexcept {
    try {
        std::optional<AlertCandidate> chosen;
        for (const auto& c : rule_gate(reading, band, forecast, deps.policy)) {
            auto last = deps.store.last_alert(profile.farm_id, c.metric);
            if (last && reading.timestamp - last->issued_at < deps.policy.cooldown_s) {
                continue;
            }
            chosen = c;
            break;
        }
        if (!chosen) {
            return std::nullopt;
        }
        auto ctx = alert_context(reading, profile, *chosen, forecast, deps);

        std::string draft;
        try {
            draft = model_recommendation(ctx, *chosen, deps);
        } catch (const std::exception&) {
            draft.clear();
        }
        if (draft.empty()) {
            draft = template_recommendation(ctx, *chosen);
        }

        Alert a;
        a.farm_id = profile.farm_id;
        a.metric = chosen->metric;
        a.observed = chosen->observed;
        a.band = chosen->band;
        a.severity = chosen->severity;
        a.citations = pipeline::check_grounding(draft, ctx.supports(), false).citations;
        a.recommendation = pipeline::strip_citations(draft);
        a.issued_at = reading.timestamp;

        pipeline::AdvisoryReply r;
        r.text_en = a.recommendation;
        try {
            pipeline::localize(r, profile.language, deps.translator);
            a.text = r.text;
            a.language = profile.language;
        } catch (const std::exception&) {
            a.text = a.recommendation;
            a.language = Language::en;
        }
        return a;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

AlertMonitor::AlertMonitor(store::Store& store, const CropBandTable& bands, feeds::FeedProvider* feeds,
                           AlertDeps deps)
    : store_(store), bands_(bands), feeds_(feeds), deps_(std::move(deps)) {}

std::optional<Alert> AlertMonitor::on_reading(const std::string& farm_id, const SensorReading& reading) noexcept {
    try {
        auto profile = store_.farm(farm_id);
        if (!profile || profile->crops.empty()) {
            return std::nullopt;
        }
        auto band = bands_.find(profile->primary_crop(), profile->stage_or_default());
        if (!band) {
            return std::nullopt;
        }
        std::optional<feeds::ForecastWindow> forecast;
        const auto& moisture = band->band(Metric::moisture);
        if (feeds_ != nullptr && moisture && reading.value(Metric::moisture) < moisture->lo) {
            try {
                forecast = feeds_->get_forecast(profile->location, deps_.policy.rain_days);
            } catch (const std::exception&) {
                forecast.reset();
            }
        }
        auto alert = assess_alert(reading, *profile, *band, forecast, deps_);
        if (alert) {
            store_.append_alert(*alert);
        }
        return alert;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace agri::alerts
