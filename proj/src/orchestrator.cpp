#include "agri/orchestrator.hpp"

#include <cmath>

#include <fmt/format.h>

#include "agri/stats.hpp"

namespace agri::pipeline {

nlohmann::json to_json(const StageRecord& r) {
    return {{"farm_id", r.farm_id},
            {"stage", r.stage},
            {"ms", std::round(r.ms * 1000.0) / 1000.0},
            {"outcome", r.outcome},
            {"attempts", r.attempts}};
}

void StageLog::record(StageRecord r) {
    std::lock_guard lock(mu_);
    if (sink_ != nullptr) {
        *sink_ << to_json(r).dump() << '\n';
        sink_->flush();
    }
    records_.push_back(std::move(r));
}

std::vector<StageRecord> StageLog::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

Orchestrator::Orchestrator(OrchestratorDeps deps) : deps_(std::move(deps)) {}

std::mutex& Orchestrator::farm_lock(const std::string& farm_id) {
    std::lock_guard lock(locks_mu_);
    auto& m = locks_[farm_id];
    if (!m) {
        m = std::make_unique<std::mutex>();
    }
    return *m;
}

template <typename F>
auto Orchestrator::stage(const std::string& farm_id, const char* name, RetryRunner& retry, F&& fn)
    -> decltype(fn()) {
    const double start = deps_.time.now();
    int attempts = 1;
    auto log = [&](const char* outcome) {
        if (deps_.log != nullptr) {
            deps_.log->record({farm_id, name, (deps_.time.now() - start) * 1000.0, outcome, attempts});
        }
    };
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            retry.run(fn, &attempts);
            log(attempts > 1 ? "retried" : "ok");
        } else {
            auto out = retry.run(fn, &attempts);
            if constexpr (std::is_same_v<decltype(out), EnrichedContext>) {
                log(!out.absent.empty() ? "degraded" : attempts > 1 ? "retried" : "ok");
            } else {
                log(attempts > 1 ? "retried" : "ok");
            }
            return out;
        }
    } catch (...) {
        log("failed");
        throw;
    }
}

AdvisoryReply Orchestrator::handle(const FarmProfile& profile, std::string_view body, Timestamp ts,
                                   MessageKind kind) {
    std::lock_guard farm_guard(farm_lock(profile.farm_id));
    deps_.store.append_chat({profile.farm_id, Direction::inbound, ts, std::string(body), profile.language, kind, {}});

    RetryRunner retry(deps_.retry, deps_.time);
    AdvisoryReply reply;
    try {
        auto question = stage(profile.farm_id, "translate_in", retry, [&] {
            return deps_.translator.translate(body, profile.language, Language::en);
        });
        auto req = stage(profile.farm_id, "parse_intent", retry, [&] { return deps_.intent.parse(question); });
        req.reply_language = profile.language;
        EnrichSources sources{deps_.store, deps_.feeds, deps_.retriever, deps_.kb_k};
        auto ctx = stage(profile.farm_id, "enrich", retry,
                         [&] { return enrich(req, profile, question, ts, sources, retry); });
        SynthesisDeps synth{deps_.backend, deps_.translator, deps_.templates};
        reply = stage(profile.farm_id, "synthesize", retry, [&] { return draft_reply(ctx, synth); });
        stage(profile.farm_id, "translate_out", retry,
              [&] { localize(reply, profile.language, deps_.translator); });
    } catch (const UnparseableIntent&) {
        reply = AdvisoryReply{};
        reply.status = true;
        reply.text = status_message(StatusKind::clarify, profile.language);
        reply.text_en = status_message(StatusKind::clarify, Language::en);
    } catch (const std::exception&) {
        reply = AdvisoryReply{};
        reply.status = true;
        reply.text = status_message(StatusKind::unavailable, profile.language);
        reply.text_en = status_message(StatusKind::unavailable, Language::en);
    }
    reply.language = profile.language;
    reply.generated_at = ts;
    deps_.store.append_chat(
        {profile.farm_id, Direction::outbound, ts, reply.text, profile.language, MessageKind::text, reply.citations});
    return reply;
}

AdvisoryReply Orchestrator::daily_summary(const FarmProfile& profile, Timestamp now) {
    std::lock_guard farm_guard(farm_lock(profile.farm_id));
    RetryRunner retry(deps_.retry, deps_.time);

    DataRequirement req;
    req.forecast_days = 2;
    req.reply_language = profile.language;
    EnrichedContext ctx;
    try {
        ctx = enrich(req, profile, "Daily farm summary", now, {deps_.store, deps_.feeds, nullptr, 0}, retry);
    } catch (const std::exception&) {
        ctx = EnrichedContext{};
        ctx.requirement = req;
        ctx.profile = profile;
        ctx.now = now;
        ctx.absent.emplace_back("forecast");
    }
    ctx.question_en = "Daily farm summary";

    const Timestamp day_from = now - kSecondsPerDay;
    const Timestamp week_from = now - 7 * kSecondsPerDay;
    for (auto m : kAllMetrics) {
        auto day = deps_.store.window(profile.farm_id, m, day_from, now + 1);
        if (!day.empty()) {
            ctx.readings.push_back({m, Window::last_24h, std::move(day), day_from, now + 1});
        }
        auto week = deps_.store.window(profile.farm_id, m, week_from, now + 1);
        if (week.size() < 2) {
            continue;
        }
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& s : week) {
            xs.push_back(static_cast<double>(s.ts - week.front().ts) / kSecondsPerDay);
            ys.push_back(s.value);
        }
        try {
            const double slope = stats::ols(xs, ys).slope;
            if (std::abs(slope) > store::slope_threshold(m)) {
                const Citation wc{CitationKind::window, fmt::format("{}@{}-{}", metric_name(m), week_from, now + 1)};
                ctx.extra_facts.push_back({fmt::format("Over the last week {} has been {} by about {} per day. {}",
                                                       metric_label(m), slope > 0 ? "rising" : "falling",
                                                       format_metric_value(m, std::abs(slope)), wc.marker()),
                                           {wc}});
            }
        } catch (const InsufficientData&) {
        }
    }
    if (!ctx.consumed_sensor()) {
        ctx.absent.emplace_back("No sensor data was received in the last day.");
    }

    SynthesisDeps synth{deps_.backend, deps_.translator, deps_.templates};
    AdvisoryReply reply;
    try {
        reply = retry.run([&] { return draft_reply(ctx, synth, llm::Stage::summary); });
    } catch (const std::exception&) {
        const auto text = template_reply(ctx);
        reply.text_en = strip_citations(text);
        reply.citations = extract_citations(text);
        reply.fallback = true;
    }
    reply.generated_at = now;
    try {
        localize(reply, profile.language, deps_.translator);
    } catch (const std::exception&) {
        reply.status = true;
        reply.language = profile.language;
        reply.text = status_message(StatusKind::unavailable, profile.language);
    }
    deps_.store.append_chat(
        {profile.farm_id, Direction::outbound, now, reply.text, profile.language, MessageKind::text, reply.citations});
    return reply;
}

// ---------------------------------------------------------------------------

SummaryScheduler::SummaryScheduler(store::Store& store, Orchestrator& orchestrator, Sink sink, Timestamp tick_s)
    : store_(store), orchestrator_(orchestrator), sink_(std::move(sink)), tick_s_(tick_s) {}

std::size_t SummaryScheduler::tick(Timestamp now) {
    const Timestamp since = last_.value_or(now - tick_s_);
    last_ = now;
    std::size_t produced = 0;
    for (const auto& farm : store_.farms()) {
        if (!farm.active) {
            continue;
        }
        const Timestamp offset = static_cast<Timestamp>(farm.utc_offset_minutes) * 60;
        const Timestamp local_midnight = ((now + offset) / kSecondsPerDay) * kSecondsPerDay;
        for (const auto& hhmm : farm.summary_times) {
            int minutes = 0;
            try {
                minutes = parse_time_of_day(hhmm);
            } catch (const std::invalid_argument&) {
                continue;
            }
            for (Timestamp day : {local_midnight - kSecondsPerDay, local_midnight}) {
                const Timestamp due = day + minutes * 60 - offset;
                if (due <= since || due > now) {
                    continue;
                }
                auto key = std::make_tuple(farm.farm_id, format_date(day), minutes);
                if (!sent_.insert(key).second) {
                    continue;
                }
                auto reply = orchestrator_.daily_summary(farm, now);
                if (sink_) {
                    sink_(farm, reply);
                }
                ++produced;
            }
        }
    }
    return produced;
}

} // namespace agri::pipeline
