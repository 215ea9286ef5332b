#include "agri/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "agri/script.hpp"
#include "agri/stats.hpp"
#include "agri/text.hpp"

namespace agri::pipeline {

// ---------------------------------------------------------------------------
// Retry
// ---------------------------------------------------------------------------

RetryRunner::RetryRunner() { policy_.retries = 0; }

RetryRunner::RetryRunner(RetryPolicy policy, TimeSource& time)
    : policy_(policy), time_(&time), start_(time.now()) {}

double RetryRunner::elapsed() const { return time_ == nullptr ? 0.0 : time_->now() - start_; }

void RetryRunner::check_budget() const {
    if (time_ != nullptr && elapsed() > policy_.budget_s) {
        throw PipelineExhausted(fmt::format("time budget of {} s exhausted", policy_.budget_s));
    }
}

void RetryRunner::backoff(int attempt) {
    if (time_ == nullptr) {
        return;
    }
    const double delay = policy_.base_delay_s * std::pow(policy_.factor, attempt - 1);
    if (elapsed() + delay > policy_.budget_s) {
        throw PipelineExhausted(fmt::format("retry backoff would exceed the {} s budget", policy_.budget_s));
    }
    time_->sleep(delay);
}

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

std::string format_metric_value(Metric m, double v) {
    switch (m) {
    case Metric::moisture: return text::format_number(v) + "%";
    case Metric::ph: return text::format_number(v, 2);
    case Metric::ec: return text::format_number(v, 0) + " µS/cm";
    case Metric::temperature: return text::format_number(v) + " °C";
    default: return text::format_number(v) + " mg/kg";
    }
}

namespace {

std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') {
        s[0] = static_cast<char>(s[0] - 'a' + 'A');
    }
    return s;
}

Citation reading_citation(const store::Sample& s) {
    return {CitationKind::reading, fmt::format("{}#{}", s.node_id, s.seq)};
}

Citation window_citation(Metric m, Timestamp from, Timestamp to) {
    return {CitationKind::window, fmt::format("{}@{}-{}", metric_name(m), from, to)};
}

std::string window_phrase(Window w) {
    return w == Window::last_24h ? "the last day" : "the last 7 days";
}

std::string with_markers(std::string sentence, const std::vector<Citation>& cites) {
    for (const auto& c : cites) {
        sentence += " " + c.marker();
    }
    return sentence;
}

void reading_facts(const ReadingFact& rf, std::vector<Fact>& out) {
    if (rf.samples.empty()) {
        return;
    }
    const auto& last = rf.samples.back();
    const auto label = std::string(metric_label(rf.metric));
    if (rf.window != Window::latest && rf.samples.size() > 1) {
        auto cite = window_citation(rf.metric, rf.from, rf.to);
        const double avg = store::aggregate(rf.samples, store::AggOp::mean);
        const double lo = store::aggregate(rf.samples, store::AggOp::min);
        const double hi = store::aggregate(rf.samples, store::AggOp::max);
        out.push_back({fmt::format("Over {} {} averaged {}, ranging from {} to {}. {}", window_phrase(rf.window),
                                   label, format_metric_value(rf.metric, avg), format_metric_value(rf.metric, lo),
                                   format_metric_value(rf.metric, hi), cite.marker()),
                       {cite}});
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& s : rf.samples) {
            xs.push_back(static_cast<double>(s.ts - rf.samples.front().ts) / kSecondsPerDay);
            ys.push_back(s.value);
        }
        try {
            const double slope = stats::ols(xs, ys).slope;
            // A one-day window is dominated by the daily cycle; only weekly windows report a rate.
            if (rf.window == Window::last_7d && std::abs(slope) > store::slope_threshold(rf.metric)) {
                out.push_back({fmt::format("{} is {} by about {} per day. {}", capitalize(label),
                                           slope > 0 ? "rising" : "falling",
                                           format_metric_value(rf.metric, std::abs(slope)), cite.marker()),
                               {cite}});
            }
        } catch (const InsufficientData&) {
        }
    }
    auto cite = reading_citation(last);
    out.push_back({fmt::format("Latest {} is {}. {}", label, format_metric_value(rf.metric, last.value), cite.marker()),
                   {cite}});
}

} // namespace

bool EnrichedContext::consumed_sensor() const {
    return std::any_of(readings.begin(), readings.end(), [](const ReadingFact& r) { return !r.samples.empty(); });
}

bool EnrichedContext::gathered_any() const {
    return consumed_sensor() || forecast.has_value() || (prices.has_value() && !prices->points.empty()) ||
           !passages.empty() || !extra_facts.empty();
}

std::vector<Fact> EnrichedContext::facts() const {
    std::vector<Fact> out;
    for (const auto& rf : readings) {
        reading_facts(rf, out);
    }
    for (const auto& f : extra_facts) {
        out.push_back(f);
    }
    if (forecast && !forecast->days.empty()) {
        auto cite = forecast->ref();
        const auto n = forecast->days.size();
        const double rain = forecast->rain_total(n);
        double t_max = -std::numeric_limits<double>::infinity();
        for (const auto& d : forecast->days) {
            t_max = std::max(t_max, d.t_max);
        }
        if (rain < 0.05) {
            out.push_back({fmt::format("No rain is expected over the next {} days. {}", n, cite.marker()), {cite}});
        } else {
            out.push_back({fmt::format("About {} mm of rain is expected over the next {} days. {}",
                                       text::format_number(rain), n, cite.marker()),
                           {cite}});
        }
        out.push_back({fmt::format("Forecast daytime highs reach {} °C. {}", text::format_number(t_max), cite.marker()),
                       {cite}});
    }
    if (prices && !prices->points.empty()) {
        auto cite = prices->ref();
        const auto& last = prices->points.back();
        std::string sentence = fmt::format("The {} market price was {} {} on {}", prices->crop,
                                           text::format_number(last.price, 2), last.currency, last.date);
        if (prices->points.size() > 1) {
            try {
                const double slope = prices->trend().slope;
                sentence += fmt::format(", {} about {} {} per day over the last {} days",
                                        slope >= 0 ? "rising" : "falling", text::format_number(std::abs(slope), 2),
                                        last.currency, prices->points.size());
            } catch (const InsufficientData&) {
            }
        }
        out.push_back({with_markers(sentence + ".", {cite}), {cite}});
    }
    return out;
}

std::vector<std::string> EnrichedContext::gaps() const {
    std::vector<std::string> out;
    for (const auto& rf : readings) {
        if (rf.samples.empty()) {
            out.push_back(fmt::format("No recent {} readings are available.", metric_label(rf.metric)));
        }
    }
    for (const auto& a : absent) {
        if (a == "forecast") {
            out.emplace_back("The weather forecast is currently unavailable.");
        } else if (a == "market") {
            out.emplace_back("Market prices are currently unavailable.");
        } else if (a == "knowledge") {
            out.emplace_back("The extension manual could not be searched.");
        } else {
            out.push_back(a);
        }
    }
    return out;
}

std::map<Citation, std::string> EnrichedContext::supports() const {
    std::map<Citation, std::string> out;
    for (const auto& f : facts()) {
        for (const auto& c : f.citations) {
            auto& s = out[c];
            s += s.empty() ? f.text : "\n" + f.text;
        }
    }
    for (const auto& sp : passages) {
        auto& s = out[sp.passage.ref()];
        s += s.empty() ? sp.passage.text : "\n" + sp.passage.text;
    }
    return out;
}

EnrichedContext enrich(const DataRequirement& req, const FarmProfile& profile, std::string_view question_en,
                       Timestamp now, const EnrichSources& sources, RetryRunner& retry) {
    EnrichedContext ctx;
    ctx.requirement = req;
    ctx.profile = profile;
    ctx.question_en = std::string(question_en);
    ctx.now = now;
    ctx.history = retry.run([&] { return sources.store.recent_chat(profile.farm_id, now, 7.0); });

    for (const auto& mr : req.metrics) {
        ReadingFact rf;
        rf.metric = mr.metric;
        rf.window = mr.window;
        if (mr.window == Window::latest) {
            if (auto s = retry.run([&] { return sources.store.latest(profile.farm_id, mr.metric); })) {
                rf.samples.push_back(*s);
                rf.from = rf.to = s->ts;
            }
        } else {
            rf.from = now - window_seconds(mr.window);
            rf.to = now + 1;
            rf.samples = retry.run([&] { return sources.store.window(profile.farm_id, mr.metric, rf.from, rf.to); });
        }
        ctx.readings.push_back(std::move(rf));
    }

    if (req.forecast_days > 0) {
        if (sources.feeds == nullptr) {
            ctx.absent.emplace_back("forecast");
        } else {
            try {
                ctx.forecast =
                    retry.run([&] { return sources.feeds->get_forecast(profile.location, req.forecast_days); });
            } catch (const RetryableError&) {
                ctx.absent.emplace_back("forecast");
            }
        }
    }

    if (req.needs_market) {
        bool got = false;
        if (sources.feeds != nullptr && !profile.crops.empty()) {
            try {
                auto series = retry.run([&] { return sources.feeds->get_prices(profile.primary_crop(), 14); });
                if (!series.points.empty()) {
                    ctx.prices = std::move(series);
                    got = true;
                }
            } catch (const RetryableError&) {
            }
        }
        if (!got) {
            ctx.absent.emplace_back("market");
        }
    }

    if (req.kb_query && !text::trim(*req.kb_query).empty()) {
        if (sources.retriever == nullptr) {
            ctx.absent.emplace_back("knowledge");
        } else {
            std::string query = *req.kb_query;
            for (const auto& crop : profile.crops) {
                if (!text::contains(text::to_lower(query), text::to_lower(crop))) {
                    query += " " + crop;
                }
            }
            ctx.passages = sources.retriever->search(query, sources.kb_k);
        }
    }
    return ctx;
}

// ---------------------------------------------------------------------------
// Grounding
// ---------------------------------------------------------------------------

namespace {

struct MarkerSpan {
    std::size_t begin;
    std::size_t end;
    Citation citation;
};

std::vector<MarkerSpan> find_markers(std::string_view s) {
    std::vector<MarkerSpan> out;
    for (std::size_t i = 0; i + 3 < s.size(); ++i) {
        if (s[i] != '[' || s[i + 2] != ':') {
            continue;
        }
        auto kind = citation_kind_from_tag(s[i + 1]);
        if (!kind) {
            continue;
        }
        auto close = s.find(']', i + 3);
        if (close == std::string_view::npos || close == i + 3) {
            continue;
        }
        auto id = s.substr(i + 3, close - i - 3);
        if (std::any_of(id.begin(), id.end(), [](char c) { return c == ' ' || c == '[' || c == '\n'; })) {
            continue;
        }
        out.push_back({i, close + 1, {*kind, std::string(id)}});
        i = close;
    }
    return out;
}

bool mentions_metric(std::string_view sentence) {
    static const std::vector<std::string> kKeywords{"moisture", "ph",         "ec",        "conductivity",
                                                    "salinity", "temperature", "nitrogen", "phosphorus",
                                                    "potassium", "npk"};
    for (const auto& tok : text::tokenize(sentence)) {
        if (std::find(kKeywords.begin(), kKeywords.end(), tok) != kKeywords.end()) {
            return true;
        }
    }
    return false;
}

bool number_supported(double v, const std::vector<double>& pool) {
    return std::any_of(pool.begin(), pool.end(),
                       [v](double p) { return std::abs(std::abs(p) - std::abs(v)) <= 0.051; });
}

} // namespace

std::vector<Citation> extract_citations(std::string_view s) {
    std::vector<Citation> out;
    for (auto& m : find_markers(s)) {
        if (std::find(out.begin(), out.end(), m.citation) == out.end()) {
            out.push_back(std::move(m.citation));
        }
    }
    return out;
}

std::string strip_citations(std::string_view s) {
    std::string out;
    std::size_t pos = 0;
    for (const auto& m : find_markers(s)) {
        out.append(s.substr(pos, m.begin - pos));
        pos = m.end;
    }
    out.append(s.substr(pos));
    std::string cleaned;
    for (std::size_t i = 0; i < out.size(); ++i) {
        char c = out[i];
        if (c == ' ' && (cleaned.empty() || cleaned.back() == ' ' || cleaned.back() == '\n')) {
            continue;
        }
        if ((c == '.' || c == ',' || c == '\n') && !cleaned.empty() && cleaned.back() == ' ') {
            cleaned.pop_back();
        }
        cleaned.push_back(c);
    }
    return text::trim(cleaned);
}

GroundingResult check_grounding(std::string_view draft, const std::map<Citation, std::string>& supports,
                                bool require_citation) {
    GroundingResult r;
    if (text::trim(strip_citations(draft)).empty()) {
        r.violations.emplace_back("empty reply");
        return r;
    }
    for (const auto& c : extract_citations(draft)) {
        if (supports.count(c) == 0) {
            r.violations.push_back(fmt::format("citation {} does not match any gathered input", c.marker()));
        } else {
            r.citations.push_back(c);
        }
    }
    for (const auto& sentence : text::split_sentences(draft)) {
        const auto body = strip_citations(sentence);
        const auto numbers = text::extract_numbers(body);
        if (numbers.empty() || !mentions_metric(body)) {
            continue;
        }
        const auto cites = extract_citations(sentence);
        if (cites.empty()) {
            r.violations.push_back(fmt::format("uncited measurement claim: \"{}\"", body));
            continue;
        }
        std::vector<double> pool;
        for (const auto& c : cites) {
            if (auto it = supports.find(c); it != supports.end()) {
                auto nums = text::extract_numbers(it->second);
                pool.insert(pool.end(), nums.begin(), nums.end());
            }
        }
        for (double v : numbers) {
            if (!number_supported(v, pool)) {
                r.violations.push_back(
                    fmt::format("value {} in \"{}\" is not backed by its citations", text::format_number(v, 2), body));
            }
        }
    }
    if (require_citation && r.citations.empty()) {
        r.violations.emplace_back("reply cites none of the gathered inputs");
    }
    return r;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

nlohmann::json to_json(const AdvisoryReply& r) {
    nlohmann::json cites = nlohmann::json::array();
    for (const auto& c : r.citations) {
        cites.push_back(agri::to_json(c));
    }
    return {{"text", r.text},         {"text_en", r.text_en},   {"language", language_code(r.language)},
            {"citations", cites},     {"generated_at", r.generated_at}, {"fallback", r.fallback},
            {"status", r.status},     {"grounding_retries", r.grounding_retries}};
}

namespace {

llm::TemplateVars context_vars(const EnrichedContext& ctx) {
    llm::TemplateVars vars;
    std::string facts;
    for (const auto& f : ctx.facts()) {
        facts += "- " + f.text + "\n";
    }
    std::string gaps;
    for (const auto& g : ctx.gaps()) {
        gaps += "- " + g + "\n";
    }
    std::string passages;
    for (const auto& sp : ctx.passages) {
        passages += fmt::format("{} ({}) {}\n", sp.passage.ref().marker(), sp.passage.citation(), sp.passage.text);
    }
    std::string history;
    const std::size_t keep = 6;
    const std::size_t skip = ctx.history.size() > keep ? ctx.history.size() - keep : 0;
    for (std::size_t i = skip; i < ctx.history.size(); ++i) {
        const auto& h = ctx.history[i];
        history += fmt::format("{}: {}\n", h.direction == Direction::inbound ? "farmer" : "advisor", h.body);
    }
    std::string crops;
    for (const auto& c : ctx.profile.crops) {
        crops += crops.empty() ? c : ", " + c;
    }
    vars["question"] = ctx.question_en;
    vars["facts"] = text::trim(facts);
    vars["gaps"] = text::trim(gaps);
    vars["passages"] = text::trim(passages);
    vars["history"] = text::trim(history);
    vars["crop"] = ctx.profile.crops.empty() ? std::string{} : ctx.profile.primary_crop();
    vars["crops"] = crops;
    vars["stage"] = std::string(stage_name(ctx.profile.stage_or_default()));
    vars["date"] = format_date(ctx.now);
    return vars;
}

} // namespace

std::string template_reply(const EnrichedContext& ctx) {
    std::vector<std::string> parts;
    auto facts = ctx.facts();
    if (!facts.empty()) {
        std::string s = "Here is what your farm data shows:";
        for (const auto& f : facts) {
            s += " " + f.text;
        }
        parts.push_back(s);
    }
    if (!ctx.passages.empty()) {
        std::string s = "From the extension manual:";
        for (std::size_t i = 0; i < ctx.passages.size() && i < 2; ++i) {
            const auto& p = ctx.passages[i].passage;
            if (auto first = text::lead_sentence(p.text); !first.empty()) {
                s += " " + first + " " + p.ref().marker();
            }
        }
        parts.push_back(s);
    }
    for (const auto& g : ctx.gaps()) {
        parts.push_back(g);
    }
    if (facts.empty() && ctx.passages.empty()) {
        parts.emplace_back("I could not find information to answer this question.");
    }
    parts.emplace_back("Please confirm with your local extension officer before acting.");
    std::string out;
    for (const auto& p : parts) {
        out += out.empty() ? p : " " + p;
    }
    return out;
}

AdvisoryReply draft_reply(const EnrichedContext& ctx, SynthesisDeps& deps, llm::Stage stage) {
    const auto supports = ctx.supports();
    const bool require = ctx.gathered_any();
    auto request = deps.templates.render(stage, context_vars(ctx));

    AdvisoryReply reply;
    reply.generated_at = ctx.now;
    reply.language = Language::en;

    auto draft = deps.backend.complete(request);
    auto check = check_grounding(draft, supports, require);
    if (!check.ok()) {
        reply.grounding_retries = 1;
        std::string why;
        for (const auto& v : check.violations) {
            why += "- " + v + "\n";
        }
        request.user_payload += fmt::format(
            "\n<correction>\nThe previous draft was rejected:\n{}Use only the facts and passages above and cite "
            "each one.\n</correction>",
            why);
        draft = deps.backend.complete(request);
        check = check_grounding(draft, supports, require);
    }
    if (!check.ok()) {
        draft = template_reply(ctx);
        check = check_grounding(draft, supports, false);
        reply.fallback = true;
    }
    reply.citations = check.citations;
    reply.grounded = check.ok();
    reply.consumed_sensor = ctx.consumed_sensor();
    for (const auto& [cite, support] : supports) {
        reply.contexts.push_back(support);
    }
    reply.text_en = strip_citations(draft);
    reply.text = reply.text_en;
    return reply;
}

void localize(AdvisoryReply& reply, Language lang, llm::Translator& translator) {
    reply.language = lang;
    if (lang == Language::en) {
        reply.text = reply.text_en;
        return;
    }
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto translated = translator.translate(reply.text_en, Language::en, lang);
        if (llm::validate_script(translated, lang).valid) {
            reply.text = std::move(translated);
            return;
        }
    }
    throw ScriptMismatch(fmt::format("translation into {} is not in the expected script", language_code(lang)));
}

AdvisoryReply synthesize(const EnrichedContext& ctx, SynthesisDeps& deps) {
    auto reply = draft_reply(ctx, deps);
    localize(reply, ctx.requirement.reply_language, deps.translator);
    return reply;
}

bool citation_resolves(const Citation& c, const store::Store& store, const std::string& farm_id,
                       const kb::Retriever* retriever, const std::optional<feeds::ForecastWindow>& forecast,
                       const std::optional<feeds::PriceSeries>& prices) {
    switch (c.kind) {
    case CitationKind::reading: {
        auto hash = c.id.rfind('#');
        if (hash == std::string::npos) {
            return false;
        }
        try {
            const auto node = c.id.substr(0, hash);
            const auto seq = std::stoull(c.id.substr(hash + 1));
            const auto owner = store.farm_for_node(node);
            return store.reading(node, seq).has_value() && (!owner || *owner == farm_id);
        } catch (const std::exception&) {
            return false;
        }
    }
    case CitationKind::window: {
        auto at = c.id.find('@');
        auto dash = c.id.find('-', at == std::string::npos ? 0 : at + 1);
        if (at == std::string::npos || dash == std::string::npos) {
            return false;
        }
        auto metric = try_parse_metric(c.id.substr(0, at));
        if (!metric) {
            return false;
        }
        try {
            const Timestamp from = std::stoll(c.id.substr(at + 1, dash - at - 1));
            const Timestamp to = std::stoll(c.id.substr(dash + 1));
            return !store.window(farm_id, *metric, from, to).empty();
        } catch (const std::exception&) {
            return false;
        }
    }
    case CitationKind::passage: {
        if (retriever == nullptr) {
            return false;
        }
        try {
            auto [doc, chunk] = kb::parse_passage_id(c.id);
            (void)retriever->find(doc, chunk);
            return true;
        } catch (const UnknownPassage&) {
            return false;
        }
    }
    case CitationKind::forecast: return forecast.has_value() && forecast->ref() == c;
    case CitationKind::market: return prices.has_value() && prices->ref() == c;
    }
    return false;
}

std::string status_message(StatusKind kind, Language lang) {
    switch (kind) {
    case StatusKind::unavailable:
        switch (lang) {
        case Language::en: return "Sorry, I could not prepare an answer right now. Please try again in a few minutes.";
        case Language::ur: return "معذرت، ابھی جواب تیار نہیں ہو سکا۔ براہ کرم چند منٹ بعد دوبارہ کوشش کریں۔";
        case Language::pa: return "معاف کرنا، ہنے جواب تیار نہیں ہو سکیا۔ مہربانی کر کے کجھ منٹاں بعد فیر کوشش کرو۔";
        case Language::sd: return "معاف ڪجو، هن وقت جواب تيار نه ٿي سگهيو. مهرباني ڪري ڪجهه منٽن کان پوءِ ٻيهر ڪوشش ڪريو.";
        }
        break;
    case StatusKind::clarify:
        switch (lang) {
        case Language::en: return "I did not understand the question. Could you describe it in a few more words?";
        case Language::ur: return "میں سوال نہیں سمجھ سکا۔ کیا آپ اسے تھوڑا تفصیل سے بتا سکتے ہیں؟";
        case Language::pa: return "میں سوال نہیں سمجھ سکیا۔ کی تسیں اینوں تھوڑا ہور کھول کے دس سکدے او؟";
        case Language::sd: return "مان سوال نه سمجهي سگهيس. ڇا توهان ان کي ٿورو وڌيڪ وضاحت سان ٻڌائي سگهو ٿا؟";
        }
        break;
    case StatusKind::onboarding:
        switch (lang) {
        case Language::en: return "Hello! Reply to this message to activate your farm advisor.";
        case Language::ur: return "السلام علیکم! اپنا زرعی مشیر فعال کرنے کے لیے اس پیغام کا جواب دیں۔";
        case Language::pa: return "السلام علیکم! اپنا زرعی مشیر چالو کرن لئی ایس سنیہے دا جواب دیو۔";
        case Language::sd: return "السلام عليڪم! پنهنجو زرعي صلاحڪار سرگرم ڪرڻ لاءِ هن پيغام جو جواب ڏيو.";
        }
        break;
    case StatusKind::activated:
        switch (lang) {
        case Language::en: return "Welcome! Your farm advisor is now active. Ask me anything about your crops.";
        case Language::ur: return "خوش آمدید! آپ کا زرعی مشیر اب فعال ہے۔ اپنی فصلوں کے بارے میں کچھ بھی پوچھیں۔";
        case Language::pa: return "جی آیاں نوں! تہاڈا زرعی مشیر ہن چالو اے۔ اپنیاں فصلاں بارے کجھ وی پچھو۔";
        case Language::sd: return "ڀلي ڪري آيا! توهان جو زرعي صلاحڪار هاڻي سرگرم آهي. پنهنجن فصلن بابت ڪجهه به پڇو.";
        }
        break;
    }
    return {};
}

} // namespace agri::pipeline
