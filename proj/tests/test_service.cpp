#include <fmt/format.h>
#include <gtest/gtest.h>
#include <httplib.h>

#include "agri/app.hpp"
#include "agri/errors.hpp"
#include "agri/script.hpp"
#include "support.hpp"

using namespace agri;
using nlohmann::json;

namespace {

constexpr Timestamp kStart = 1'761'955'200;

struct Server {
    app::Runtime rt{[] {
        app::AppConfig c;
        c.data_dir = fx::data_dir();
        c.workers = 1;
        return c;
    }()};
    service::ApiServer api{rt.service_context()};
    int port = api.start();
    httplib::Client cli{"127.0.0.1", port};

    std::pair<int, json> get(const std::string& path) {
        auto res = cli.Get(path.c_str());
        EXPECT_TRUE(res) << path;
        return {res->status, json::parse(res->body)};
    }
    std::pair<int, json> post(const std::string& path, const std::string& body,
                              const char* type = "application/json") {
        auto res = cli.Post(path.c_str(), body, type);
        EXPECT_TRUE(res) << path;
        return {res->status, json::parse(res->body)};
    }
};

json spinach_profile(const std::string& phone) {
    return {{"phone", phone},
            {"language", "pa"},
            {"crops", {"spinach"}},
            {"location", {{"lat", 31.5}, {"lon", 74.3}}},
            {"nodes", {"spinach-1"}}};
}

json webhook(const std::string& id, const std::string& from, const std::string& body) {
    return {{"message_id", id}, {"from", from}, {"kind", "text"}, {"body", body}, {"timestamp", kStart}};
}

std::string acid_batch() {
    std::vector<SensorReading> batch;
    for (std::uint64_t i = 1; i <= 2; ++i) {
        auto r = fx::reading("spinach-1", i, kStart + static_cast<Timestamp>(i) * 300);
        r.set(Metric::ph, 4.5);
        batch.push_back(r);
    }
    batch.push_back(fx::reading("stray-9", 4, kStart));
    return to_ndjson(batch);
}

} // namespace

TEST(Api, Health) {
    Server s;
    const auto [code, body] = s.get("/healthz");
    EXPECT_EQ(code, 200);
    EXPECT_TRUE(body["ok"].get<bool>());
}

TEST(Api, OnboardingRoutes) {
    Server s;
    auto [code, body] = s.post("/v1/onboard", spinach_profile("+923001110002").dump());
    ASSERT_EQ(code, 201);
    EXPECT_EQ(body["stage"], "pending_test_message");
    EXPECT_FALSE(body["profile"]["active"].get<bool>());

    EXPECT_EQ(s.post("/v1/onboard", spinach_profile("+923001110002").dump()).first, 409);
    auto bad_lang = spinach_profile("+923001110003");
    bad_lang["language"] = "fr";
    EXPECT_EQ(s.post("/v1/onboard", bad_lang.dump()).first, 400);
    EXPECT_EQ(s.post("/v1/onboard", spinach_profile("0300123").dump()).first, 400);
    auto no_crops = spinach_profile("+923001110004");
    no_crops["crops"] = json::array();
    EXPECT_EQ(s.post("/v1/onboard", no_crops.dump()).first, 400);
    EXPECT_EQ(s.post("/v1/onboard", "{not json").first, 400);

    std::tie(code, body) = s.get("/v1/onboard?phone=%2B923001110002");
    EXPECT_EQ(code, 200);
    EXPECT_EQ(body["phone"], "+923001110002");
    EXPECT_EQ(s.get("/v1/onboard?phone=%2B923009999999").first, 404);

    std::tie(code, body) = s.post("/v1/webhook", webhook("w1", "+923001110002", "hello").dump());
    EXPECT_EQ(code, 200);
    EXPECT_EQ(body["status"], "activated");
    EXPECT_EQ(s.post("/v1/webhook", webhook("w1", "+923001110002", "hello").dump()).second["status"], "duplicate");
    EXPECT_EQ(s.post("/v1/webhook", webhook("w2", "+923007777777", "hello").dump()).first, 404);
    EXPECT_EQ(s.post("/v1/webhook", R"({"message_id":"x"})").first, 400);
    EXPECT_EQ(s.get("/v1/onboard?phone=%2B923001110002").second["stage"], "active");

    std::tie(code, body) = s.get("/v1/outbox?phone=%2B923001110002");
    EXPECT_EQ(code, 200);
    ASSERT_EQ(body["messages"].size(), 2u);
    EXPECT_EQ(body["messages"][0]["category"], "onboarding");
    EXPECT_EQ(s.get("/v1/farms").second["farms"].size(), 1u);
}

TEST(Api, IngestAndFarmQueries) {
    Server s;
    const auto farm_id = s.post("/v1/onboard", spinach_profile("+923001110002").dump()).second["profile"]["farm_id"];
    s.post("/v1/webhook", webhook("w1", "+923001110002", "hello").dump());

    auto [code, body] = s.post("/v1/ingest", acid_batch(), "application/x-ndjson");
    ASSERT_EQ(code, 200);
    EXPECT_EQ(body["stored"], 2);
    EXPECT_EQ(body["rejected"], 1);
    EXPECT_EQ(body["acked"]["spinach-1"], 2);
    EXPECT_EQ(body["acked"]["stray-9"], 4);
    ASSERT_EQ(body["alerts"].size(), 1u);
    EXPECT_EQ(body["alerts"][0]["metric"], "ph");
    EXPECT_EQ(s.post("/v1/ingest", acid_batch(), "application/x-ndjson").second["duplicates"], 2);
    EXPECT_EQ(s.post("/v1/ingest", "{\"node_id\":", "application/x-ndjson").first, 400);

    const std::string base = "/v1/farms/" + farm_id.get<std::string>();
    EXPECT_EQ(s.get(base).second["phone"], "+923001110002");
    std::tie(code, body) = s.get(base + "/latest?metric=ph");
    EXPECT_EQ(code, 200);
    EXPECT_DOUBLE_EQ(body["latest"]["ph"]["value"].get<double>(), 4.5);
    EXPECT_EQ(body["latest"]["ph"]["seq"], 2);
    EXPECT_EQ(s.get(base + "/latest").second["latest"].size(), kAllMetrics.size());
    EXPECT_EQ(s.get(base + "/latest?metric=zinc").first, 400);

    std::tie(code, body) = s.get(base + fmt::format("/series?metric=ph&from={}&to={}", kStart, kStart + 301));
    EXPECT_EQ(code, 200);
    EXPECT_EQ(body["points"].size(), 1u);
    EXPECT_EQ(body["unit"], "");
    EXPECT_EQ(s.get(base + "/series?metric=ph").second["points"].size(), 2u);
    EXPECT_EQ(s.get(base + "/series?metric=ph&from=yesterday").first, 400);
    EXPECT_EQ(s.get(base + "/series").first, 400);

    std::tie(code, body) = s.get(base + "/trend?metric=ph&days=1");
    EXPECT_EQ(code, 200);
    EXPECT_EQ(body["points"], 2);
    EXPECT_EQ(body["flag"], "stable");
    EXPECT_EQ(s.get(base + "/trend?metric=ph&days=0").first, 400);

    const auto alerts = s.get(base + "/alerts").second["alerts"];
    ASSERT_EQ(alerts.size(), 1u);
    EXPECT_TRUE(llm::validate_script(alerts[0]["text"].get<std::string>(), Language::pa).valid);
    s.rt.chat().wait_idle();
    const auto out = s.get("/v1/outbox?phone=%2B923001110002").second["messages"];
    EXPECT_EQ(out.back()["category"], "alert");

    EXPECT_EQ(s.get("/v1/farms/farm-404").first, 404);
    EXPECT_EQ(s.get("/v1/farms/farm-404/latest").first, 404);
    EXPECT_EQ(s.get("/v1/farms/farm-404/chat").first, 404);
}

TEST(Api, TrendWithoutDataIsUnprocessable) {
    Server s;
    const auto farm_id = s.post("/v1/onboard", spinach_profile("+923001110002").dump()).second["profile"]["farm_id"];
    const auto [code, body] = s.get("/v1/farms/" + farm_id.get<std::string>() + "/trend?metric=moisture");
    EXPECT_EQ(code, 422);
    EXPECT_TRUE(body.contains("error"));
}

TEST(Api, ChatFromUiIsAnsweredThroughChatFlow) {
    Server s;
    const auto farm_id =
        s.post("/v1/onboard", spinach_profile("+923001110002").dump()).second["profile"]["farm_id"].get<std::string>();
    s.post("/v1/webhook", webhook("w1", "+923001110002", "hello").dump());
    s.post("/v1/ingest", acid_batch(), "application/x-ndjson");
    s.rt.chat().wait_idle();

    llm::MockTranslator tr;
    const json msg{{"body", tr.translate("Is my spinach soil acid?", Language::en, Language::pa)}, {"kind", "voice"}};
    auto [code, body] = s.post("/v1/farms/" + farm_id + "/chat", msg.dump());
    EXPECT_EQ(code, 202);
    EXPECT_EQ(body["status"], "enqueued");
    EXPECT_EQ(body["message_id"], "ui-1");
    EXPECT_EQ(s.post("/v1/farms/" + farm_id + "/chat", R"({"body": ""})").first, 400);
    EXPECT_EQ(s.post("/v1/farms/" + farm_id + "/chat", R"({"text": "x"})").first, 400);
    s.rt.chat().wait_idle();

    const auto log = s.get("/v1/farms/" + farm_id + "/chat").second["messages"];
    ASSERT_GE(log.size(), 2u);
    const auto& last = log.back();
    EXPECT_EQ(last["direction"], "outbound");
    EXPECT_EQ(last["language"], "pa");
    EXPECT_FALSE(last["citations"].empty());
    EXPECT_TRUE(llm::validate_script(last["body"].get<std::string>(), Language::pa).valid);
}

TEST(Api, StaticDirectoryMustExist) {
    app::AppConfig c;
    c.data_dir = fx::data_dir();
    c.workers = 0;
    app::Runtime rt(c);
    EXPECT_THROW(service::ApiServer(rt.service_context(fx::data_dir() / "no-such-dir")), ConfigError);
}

TEST(IngestorUplink, AcksEveryNode) {
    store::Store store;
    FarmProfile p;
    p.phone = "+923001110002";
    p.crops = {"maize"};
    const auto farm = store.add_farm(p);
    store.attach_node("n1", farm.farm_id);
    service::Ingestor ingestor(store, nullptr, nullptr);
    service::IngestorUplink uplink(ingestor);
    std::vector<SensorReading> batch{fx::reading("n1", 3, 100), fx::reading("n1", 5, 200),
                                     fx::reading("n2", 7, 300)};
    auto bad = fx::reading("n1", 9, 400);
    bad.set(Metric::ph, 42.0);
    batch.push_back(bad);
    const auto acked = uplink.post(batch);
    EXPECT_EQ(acked.at("n1"), 9u);
    EXPECT_EQ(acked.at("n2"), 7u);
    EXPECT_EQ(store.reading_count(farm.farm_id), 2u);
}
