#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "dfx/error.hpp"
#include "dfx/service.hpp"
#include "oracles.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

using namespace dfx;
using nlohmann::json;

namespace {

DyadPools small_pools(const std::filesystem::path& assets = {}) {
  DyadPools p;
  for (int i = 1; i <= 6; ++i) {
    const auto m = "m" + std::to_string(i), o = "o" + std::to_string(i);
    p.manipulated_pool.push_back({ImageId(m), ImageKind::manipulated, (assets / (m + ".png")).string()});
    p.original_pool.push_back({ImageId(o), ImageKind::control_original, (assets / (o + ".png")).string()});
  }
  p.rng_seed = 11;
  return p;
}

ServiceConfig config(std::optional<std::filesystem::path> log = std::nullopt) {
  ServiceConfig c;
  c.pools = small_pools();
  c.log_path = std::move(log);
  auto tick = std::make_shared<std::atomic<TimestampMs>>(1000);
  c.clock = [tick] { return tick->fetch_add(1); };
  return c;
}

Errc kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::usage;
}

Side manipulated_side(const ApiTrialPayload& t) {
  return t.left_image_url.find("/m") != std::string::npos ? Side::left : Side::right;
}

Side other(Side s) { return s == Side::left ? Side::right : Side::left; }

}  // namespace

TEST(Service, DeviceClassification) {
  EXPECT_EQ(classify_device("Mozilla/5.0 (iPhone; CPU iPhone OS 17_0 like Mac OS X)"), DeviceClass::mobile);
  EXPECT_EQ(classify_device("Mozilla/5.0 (Linux; Android 14; Pixel 8) Mobile"), DeviceClass::mobile);
  EXPECT_EQ(classify_device("Mozilla/5.0 (Windows NT 10.0; Win64; x64)"), DeviceClass::desktop);
  EXPECT_EQ(classify_device("Mozilla/5.0 (Macintosh; Intel Mac OS X 14_0)"), DeviceClass::desktop);
  EXPECT_EQ(classify_device("mobile"), DeviceClass::mobile);
  EXPECT_EQ(classify_device("desktop"), DeviceClass::desktop);
  EXPECT_EQ(classify_device(""), DeviceClass::unknown);
  EXPECT_EQ(classify_device("curl/8.0"), DeviceClass::unknown);
}

TEST(Service, ConcurrentSessionCreationGivesDistinctTokens) {
  ExperimentService svc(config());
  std::vector<std::vector<SessionId>> made(10);
  std::vector<std::thread> threads;
  for (int t = 0; t < 10; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 100; ++i) made[t].push_back(svc.create_session("desktop"));
    });
  for (auto& th : threads) th.join();
  std::set<SessionId> all;
  for (const auto& v : made) all.insert(v.begin(), v.end());
  EXPECT_EQ(all.size(), 1000u);
  EXPECT_EQ(svc.log().snapshot().sessions().size(), 1000u);
}

TEST(Service, PositionsAdvanceOnlyWithAnswers) {
  ExperimentService svc(config());
  const auto s = svc.create_session("mobile");
  const auto first = svc.get_trial(s);
  EXPECT_EQ(first.position, 1u);
  svc.post_guess(s, first.trial_id, Side::left, 500);
  for (std::uint32_t k = 2; k <= 9; ++k) {
    const auto t = svc.get_trial(s);
    EXPECT_EQ(t.position, k);
    svc.post_guess(s, t.trial_id, Side::right, 500);
  }
  EXPECT_EQ(svc.get_trial(s).position, 10u);
  // Re-requesting abandons the outstanding trial; the position does not move.
  const auto again = svc.get_trial(s);
  EXPECT_EQ(again.position, 10u);
  EXPECT_EQ(svc.log().snapshot().find_session(s)->trials_abandoned, 1u);
}

TEST(Service, PayloadDoesNotRevealTheAnswer) {
  ExperimentService svc(config());
  const auto s = svc.create_session();
  const auto t = svc.get_trial(s);
  for (const auto& url : {t.left_image_url, t.right_image_url}) EXPECT_EQ(url.rfind("/assets/", 0), 0u);
  EXPECT_NE(t.left_image_url, t.right_image_url);
  EXPECT_EQ(t.trial_id.str().find('m'), std::string::npos);
}

TEST(Service, ScoringAndRunningAccuracy) {
  ExperimentService svc(config());
  const auto s = svc.create_session();
  const auto t1 = svc.get_trial(s);
  const auto r1 = svc.post_guess(s, t1.trial_id, manipulated_side(t1), 900);
  EXPECT_TRUE(r1.correct);
  EXPECT_EQ(r1.manipulated_side, manipulated_side(t1));
  EXPECT_DOUBLE_EQ(r1.running_accuracy, 1.0);
  EXPECT_EQ(r1.position, 1u);
  const auto t2 = svc.get_trial(s);
  const auto r2 = svc.post_guess(s, t2.trial_id, other(manipulated_side(t2)), 900);
  EXPECT_FALSE(r2.correct);
  EXPECT_DOUBLE_EQ(r2.running_accuracy, 0.5);

  const auto fresh = svc.create_session();
  const auto tf = svc.get_trial(fresh);
  EXPECT_DOUBLE_EQ(svc.post_guess(fresh, tf.trial_id, other(manipulated_side(tf)), 1).running_accuracy, 0.0);
}

TEST(Service, RejectsForeignStaleAndDuplicateGuesses) {
  ExperimentService svc(config());
  const auto a = svc.create_session(), b = svc.create_session();
  const auto ta = svc.get_trial(a);
  const auto tb = svc.get_trial(b);
  EXPECT_EQ(kind_of([&] { svc.post_guess(a, tb.trial_id, Side::left, 1); }), Errc::rejected);
  EXPECT_EQ(kind_of([&] { svc.post_guess(a, TrialId("nope"), Side::left, 1); }), Errc::rejected);
  EXPECT_EQ(kind_of([&] { svc.get_trial(SessionId("s-unknown")); }), Errc::auth);
  EXPECT_EQ(kind_of([&] { svc.post_guess(SessionId("s-unknown"), ta.trial_id, Side::left, 1); }),
            Errc::auth);

  svc.post_guess(a, ta.trial_id, Side::left, 1);
  EXPECT_EQ(kind_of([&] { svc.post_guess(a, ta.trial_id, Side::left, 1); }), Errc::duplicate);

  const auto stale = svc.get_trial(a);
  const auto current = svc.get_trial(a);
  EXPECT_EQ(kind_of([&] { svc.post_guess(a, stale.trial_id, Side::left, 1); }), Errc::rejected);
  EXPECT_NO_THROW(svc.post_guess(a, current.trial_id, Side::left, 1));
  EXPECT_EQ(kind_of([&] { svc.post_guess(a, current.trial_id, Side::right, 1); }), Errc::duplicate);
}

TEST(Service, StatsMatchFoldAndSurviveRestart) {
  const auto dir = oracle::scratch_dir("service_restart");
  const auto path = dir / "log.jsonl";
  LogSummary before;
  {
    ExperimentService svc(config(path));
    for (int i = 0; i < 7; ++i) {
      const auto s = svc.create_session(i % 2 ? "mobile" : "desktop");
      for (int k = 0; k < 3 + i; ++k) {
        const auto t = svc.get_trial(s);
        svc.post_guess(s, t.trial_id, k % 3 ? manipulated_side(t) : other(manipulated_side(t)), 100);
      }
      if (i == 3) svc.get_trial(s);  // left outstanding
    }
    before = svc.get_stats();
    EXPECT_EQ(before, summarize(svc.log().snapshot()));
    EXPECT_EQ(before.guess_count, 42u);
    EXPECT_EQ(before.unique_sessions, 7u);
  }
  EXPECT_EQ(summarize(replay(path)), before);
  ExperimentService reopened(config(path));
  EXPECT_EQ(reopened.get_stats(), before);
  const auto s = reopened.create_session();
  EXPECT_EQ(reopened.log().snapshot().sessions().size(), 8u);
  EXPECT_EQ(reopened.get_trial(s).position, 1u);
}

TEST(Service, InvalidPoolsRefuseToStart) {
  auto c = config();
  c.pools.original_pool.clear();
  EXPECT_EQ(kind_of([&] { ExperimentService svc(c); }), Errc::configuration);
}

// --- HTTP ------------------------------------------------------------------

namespace {

struct LiveServer {
  explicit LiveServer(ServiceConfig c) : service(std::move(c)), http(service) {
    port = http.bind("127.0.0.1", 0);
    thread = std::thread([this] { http.listen_after_bind(); });
    http.wait_until_ready();
  }
  ~LiveServer() {
    http.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_connection_timeout(10);
    c.set_read_timeout(30);
    return c;
  }

  ExperimentService service;
  HttpServer http;
  int port = -1;
  std::thread thread;
};

httplib::Headers bearer(const std::string& token) { return {{"Authorization", "Bearer " + token}}; }

}  // namespace

TEST(Http, EndpointsAndStatusCodes) {
  const auto dir = oracle::scratch_dir("http_assets");
  std::ofstream(dir / "m1.png", std::ios::binary) << "PNGDATA";
  auto c = config();
  c.pools = small_pools(dir);
  LiveServer live(std::move(c));
  ASSERT_GT(live.port, 0);
  auto cli = live.client();

  auto res = cli.Post("/api/session", R"({"device_hint":"iPhone"})", "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto token = json::parse(res->body).at("token").get<std::string>();
  EXPECT_EQ(live.service.log().snapshot().find_session(SessionId(token))->session.device_class,
            DeviceClass::mobile);

  res = cli.Get("/api/trial");
  EXPECT_EQ(res->status, 401);
  EXPECT_EQ(json::parse(res->body).at("error"), "auth");
  res = cli.Get("/api/trial", bearer("bogus"));
  EXPECT_EQ(res->status, 401);

  res = cli.Get("/api/trial", bearer(token));
  ASSERT_EQ(res->status, 200);
  const auto trial = json::parse(res->body);
  EXPECT_EQ(trial.at("position"), 1);
  EXPECT_FALSE(trial.contains("placement"));
  EXPECT_FALSE(trial.contains("manipulated_side"));

  res = cli.Post("/api/guess", bearer(token), R"({"trial_id": 5})", "application/json");
  EXPECT_EQ(res->status, 400);
  res = cli.Post("/api/guess", bearer(token), "not json", "application/json");
  EXPECT_EQ(res->status, 400);
  json guess = {{"trial_id", trial.at("trial_id")}, {"chosen_side", "left"}, {"elapsed_ms", 1200}};
  res = cli.Post("/api/guess", bearer(token), guess.dump(), "application/json");
  ASSERT_EQ(res->status, 200);
  const auto result = json::parse(res->body);
  EXPECT_EQ(result.at("position"), 1);
  EXPECT_EQ(result.at("correct").get<bool>(), result.at("manipulated_side") == "left");
  res = cli.Post("/api/guess", bearer(token), guess.dump(), "application/json");
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(res->body).at("error"), "duplicate");

  res = cli.Get("/api/stats");
  ASSERT_EQ(res->status, 200);
  const auto stats = json::parse(res->body);
  EXPECT_EQ(stats.at("guess_count"), 1);
  EXPECT_EQ(stats.at("unique_sessions"), 1);

  res = cli.Get("/assets/m1");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "PNGDATA");
  EXPECT_EQ(cli.Get("/assets/m2")->status, 404);  // listed, file missing
  EXPECT_EQ(cli.Get("/assets/zz")->status, 404);
}

TEST(Http, HundredConcurrentSessionsReplayExactly) {
  const auto dir = oracle::scratch_dir("http_concurrent");
  const auto path = dir / "log.jsonl";
  LogSummary live_stats;
  {
    LiveServer live(config(path));
    std::vector<std::thread> threads;
    std::atomic<int> failures{0};
    std::mutex first_mutex;
    std::string first_failure;
    auto failed = [&](const httplib::Result& res, const char* step) {
      ++failures;
      std::lock_guard lock(first_mutex);
      if (first_failure.empty())
        first_failure = std::string(step) + ": " +
                        (res ? std::to_string(res->status) + " " + res->body : httplib::to_string(res.error()));
    };
    for (int i = 0; i < 100; ++i)
      threads.emplace_back([&, i] {
        auto cli = live.client();
        auto res = cli.Post("/api/session", json{{"device_hint", i % 2 ? "mobile" : "desktop"}}.dump(),
                            "application/json");
        if (!res || res->status != 200) return failed(res, "session");
        const auto token = json::parse(res->body).at("token").get<std::string>();
        for (int k = 1; k <= 10; ++k) {
          auto t = cli.Get("/api/trial", bearer(token));
          if (!t || t->status != 200 || json::parse(t->body).at("position") != k) return failed(t, "trial");
          json g = {{"trial_id", json::parse(t->body).at("trial_id")},
                    {"chosen_side", (i + k) % 2 ? "left" : "right"},
                    {"elapsed_ms", 1000 + k}};
          auto r = cli.Post("/api/guess", bearer(token), g.dump(), "application/json");
          if (!r || r->status != 200) return failed(r, "guess");
        }
      });
    for (auto& t : threads) t.join();
    EXPECT_EQ(failures.load(), 0) << first_failure;
    live_stats = live.service.get_stats();
  }
  EXPECT_EQ(live_stats.guess_count, 1000u);
  EXPECT_EQ(live_stats.unique_sessions, 100u);
  ASSERT_EQ(live_stats.per_position.size(), 10u);
  for (const auto& p : live_stats.per_position) EXPECT_EQ(p.guesses, 100u);
  EXPECT_EQ(summarize(replay(path)), live_stats);
}
