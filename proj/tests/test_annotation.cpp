#include "synthetic.hpp"

#include "ctlab/annotation.hpp"
#include "ctlab/annotation_http.hpp"
#include "ctlab/error.hpp"
#include "ctlab/random.hpp"
#include "ctlab/util.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace ctlab;
using json = nlohmann::json;

namespace {

struct FakeClock {
  std::shared_ptr<std::atomic<std::int64_t>> t = std::make_shared<std::atomic<std::int64_t>>(1'700'000'000);
  std::function<std::int64_t()> fn() const {
    return [t = t] { return t->load(); };
  }
};

AnnotationOptions options(const FakeClock& clock) {
  AnnotationOptions o;
  o.roles = {{"alice", Role::Annotator}, {"bob", Role::Annotator}, {"cleo", Role::Annotator}, {"judge", Role::Adjudicator}};
  o.clock = clock.fn();
  return o;
}

std::vector<CandidateComment> candidates(int n) {
  std::vector<CandidateComment> out;
  for (int i = 0; i < n; ++i) {
    CandidateComment c;
    c.id = "c" + std::to_string(1000 + i);
    c.text = "মন্তব্য নম্বর " + std::to_string(i);
    c.source = "test";
    c.model_score = {0.91, 0.12, 0.33, 0.04};
    out.push_back(c);
  }
  return out;
}

LabelVector label(DecisionLabel d) { return LabelVector::from_decision(d); }

ApiResponse call(AnnotationStore& s, std::string method, std::string path, std::map<std::string, std::string> query = {},
                 json body = nullptr) {
  return handle_api(s, {std::move(method), std::move(path), std::move(query), body.is_null() ? "" : body.dump()});
}

std::string vote_task(AnnotationStore& s, const std::string& who, DecisionLabel d, bool ctx = false) {
  auto view = s.next_task(who);
  REQUIRE(view);
  s.submit_vote(who, view->task_id, label(d), ctx);
  return view->task_id;
}

}  // namespace

TEST_CASE("session cap blocks the 51st request") {
  FakeClock clock;
  AnnotationStore store(options(clock));
  store.add_candidates(candidates(80));
  for (int i = 0; i < 50; ++i) vote_task(store, "alice", DecisionLabel::Religio);
  CHECK(store.session("alice")->count == 50);
  CHECK_THROWS_AS(store.next_task("alice"), SessionCapError);
  const auto r = call(store, "GET", "/api/tasks/next", {{"annotator", "alice"}});
  CHECK(r.status == 429);
  CHECK(json::parse(r.body)["error"] == "session_cap");

  CHECK(call(store, "POST", "/api/sessions", {}, {{"annotator", "alice"}}).status == 200);
  CHECK(store.next_task("alice"));

  // an idle session lapses and the next request starts a fresh one
  for (int i = 0; i < 50; ++i) vote_task(store, "bob", DecisionLabel::Ethno);
  clock.t->fetch_add(kSessionIdleSeconds + 1);
  CHECK(store.next_task("bob"));
  CHECK(store.session("bob")->count == 0);
}

TEST_CASE("two identical votes agree") {
  FakeClock clock;
  AnnotationStore store(options(clock));
  store.add_candidates(candidates(1));
  const auto id = vote_task(store, "alice", DecisionLabel::Religio);
  CHECK_FALSE(store.next_task("alice"));  // already voted on the only task
  CHECK(vote_task(store, "bob", DecisionLabel::Religio) == id);
  CHECK(store.task(id).state == TaskState::Agreed);
  CHECK(store.task(id).final_label == label(DecisionLabel::Religio));
  CHECK_FALSE(store.next_task("cleo"));
  CHECK_THROWS_AS(store.resolve("judge", id, label(DecisionLabel::Ethno)), StateError);
}

TEST_CASE("conflicts go to the adjudicator") {
  FakeClock clock;
  AnnotationStore store(options(clock));
  store.add_candidates(candidates(2));
  const auto id = vote_task(store, "alice", DecisionLabel::Religio);
  vote_task(store, "bob", DecisionLabel::Noncommunal);
  CHECK(store.task(id).state == TaskState::Conflict);
  REQUIRE(store.conflicts("judge").size() == 1);
  CHECK_THROWS_AS(store.conflicts("alice"), AuthorizationError);
  CHECK_THROWS_AS(store.resolve("alice", id, label(DecisionLabel::Religio)), AuthorizationError);
  CHECK(store.resolve("judge", id, label(DecisionLabel::Ethno)) == TaskState::Resolved);
  CHECK(store.task(id).adjudicator == "judge");
  CHECK_THROWS_AS(store.resolve("judge", id, label(DecisionLabel::Ethno)), StateError);
  CHECK_THROWS_AS(store.resolve("judge", "nope", label(DecisionLabel::Ethno)), NotFoundError);

  const auto batch = store.export_batch("judge");
  REQUIRE(batch.size() == 1);
  CHECK(batch.samples()[0].id == id);
  CHECK(batch.samples()[0].labels == label(DecisionLabel::Ethno));
  CHECK(batch.samples()[0].provenance == Provenance::Manual);
  CHECK_THROWS_AS(store.export_batch("bob"), AuthorizationError);
}

TEST_CASE("needs-context votes reject the task") {
  FakeClock clock;
  AnnotationStore store(options(clock));
  store.add_candidates(candidates(1));
  const auto id = vote_task(store, "alice", DecisionLabel::Religio, true);
  vote_task(store, "bob", DecisionLabel::Religio);
  CHECK(store.task(id).state == TaskState::Rejected);
  CHECK(store.export_batch("judge").empty());
  CHECK(store.conflicts("judge").size() == 1);
  store.resolve("judge", id, label(DecisionLabel::Religio));
  CHECK(store.export_batch("judge").size() == 1);
}

TEST_CASE("invalid votes") {
  FakeClock clock;
  AnnotationStore store(options(clock));
  store.add_candidates(candidates(3));
  const auto view = store.next_task("alice");
  LabelVector bad;
  bad[ClassId::Noncommunal] = 1;
  bad[ClassId::Ethno] = 1;
  CHECK_THROWS_AS(store.submit_vote("alice", view->task_id, bad, false), ValidationError);
  CHECK_THROWS_AS(store.submit_vote("bob", view->task_id, label(DecisionLabel::Ethno), false), AuthorizationError);
  CHECK_THROWS_AS(store.submit_vote("mallory", view->task_id, label(DecisionLabel::Ethno), false), AuthorizationError);
  CHECK_THROWS_AS(store.submit_vote("alice", "missing", label(DecisionLabel::Ethno), false), NotFoundError);
  store.submit_vote("alice", view->task_id, label(DecisionLabel::Ethno), false);
  CHECK_THROWS_AS(store.submit_vote("alice", view->task_id, label(DecisionLabel::Ethno), false), StateError);

  const auto r = call(store, "POST", "/api/tasks/" + view->task_id + "/vote", {},
                      {{"annotator", "alice"}, {"label", {{"noncommunal", 1}, {"ethno", 1}}}});
  CHECK(r.status == 400);
  CHECK(handle_api(store, {"POST", "/api/sessions", {}, "{not json"}).status == 400);
  CHECK(call(store, "GET", "/api/nothing").status == 404);
}

namespace {

// Drives one annotator's session through the API and returns every response it saw.
std::vector<std::string> alice_transcript(DecisionLabel bob_vote, bool bob_context) {
  FakeClock clock;
  AnnotationStore store(options(clock));
  store.add_candidates(candidates(3));
  std::vector<std::string> seen;
  auto record = [&](const ApiResponse& r) {
    seen.push_back(std::to_string(r.status) + " " + r.body);
    return json::parse(r.body);
  };
  for (int round = 0; round < 3; ++round) {
    const auto next = record(call(store, "GET", "/api/tasks/next", {{"annotator", "alice"}}));
    const std::string id = next["task"]["task_id"];
    // bob votes first on even rounds, second on odd ones
    if (round % 2 == 0) vote_task(store, "bob", bob_vote, bob_context);
    record(call(store, "POST", "/api/tasks/" + id + "/vote", {},
                {{"annotator", "alice"}, {"label", "Religio"}, {"needs_context", false}}));
    if (round % 2 == 1) vote_task(store, "bob", bob_vote, bob_context);
    record(call(store, "GET", "/api/progress", {{"annotator", "alice"}}));
    record(call(store, "POST", "/api/tasks/" + id + "/vote", {}, {{"annotator", "alice"}, {"label", "Religio"}}));
    record(call(store, "GET", "/api/conflicts", {{"adjudicator", "alice"}}));
    record(call(store, "GET", "/api/export", {{"adjudicator", "alice"}}));
    record(call(store, "GET", "/api/progress", {{"adjudicator", "alice"}}));
    record(call(store, "POST", "/api/conflicts/" + id + "/resolve", {}, {{"adjudicator", "alice"}, {"label", "Ethno"}}));
  }
  record(call(store, "GET", "/api/tasks/next", {{"annotator", "alice"}}));
  record(call(store, "POST", "/api/sessions", {}, {{"annotator", "alice"}}));
  record(call(store, "GET", "/api/progress"));
  return seen;
}

}  // namespace

TEST_CASE("annotator responses never depend on the other vote") {
  const auto base = alice_transcript(DecisionLabel::Religio, false);
  for (auto d : {DecisionLabel::Ethno, DecisionLabel::Noncommunal, DecisionLabel::NonViolent})
    CHECK(alice_transcript(d, false) == base);
  CHECK(alice_transcript(DecisionLabel::Religio, true) == base);
  for (const auto& body : base) {
    CHECK(body.find("votes") == std::string::npos);
    CHECK(body.find("model_score") == std::string::npos);
    CHECK(body.find("0.91") == std::string::npos);
    CHECK(body.find("bob") == std::string::npos);
    for (auto key : kClassKeys) CHECK(body.find(key) == std::string::npos);
  }
}

TEST_CASE("adjudicator endpoints") {
  FakeClock clock;
  AnnotationStore store(options(clock));
  store.add_candidates(candidates(2));
  const auto id = vote_task(store, "alice", DecisionLabel::Religio);
  vote_task(store, "bob", DecisionLabel::Ethno);
  auto c = json::parse(call(store, "GET", "/api/conflicts", {{"adjudicator", "judge"}}).body);
  REQUIRE(c["conflicts"].size() == 1);
  CHECK(c["conflicts"][0]["votes"].contains("alice"));
  CHECK(c["conflicts"][0]["model_score"][0] == 0.91);
  auto r = call(store, "POST", "/api/conflicts/" + id + "/resolve", {}, {{"adjudicator", "judge"}, {"label", "Ethno"}});
  CHECK(r.status == 200);
  CHECK(json::parse(r.body)["state"] == "resolved");
  auto p = json::parse(call(store, "GET", "/api/progress", {{"adjudicator", "judge"}}).body);
  CHECK(p["by_state"]["resolved"] == 1);
  r = call(store, "GET", "/api/export", {{"adjudicator", "judge"}});
  CHECK(r.content_type == "application/x-ndjson");
  const auto exported = parse_corpus_jsonl(r.body);
  CHECK(exported.size() == 1);
  CHECK(exported.samples()[0].provenance == Provenance::Manual);
}

namespace {

void random_workload(AnnotationStore& store, FakeClock& clock, std::uint64_t seed, int steps) {
  Rng rng(seed);
  const std::vector<std::string> people = {"alice", "bob", "cleo"};
  for (int i = 0; i < steps; ++i) {
    clock.t->fetch_add(static_cast<std::int64_t>(rng.below(120)));
    const auto& who = people[rng.below(people.size())];
    try {
      switch (rng.below(6)) {
        case 0:
          store.start_session(who);
          break;
        case 5: {
          auto c = store.conflicts("judge");
          if (!c.empty()) store.resolve("judge", c[rng.below(c.size())].task_id, label(DecisionLabel::Ethno));
          break;
        }
        default:
          if (auto v = store.next_task(who))
            store.submit_vote(who, v->task_id, label(static_cast<DecisionLabel>(rng.below(5))), rng.below(10) == 0);
      }
    } catch (const SessionCapError&) {
      store.start_session(who);
    }
  }
}

}  // namespace

TEST_CASE("replaying the event log rebuilds the state") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    FakeClock clock;
    auto opt = options(clock);
    opt.session_cap = 7;
    AnnotationStore store(opt);
    store.add_candidates(candidates(60));
    random_workload(store, clock, seed, 400);
    const auto copy = AnnotationStore::replay(opt, store.events_jsonl());
    CHECK(copy->state_json() == store.state_json());
    CHECK(copy->event_count() == store.event_count());
  }
}

TEST_CASE("state directory survives a restart") {
  auto dir = testing::temp_dir("annot");
  FakeClock clock;
  auto opt = options(clock);
  opt.snapshot_every = 13;
  json before;
  {
    AnnotationStore store(opt, dir);
    store.add_candidates(candidates(30));
    random_workload(store, clock, 9, 150);
    before = store.state_json();
  }
  CHECK(std::filesystem::exists(dir / "snapshot.json"));
  {
    AnnotationStore reopened(opt, dir);
    CHECK(json(reopened.state_json()) == before);
    random_workload(reopened, clock, 10, 50);
    before = reopened.state_json();
  }
  AnnotationStore again(opt, dir);
  CHECK(json(again.state_json()) == before);

  const auto rebuilt = AnnotationStore::replay(opt, read_file(dir / "events.jsonl"));
  CHECK(json(rebuilt->state_json()) == before);
  std::filesystem::remove_all(dir);
}

TEST_CASE("exports trace back to agreement or adjudication") {
  FakeClock clock;
  AnnotationStore store(options(clock));
  store.add_candidates(candidates(40));
  random_workload(store, clock, 21, 500);
  const auto batch = store.export_batch("judge");
  CHECK_FALSE(batch.empty());
  for (const auto& s : batch.samples()) {
    const auto t = store.task(s.id);
    CHECK(s.provenance == Provenance::Manual);
    if (t.state == TaskState::Agreed) {
      REQUIRE(t.votes.size() == 2);
      for (const auto& [who, v] : t.votes) CHECK(v.label == s.labels);
    } else {
      CHECK(t.state == TaskState::Resolved);
      CHECK(t.adjudicator == "judge");
      CHECK(*t.final_label == s.labels);
    }
  }
}

TEST_CASE("concurrent requests cannot pass the cap") {
  FakeClock clock;
  AnnotationStore store(options(clock));
  store.add_candidates(candidates(400));
  std::atomic<int> recorded = 0;
  std::vector<std::thread> pool;
  for (int k = 0; k < 8; ++k)
    pool.emplace_back([&] {
      for (;;) {
        try {
          auto v = store.next_task("alice");
          if (!v) return;
          store.submit_vote("alice", v->task_id, label(DecisionLabel::Religio), false);
          ++recorded;
        } catch (const SessionCapError&) {
          return;
        } catch (const StateError&) {
          // another thread voted on the same claimed task first
        }
      }
    });
  for (auto& t : pool) t.join();
  CHECK(recorded == kSessionCap);
  CHECK(store.session("alice")->count == kSessionCap);
}

TEST_CASE("http round trip") {
  FakeClock clock;
  AnnotationStore store(options(clock));
  store.add_candidates(candidates(2));
  AnnotationServer server(store);
  const int port = server.bind("127.0.0.1", 0);
  std::thread worker([&] { server.serve(); });
  httplib::Client client("127.0.0.1", port);
  httplib::Result r;
  for (int i = 0; i < 100 && !(r = client.Get("/api/tasks/next?annotator=alice")); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  REQUIRE(r);
  CHECK(r->status == 200);
  const std::string id = json::parse(r->body)["task"]["task_id"];
  auto v = client.Post("/api/tasks/" + id + "/vote", json{{"annotator", "alice"}, {"label", "Ethno"}}.dump(), "application/json");
  REQUIRE(v);
  CHECK(v->status == 200);
  CHECK(json::parse(v->body)["session"]["remaining"] == 49);
  auto bad = client.Get("/api/conflicts?adjudicator=alice");
  REQUIRE(bad);
  CHECK(bad->status == 403);
  server.stop();
  worker.join();
}

TEST_CASE("role files") {
  auto dir = testing::temp_dir("roles");
  write_file(dir / "roles.json", R"({"roles":{"a":"annotator","j":"adjudicator"},"session_cap":10})");
  const auto o = load_annotation_options(dir / "roles.json");
  CHECK(o.roles.at("j") == Role::Adjudicator);
  CHECK(o.session_cap == 10);
  write_file(dir / "bad.json", R"({"roles":{"a":"admin"}})");
  CHECK_THROWS_AS(load_annotation_options(dir / "bad.json"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("shipped roles example loads") {
  const auto o = load_annotation_options(std::filesystem::path(CTLAB_SOURCE_DIR) / "configs" / "roles.example.json");
  CHECK(o.session_cap == kSessionCap);
  CHECK(o.roles.at("reviewer") == Role::Adjudicator);
}
