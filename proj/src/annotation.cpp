#include "ctlab/annotation.hpp"

#include "ctlab/error.hpp"
#include "ctlab/util.hpp"

#include <chrono>
#include <mutex>

namespace ctlab {

using ojson = nlohmann::ordered_json;

std::string_view to_string(TaskState s) {
  switch (s) {
    case TaskState::Open: return "open";
    case TaskState::Agreed: return "agreed";
    case TaskState::Conflict: return "conflict";
    case TaskState::Resolved: return "resolved";
    case TaskState::Rejected: return "rejected";
  }
  return "open";
}

TaskState parse_task_state(std::string_view s) {
  for (auto st : {TaskState::Open, TaskState::Agreed, TaskState::Conflict, TaskState::Resolved, TaskState::Rejected})
    if (to_string(st) == s) return st;
  throw ValidationError("unknown task state '" + std::string(s) + "'");
}

ojson to_json(const LabelVector& l) {
  ojson j;
  for (int c = 0; c < kNumClasses; ++c) j[std::string(class_key(static_cast<ClassId>(c)))] = static_cast<int>(l[c]);
  return j;
}

LabelVector label_from_json(const nlohmann::json& j) {
  LabelVector l;
  if (j.is_string()) {
    auto d = parse_decision(j.get<std::string>());
    if (!d) throw ValidationError("unknown label '" + j.get<std::string>() + "'");
    return LabelVector::from_decision(*d);
  }
  if (!j.is_object()) throw ValidationError("label must be an object of class flags or a decision name");
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto c = parse_class(it.key());
    if (!c) throw ValidationError("unknown class '" + it.key() + "' in label");
    if (!it.value().is_number_integer() && !it.value().is_boolean())
      throw ValidationError("label flag '" + it.key() + "' must be 0 or 1");
    const int v = it.value().is_boolean() ? static_cast<int>(it.value().get<bool>()) : it.value().get<int>();
    if (v != 0 && v != 1) throw ValidationError("label flag '" + it.key() + "' must be 0 or 1");
    l[*c] = static_cast<std::uint8_t>(v);
  }
  l.validate();
  return l;
}

namespace {

ojson candidate_json(const CandidateComment& c) {
  ojson j;
  j["id"] = c.id;
  j["text"] = c.text;
  j["source"] = c.source;
  j["model_score"] = c.model_score;
  return j;
}

CandidateComment candidate_from_json(const nlohmann::json& j) {
  CandidateComment c;
  c.id = j.at("id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.source = j.value("source", std::string());
  c.model_score = j.at("model_score").get<std::array<double, kNumClasses>>();
  return c;
}

Role parse_role(const std::string& s) {
  if (s == "annotator") return Role::Annotator;
  if (s == "adjudicator") return Role::Adjudicator;
  throw ConfigError("unknown role '" + s + "' (expected annotator or adjudicator)");
}

}  // namespace

AnnotationOptions load_annotation_options(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw ConfigError("annotation config not found: " + file.string());
  try {
    auto j = nlohmann::json::parse(read_file(file));
    AnnotationOptions o;
    for (auto it = j.at("roles").begin(); it != j.at("roles").end(); ++it)
      o.roles[it.key()] = parse_role(it.value().get<std::string>());
    o.session_cap = j.value("session_cap", kSessionCap);
    o.session_idle_seconds = j.value("session_idle_seconds", kSessionIdleSeconds);
    o.snapshot_every = j.value("snapshot_every", 100);
    if (o.session_cap < 1) throw ConfigError("session_cap must be positive");
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("annotation config " + file.string() + ": " + e.what());
  }
}

AnnotationStore::AnnotationStore(AnnotationOptions options) : options_(std::move(options)) {}

AnnotationStore::AnnotationStore(AnnotationOptions options, std::filesystem::path state_dir)
    : options_(std::move(options)), state_dir_(state_dir) {
  std::filesystem::create_directories(state_dir);
  const auto snap = state_dir / "snapshot.json";
  const auto log = state_dir / "events.jsonl";
  if (std::filesystem::exists(snap)) restore_state(nlohmann::json::parse(read_file(snap)));
  const std::int64_t snap_seq = seq_;
  if (std::filesystem::exists(log)) {
    const std::string contents = read_file(log);
    std::size_t pos = 0;
    while (pos < contents.size()) {
      auto nl = contents.find('\n', pos);
      if (nl == std::string::npos) nl = contents.size();
      std::string_view line(contents.data() + pos, nl - pos);
      pos = nl + 1;
      if (line.empty()) continue;
      auto e = ojson::parse(line);
      events_.push_back(e);
      if (e.at("seq").get<std::int64_t>() > snap_seq) apply(e);
    }
  }
  log_.open(log, std::ios::app);
  if (!log_) throw ConfigError("cannot open event log " + log.string());
}

std::int64_t AnnotationStore::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

void AnnotationStore::require_role(const std::string& id, bool adjudicator) const {
  auto it = options_.roles.find(id);
  if (it == options_.roles.end()) throw AuthorizationError("unknown user '" + id + "'");
  if (adjudicator && it->second != Role::Adjudicator)
    throw AuthorizationError("'" + id + "' is not an adjudicator");
}

bool AnnotationStore::session_live(const Session& s, std::int64_t t) const {
  return t - s.last_activity <= options_.session_idle_seconds;
}

void AnnotationStore::emit(ojson event) {
  ojson e;
  e["seq"] = ++seq_;
  for (auto it = event.begin(); it != event.end(); ++it) e[it.key()] = it.value();
  apply(e);
  events_.push_back(e);
  if (state_dir_) {
    log_ << e.dump() << '\n';
    log_.flush();
    if (options_.snapshot_every > 0 && seq_ % options_.snapshot_every == 0)
      write_file(*state_dir_ / "snapshot.json", dump_state().dump() + "\n");
  }
}

void AnnotationStore::apply(const ojson& e) {
  const auto type = e.at("type").get<std::string>();
  const auto at = e.at("at").get<std::int64_t>();
  seq_ = std::max(seq_, e.at("seq").get<std::int64_t>());
  if (type == "add_task") {
    AnnotationTask t;
    t.candidate = candidate_from_json(e.at("candidate"));
    t.task_id = t.candidate.id;
    task_index_[t.task_id] = tasks_.size();
    tasks_.push_back(std::move(t));
  } else if (type == "session_start") {
    const auto a = e.at("annotator").get<std::string>();
    sessions_[a] = Session{a, at, at, 0, e.at("cap").get<int>()};
  } else if (type == "claim") {
    auto& t = tasks_.at(task_index_.at(e.at("task_id").get<std::string>()));
    const auto a = e.at("annotator").get<std::string>();
    t.assigned.push_back(a);
    sessions_.at(a).last_activity = at;
  } else if (type == "vote") {
    auto& t = tasks_.at(task_index_.at(e.at("task_id").get<std::string>()));
    const auto a = e.at("annotator").get<std::string>();
    t.votes[a] = Vote{label_from_json(e.at("label")), e.at("needs_context").get<bool>(), at};
    auto& s = sessions_.at(a);
    ++s.annotations_this_session;
    s.last_activity = at;
    if (t.votes.size() == kVotesPerTask) {
      const auto& v1 = t.votes.begin()->second;
      const auto& v2 = std::next(t.votes.begin())->second;
      if (v1.needs_context || v2.needs_context) {
        t.state = TaskState::Rejected;
      } else if (v1.label == v2.label) {
        t.state = TaskState::Agreed;
        t.final_label = v1.label;
      } else {
        t.state = TaskState::Conflict;
      }
    }
  } else if (type == "resolve") {
    auto& t = tasks_.at(task_index_.at(e.at("task_id").get<std::string>()));
    t.final_label = label_from_json(e.at("label"));
    t.adjudicator = e.at("adjudicator").get<std::string>();
    t.state = TaskState::Resolved;
  } else {
    throw ParseError("unknown event type '" + type + "'", e.at("seq").get<long>());
  }
}

std::size_t AnnotationStore::add_candidates(const std::vector<CandidateComment>& candidates) {
  std::unique_lock lock(mutex_);
  std::size_t added = 0;
  const auto t = now();
  for (const auto& c : candidates) {
    if (task_index_.contains(c.id)) continue;
    if (c.text.empty()) throw ValidationError("candidate " + c.id + " has empty text");
    emit({{"type", "add_task"}, {"at", t}, {"candidate", candidate_json(c)}});
    ++added;
  }
  return added;
}

SessionStatus AnnotationStore::start_session(const std::string& annotator_id) {
  std::unique_lock lock(mutex_);
  require_role(annotator_id, false);
  const auto t = now();
  emit({{"type", "session_start"}, {"at", t}, {"annotator", annotator_id}, {"cap", options_.session_cap}});
  const auto& s = sessions_.at(annotator_id);
  return {s.annotations_this_session, s.cap, s.started_at};
}

std::optional<TaskView> AnnotationStore::next_task(const std::string& annotator_id) {
  std::unique_lock lock(mutex_);
  require_role(annotator_id, false);
  const auto t = now();
  auto it = sessions_.find(annotator_id);
  if (it == sessions_.end() || !session_live(it->second, t)) {
    emit({{"type", "session_start"}, {"at", t}, {"annotator", annotator_id}, {"cap", options_.session_cap}});
    it = sessions_.find(annotator_id);
  }
  if (it->second.annotations_this_session >= it->second.cap)
    throw SessionCapError("session cap of " + std::to_string(it->second.cap) +
                          " annotations reached; start a new session to continue");

  auto mine = [&](const AnnotationTask& task) {
    return std::find(task.assigned.begin(), task.assigned.end(), annotator_id) != task.assigned.end();
  };
  // A claimed but unvoted task comes back before anything new is claimed.
  for (const auto& task : tasks_)
    if (task.state == TaskState::Open && !task.votes.contains(annotator_id) && mine(task))
      return TaskView{task.task_id, task.candidate.text};
  for (const auto& task : tasks_) {
    if (task.state != TaskState::Open || task.assigned.size() >= kVotesPerTask || mine(task)) continue;
    emit({{"type", "claim"}, {"at", t}, {"task_id", task.task_id}, {"annotator", annotator_id}});
    return TaskView{task.task_id, task.candidate.text};
  }
  return std::nullopt;
}

SessionStatus AnnotationStore::submit_vote(const std::string& annotator_id, const std::string& task_id,
                                           const LabelVector& label, bool needs_context) {
  std::unique_lock lock(mutex_);
  require_role(annotator_id, false);
  label.validate("vote on " + task_id);
  auto ti = task_index_.find(task_id);
  if (ti == task_index_.end()) throw NotFoundError("unknown task '" + task_id + "'");
  const auto& task = tasks_[ti->second];
  if (task.votes.contains(annotator_id)) throw StateError("'" + annotator_id + "' already voted on " + task_id);
  if (std::find(task.assigned.begin(), task.assigned.end(), annotator_id) == task.assigned.end())
    throw AuthorizationError("task " + task_id + " is not assigned to '" + annotator_id + "'");
  if (task.state != TaskState::Open) throw StateError("task " + task_id + " is no longer open");
  const auto t = now();
  auto si = sessions_.find(annotator_id);
  if (si == sessions_.end() || !session_live(si->second, t))
    throw StateError("session expired; request a new task to start a new session");
  if (si->second.annotations_this_session >= si->second.cap)
    throw SessionCapError("session cap of " + std::to_string(si->second.cap) +
                          " annotations reached; start a new session to continue");
  emit({{"type", "vote"},
        {"at", t},
        {"task_id", task_id},
        {"annotator", annotator_id},
        {"label", to_json(label)},
        {"needs_context", needs_context}});
  const auto& s = sessions_.at(annotator_id);
  return {s.annotations_this_session, s.cap, s.started_at};
}

std::vector<AnnotationTask> AnnotationStore::conflicts(const std::string& adjudicator_id) const {
  std::shared_lock lock(mutex_);
  require_role(adjudicator_id, true);
  std::vector<AnnotationTask> out;
  for (const auto& t : tasks_)
    if (t.state == TaskState::Conflict || t.state == TaskState::Rejected) out.push_back(t);
  return out;
}

TaskState AnnotationStore::resolve(const std::string& adjudicator_id, const std::string& task_id,
                                   const LabelVector& final_label) {
  std::unique_lock lock(mutex_);
  require_role(adjudicator_id, true);
  final_label.validate("resolution of " + task_id);
  auto ti = task_index_.find(task_id);
  if (ti == task_index_.end()) throw NotFoundError("unknown task '" + task_id + "'");
  const auto state = tasks_[ti->second].state;
  if (state != TaskState::Conflict && state != TaskState::Rejected)
    throw StateError("task " + task_id + " is " + std::string(to_string(state)) + ", not in conflict");
  emit({{"type", "resolve"},
        {"at", now()},
        {"task_id", task_id},
        {"adjudicator", adjudicator_id},
        {"label", to_json(final_label)}});
  return TaskState::Resolved;
}

Progress AnnotationStore::progress() const {
  std::shared_lock lock(mutex_);
  Progress p;
  p.total = tasks_.size();
  for (auto st : {TaskState::Open, TaskState::Agreed, TaskState::Conflict, TaskState::Resolved, TaskState::Rejected})
    p.by_state[st] = 0;
  for (const auto& t : tasks_) ++p.by_state[t.state];
  return p;
}

AugmentationBatch AnnotationStore::export_batch(const std::string& adjudicator_id) const {
  std::shared_lock lock(mutex_);
  require_role(adjudicator_id, true);
  std::vector<Sample> out;
  for (const auto& t : tasks_) {
    if (t.state != TaskState::Agreed && t.state != TaskState::Resolved) continue;
    Sample s;
    s.id = t.task_id;
    s.text = t.candidate.text;
    s.labels = *t.final_label;
    s.provenance = Provenance::Manual;
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return AugmentationBatch(std::move(out));
}

std::optional<SessionStatus> AnnotationStore::session(const std::string& annotator_id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(annotator_id);
  if (it == sessions_.end()) return std::nullopt;
  return SessionStatus{it->second.annotations_this_session, it->second.cap, it->second.started_at};
}

AnnotationTask AnnotationStore::task(const std::string& task_id) const {
  std::shared_lock lock(mutex_);
  auto ti = task_index_.find(task_id);
  if (ti == task_index_.end()) throw NotFoundError("unknown task '" + task_id + "'");
  return tasks_[ti->second];
}

std::size_t AnnotationStore::event_count() const {
  std::shared_lock lock(mutex_);
  return events_.size();
}

ojson AnnotationStore::state_json() const {
  std::shared_lock lock(mutex_);
  return dump_state();
}

ojson AnnotationStore::dump_state() const {
  ojson j;
  j["seq"] = seq_;
  ojson tasks = ojson::array();
  for (const auto& t : tasks_) {
    ojson tj;
    tj["candidate"] = candidate_json(t.candidate);
    tj["assigned"] = t.assigned;
    ojson votes = ojson::object();
    for (const auto& [a, v] : t.votes)
      votes[a] = {{"label", to_json(v.label)}, {"needs_context", v.needs_context}, {"at", v.at}};
    tj["votes"] = votes;
    tj["state"] = std::string(to_string(t.state));
    tj["final_label"] = t.final_label ? to_json(*t.final_label) : ojson(nullptr);
    tj["adjudicator"] = t.adjudicator;
    tasks.push_back(std::move(tj));
  }
  j["tasks"] = std::move(tasks);
  ojson sessions = ojson::object();
  for (const auto& [a, s] : sessions_)
    sessions[a] = {{"started_at", s.started_at},
                   {"last_activity", s.last_activity},
                   {"count", s.annotations_this_session},
                   {"cap", s.cap}};
  j["sessions"] = std::move(sessions);
  return j;
}

void AnnotationStore::restore_state(const nlohmann::json& j) {
  seq_ = j.at("seq").get<std::int64_t>();
  for (const auto& tj : j.at("tasks")) {
    AnnotationTask t;
    t.candidate = candidate_from_json(tj.at("candidate"));
    t.task_id = t.candidate.id;
    t.assigned = tj.at("assigned").get<std::vector<std::string>>();
    for (auto it = tj.at("votes").begin(); it != tj.at("votes").end(); ++it)
      t.votes[it.key()] = Vote{label_from_json(it.value().at("label")), it.value().at("needs_context").get<bool>(),
                               it.value().at("at").get<std::int64_t>()};
    t.state = parse_task_state(tj.at("state").get<std::string>());
    if (!tj.at("final_label").is_null()) t.final_label = label_from_json(tj.at("final_label"));
    t.adjudicator = tj.at("adjudicator").get<std::string>();
    task_index_[t.task_id] = tasks_.size();
    tasks_.push_back(std::move(t));
  }
  for (auto it = j.at("sessions").begin(); it != j.at("sessions").end(); ++it) {
    const auto& s = it.value();
    sessions_[it.key()] = Session{it.key(), s.at("started_at").get<std::int64_t>(),
                                  s.at("last_activity").get<std::int64_t>(), s.at("count").get<int>(),
                                  s.at("cap").get<int>()};
  }
}

std::string AnnotationStore::events_jsonl() const {
  std::shared_lock lock(mutex_);
  std::string out;
  for (const auto& e : events_) out += e.dump() + "\n";
  return out;
}

std::unique_ptr<AnnotationStore> AnnotationStore::replay(AnnotationOptions options, std::string_view events) {
  auto store = std::make_unique<AnnotationStore>(std::move(options));
  std::size_t pos = 0;
  while (pos < events.size()) {
    auto nl = events.find('\n', pos);
    if (nl == std::string_view::npos) nl = events.size();
    auto line = events.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    auto e = ojson::parse(line);
    store->apply(e);
    store->events_.push_back(std::move(e));
  }
  return store;
}

void AnnotationStore::write_snapshot() const {
  std::shared_lock lock(mutex_);
  if (!state_dir_) throw StateError("store has no state directory");
  write_file(*state_dir_ / "snapshot.json", dump_state().dump() + "\n");
}

}  // namespace ctlab
