#pragma once

#include "ctlab/augment.hpp"
#include "ctlab/corpus.hpp"
#include "ctlab/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace ctlab {

enum class TaskState { Open, Agreed, Conflict, Resolved, Rejected };

std::string_view to_string(TaskState s);
TaskState parse_task_state(std::string_view s);

enum class Role { Annotator, Adjudicator };

struct Vote {
  LabelVector label;
  bool needs_context = false;
  std::int64_t at = 0;
  friend bool operator==(const Vote&, const Vote&) = default;
};

struct AnnotationTask {
  std::string task_id;
  CandidateComment candidate;
  std::vector<std::string> assigned;  // claim order, at most 2
  std::map<std::string, Vote> votes;
  TaskState state = TaskState::Open;
  std::optional<LabelVector> final_label;
  std::string adjudicator;
};

struct Session {
  std::string annotator_id;
  std::int64_t started_at = 0;
  std::int64_t last_activity = 0;
  int annotations_this_session = 0;
  int cap = 50;
};

inline constexpr int kVotesPerTask = 2;
inline constexpr int kSessionCap = 50;
inline constexpr std::int64_t kSessionIdleSeconds = 8 * 3600;

struct AnnotationOptions {
  std::map<std::string, Role> roles;
  int session_cap = kSessionCap;
  std::int64_t session_idle_seconds = kSessionIdleSeconds;
  /// Events between state snapshots when a state directory is attached.
  int snapshot_every = 100;
  /// Seconds since the epoch; injectable for tests.
  std::function<std::int64_t()> clock;
};

/// {"roles": {"alice": "annotator", "bob": "adjudicator"}, "session_cap": 50, ...}
AnnotationOptions load_annotation_options(const std::filesystem::path& file);

/// What an annotator sees: no votes, no scores.
struct TaskView {
  std::string task_id;
  std::string text;
};

struct SessionStatus {
  int count = 0;
  int cap = 0;
  std::int64_t started_at = 0;
};

struct Progress {
  std::size_t total = 0;
  std::map<TaskState, std::size_t> by_state;
};

/// Blind two-fold voting with adjudication, event-sourced.
///
/// Every mutation is recorded as an event and applied through a single
/// function, so replaying the log rebuilds the same state. One writer at a
/// time; readers share the lock.
class AnnotationStore {
 public:
  explicit AnnotationStore(AnnotationOptions options);
  /// Restores from `state_dir` (snapshot.json + events.jsonl) and keeps appending there.
  AnnotationStore(AnnotationOptions options, std::filesystem::path state_dir);

  /// Candidates with an id already present are ignored. Returns the number added.
  std::size_t add_candidates(const std::vector<CandidateComment>& candidates);

  /// Starts a fresh session, ending the current one.
  SessionStatus start_session(const std::string& annotator_id);
  /// nullopt when nothing is left for this annotator.
  std::optional<TaskView> next_task(const std::string& annotator_id);
  SessionStatus submit_vote(const std::string& annotator_id, const std::string& task_id, const LabelVector& label,
                            bool needs_context);
  /// Adjudicator view of conflicted and rejected tasks, votes included.
  std::vector<AnnotationTask> conflicts(const std::string& adjudicator_id) const;
  TaskState resolve(const std::string& adjudicator_id, const std::string& task_id, const LabelVector& final_label);
  Progress progress() const;
  /// Throws AuthorizationError unless `id` holds the adjudicator role.
  void authorize_adjudicator(const std::string& id) const { require_role(id, true); }
  /// Agreed and resolved tasks as manual-provenance samples, ordered by task id.
  AugmentationBatch export_batch(const std::string& adjudicator_id) const;

  std::optional<SessionStatus> session(const std::string& annotator_id) const;
  /// Full state for inspection; not for annotator-facing responses.
  AnnotationTask task(const std::string& task_id) const;
  std::size_t event_count() const;
  /// Canonical dump of the full state; equal dumps mean equal states.
  nlohmann::ordered_json state_json() const;
  std::string events_jsonl() const;

  /// Rebuilds a store from a log produced by events_jsonl().
  static std::unique_ptr<AnnotationStore> replay(AnnotationOptions options, std::string_view events_jsonl);

  void write_snapshot() const;

 private:
  std::int64_t now() const;
  void require_role(const std::string& id, bool adjudicator) const;
  void emit(nlohmann::ordered_json event);
  void apply(const nlohmann::ordered_json& event);
  bool session_live(const Session& s, std::int64_t t) const;
  void restore_state(const nlohmann::json& snapshot);
  nlohmann::ordered_json dump_state() const;

  AnnotationOptions options_;
  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t> task_index_;
  std::map<std::string, Session> sessions_;
  std::vector<nlohmann::ordered_json> events_;
  std::int64_t seq_ = 0;
  std::optional<std::filesystem::path> state_dir_;
  std::ofstream log_;
  mutable std::shared_mutex mutex_;
};

nlohmann::ordered_json to_json(const LabelVector& l);
LabelVector label_from_json(const nlohmann::json& j);

}  // namespace ctlab
