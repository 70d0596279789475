#include "ctlab/annotation_http.hpp"

#include "ctlab/error.hpp"

#include <httplib.h>

#include <regex>

namespace ctlab {

using ojson = nlohmann::ordered_json;

namespace {

ApiResponse json_response(int status, const ojson& j) { return {status, "application/json", j.dump()}; }

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
  return json_response(status, {{"error", code}, {"message", message}});
}

const std::string& require_param(const ApiRequest& r, const std::string& key) {
  auto it = r.query.find(key);
  if (it == r.query.end() || it->second.empty()) throw ValidationError("missing query parameter '" + key + "'");
  return it->second;
}

std::string require_field(const nlohmann::json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) throw ValidationError(std::string("missing field '") + key + "'");
  return body[key].get<std::string>();
}

ojson session_json(const SessionStatus& s) {
  return {{"count", s.count}, {"cap", s.cap}, {"remaining", s.cap - s.count}};
}

ApiResponse route(AnnotationStore& store, const ApiRequest& r) {
  static const std::regex vote_re(R"(^/api/tasks/([^/]+)/vote$)");
  static const std::regex resolve_re(R"(^/api/conflicts/([^/]+)/resolve$)");
  std::smatch m;

  if (r.method == "GET" && r.path == "/api/tasks/next") {
    auto view = store.next_task(require_param(r, "annotator"));
    if (!view) return json_response(200, {{"task", nullptr}, {"status", "empty"}});
    return json_response(200, {{"task", {{"task_id", view->task_id}, {"text", view->text}}}, {"status", "ok"}});
  }
  if (r.method == "POST" && std::regex_match(r.path, m, vote_re)) {
    auto body = nlohmann::json::parse(r.body);
    if (!body.contains("label")) throw ValidationError("missing field 'label'");
    auto s = store.submit_vote(require_field(body, "annotator"), m[1].str(), label_from_json(body["label"]),
                               body.value("needs_context", false));
    // The task state is withheld: it would reveal the other annotator's vote.
    return json_response(200, {{"recorded", true}, {"session", session_json(s)}});
  }
  if (r.method == "GET" && r.path == "/api/conflicts") {
    ojson list = ojson::array();
    for (const auto& t : store.conflicts(require_param(r, "adjudicator"))) {
      ojson votes = ojson::object();
      for (const auto& [a, v] : t.votes) votes[a] = {{"label", to_json(v.label)}, {"needs_context", v.needs_context}};
      list.push_back({{"task_id", t.task_id},
                      {"text", t.candidate.text},
                      {"state", std::string(to_string(t.state))},
                      {"votes", votes},
                      {"model_score", t.candidate.model_score}});
    }
    return json_response(200, {{"conflicts", list}});
  }
  if (r.method == "POST" && std::regex_match(r.path, m, resolve_re)) {
    auto body = nlohmann::json::parse(r.body);
    if (!body.contains("label")) throw ValidationError("missing field 'label'");
    auto st = store.resolve(require_field(body, "adjudicator"), m[1].str(), label_from_json(body["label"]));
    return json_response(200, {{"task_id", m[1].str()}, {"state", std::string(to_string(st))}});
  }
  if (r.method == "GET" && r.path == "/api/progress") {
    const auto p = store.progress();
    ojson j;
    j["total"] = p.total;
    const auto open = p.by_state.contains(TaskState::Open) ? p.by_state.at(TaskState::Open) : 0;
    j["open"] = open;
    j["closed"] = p.total - open;
    // Agreed vs conflict counts would let an annotator infer a co-annotator's vote.
    if (auto it = r.query.find("adjudicator"); it != r.query.end()) {
      store.authorize_adjudicator(it->second);
      for (const auto& [st, n] : p.by_state) j["by_state"][std::string(to_string(st))] = n;
    }
    if (auto it = r.query.find("annotator"); it != r.query.end())
      if (auto s = store.session(it->second)) j["session"] = session_json(*s);
    return json_response(200, j);
  }
  if (r.method == "GET" && r.path == "/api/export") {
    auto batch = store.export_batch(require_param(r, "adjudicator"));
    return {200, "application/x-ndjson", to_jsonl(batch.samples())};
  }
  if (r.method == "POST" && r.path == "/api/sessions") {
    auto body = nlohmann::json::parse(r.body);
    return json_response(200, {{"session", session_json(store.start_session(require_field(body, "annotator")))}});
  }
  return error_response(404, "not_found", "no route for " + r.method + " " + r.path);
}

}  // namespace

ApiResponse handle_api(AnnotationStore& store, const ApiRequest& request) {
  try {
    return route(store, request);
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "bad_request", std::string("invalid JSON body: ") + e.what());
  } catch (const SessionCapError& e) {
    return error_response(429, "session_cap", e.what());
  } catch (const StateError& e) {
    return error_response(409, "state", e.what());
  } catch (const AuthorizationError& e) {
    return error_response(403, "forbidden", e.what());
  } catch (const NotFoundError& e) {
    return error_response(404, "not_found", e.what());
  } catch (const ValidationError& e) {
    return error_response(400, "validation", e.what());
  }
}

AnnotationServer::AnnotationServer(AnnotationStore& store, std::filesystem::path ui_dir)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  auto adapter = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    auto out = handle_api(store_, r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server_->Get(R"(/api/.*)", adapter);
  server_->Post(R"(/api/.*)", adapter);
  if (!ui_dir.empty()) {
    if (!std::filesystem::is_directory(ui_dir)) throw ConfigError("UI directory not found: " + ui_dir.string());
    server_->set_mount_point("/", ui_dir.string());
  }
}

AnnotationServer::~AnnotationServer() = default;

int AnnotationServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void AnnotationServer::serve() { server_->listen_after_bind(); }

void AnnotationServer::stop() { server_->stop(); }

}  // namespace ctlab
