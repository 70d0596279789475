#include "ctlab/augment.hpp"

#include "ctlab/csv.hpp"
#include "ctlab/error.hpp"
#include "ctlab/random.hpp"
#include "ctlab/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <unordered_set>

namespace ctlab {

std::string_view to_string(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::Pending: return "pending";
    case CandidateStatus::Accepted: return "accepted";
    case CandidateStatus::Rejected: return "rejected";
    case CandidateStatus::Conflict: return "conflict";
  }
  return "pending";
}

CandidateStatus parse_candidate_status(std::string_view s) {
  for (auto st : {CandidateStatus::Pending, CandidateStatus::Accepted, CandidateStatus::Rejected,
                  CandidateStatus::Conflict})
    if (to_string(st) == s) return st;
  throw ValidationError("unknown candidate status '" + std::string(s) + "'");
}

bool can_transition(CandidateStatus from, CandidateStatus to) {
  if (from == CandidateStatus::Pending) return to != CandidateStatus::Pending;
  if (from == CandidateStatus::Conflict) return to == CandidateStatus::Accepted || to == CandidateStatus::Rejected;
  return false;
}

double CandidateComment::max_score() const { return *std::max_element(model_score.begin(), model_score.end()); }

void CandidateComment::transition(CandidateStatus to) {
  if (!can_transition(status, to))
    throw StateError("candidate " + id + ": cannot move from " + std::string(to_string(status)) + " to " +
                     std::string(to_string(to)));
  status = to;
}

AugmentationBatch::AugmentationBatch(std::vector<Sample> samples) : samples_(std::move(samples)) {
  std::unordered_set<std::string> ids;
  for (const auto& s : samples_) {
    if (s.provenance == Provenance::Original)
      throw ValidationError("augmentation sample " + s.id + " has provenance 'original'");
    if (s.text.empty()) throw ValidationError("augmentation sample " + s.id + " has empty text");
    s.labels.validate(s.id);
    if (!ids.insert(s.id).second) throw ValidationError("duplicate id in augmentation batch: " + s.id);
    for (int c = 0; c < kNumClasses; ++c) counts_[c] += s.labels[c];
  }
}

std::vector<ParaphrasePair> parse_paraphrase_csv(std::string_view contents) {
  auto rows = parse_csv(contents);
  if (rows.empty()) return {};
  const auto& header = rows.front().fields;
  auto col = [&](std::string_view name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("paraphrase CSV lacks column '" + std::string(name) + "'", 1);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto src = col("source_id"), txt = col("paraphrased_text");
  std::vector<ParaphrasePair> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()),
                       rows[i].line);
    out.push_back({f[src], f[txt]});
  }
  return out;
}

std::vector<ParaphrasePair> load_paraphrases(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("paraphrase file not found: " + path.string());
  return parse_paraphrase_csv(read_file(path));
}

AugmentationBatch ingest_paraphrases(const Corpus& base, std::span<const ParaphrasePair> pairs,
                                     const PreprocessConfig& config) {
  std::vector<std::string> unknown;
  for (const auto& p : pairs)
    if (!base.contains(p.source_id)) unknown.push_back(p.source_id);
  if (!unknown.empty()) throw ValidationError("unknown paraphrase source ids: " + join(unknown, ", "));

  std::unordered_set<std::string> seen;
  for (const auto& s : base.samples()) seen.insert(normalize(s.text, config));

  std::vector<Sample> out;
  std::vector<std::string> warnings;
  std::unordered_map<std::string, int> per_source;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.text.find_first_not_of(" \t\r\n") == std::string::npos) {
      warnings.push_back("pair " + std::to_string(i + 1) + " (source " + p.source_id + "): empty paraphrase skipped");
      continue;
    }
    if (!seen.insert(normalize(p.text, config)).second) continue;
    const auto& src = base.at(p.source_id);
    Sample s;
    std::string id;
    do {
      id = p.source_id + "-para" + std::to_string(++per_source[p.source_id]);
    } while (base.contains(id));
    s.id = std::move(id);
    s.text = p.text;
    s.labels = src.labels;
    s.provenance = Provenance::Paraphrase;
    s.needs_context = src.needs_context;
    s.sublabel = src.sublabel;
    out.push_back(std::move(s));
  }
  AugmentationBatch batch(std::move(out));
  batch.warnings = std::move(warnings);
  return batch;
}

std::vector<CandidateComment> mine_candidates(std::span<const std::string> texts, const Predictor& model,
                                              double threshold, std::string_view source) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("mining threshold must be in (0, 1)");
  if (texts.empty()) return {};
  const ProbabilityMatrix probs = model.predict(texts);
  std::vector<CandidateComment> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    CandidateComment c;
    for (int k = 0; k < kNumClasses; ++k) c.model_score[k] = probs(static_cast<Eigen::Index>(i), k);
    if (c.max_score() < threshold) continue;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(texts[i])));
    c.id = "mined-" + std::string(hex);
    c.text = texts[i];
    c.source = std::string(source);
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.max_score() > b.max_score(); });
  // identical texts hash to one id; keep the first
  std::unordered_set<std::string> ids;
  std::erase_if(out, [&](const auto& c) { return !ids.insert(c.id).second; });
  return out;
}

std::vector<std::string> load_external_texts(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("external corpus not found: " + path.string());
  const std::string contents = read_file(path);
  const auto ext = path.extension().string();
  const bool jsonl = ext == ".jsonl" || ext == ".json";
  std::vector<std::string> out;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto nl = contents.find('\n', pos);
    if (nl == std::string::npos) nl = contents.size();
    std::string line = contents.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!jsonl) {
      out.push_back(std::move(line));
      continue;
    }
    try {
      auto j = nlohmann::json::parse(line);
      auto t = j.at("text").get<std::string>();
      if (!t.empty()) out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("external corpus: ") + e.what(), line_no);
    }
  }
  return out;
}

std::string candidates_to_jsonl(const std::vector<CandidateComment>& candidates) {
  std::string out;
  for (const auto& c : candidates) {
    nlohmann::ordered_json j;
    j["id"] = c.id;
    j["text"] = c.text;
    j["source"] = c.source;
    j["model_score"] = c.model_score;
    j["status"] = std::string(to_string(c.status));
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<CandidateComment> parse_candidates_jsonl(std::string_view contents) {
  std::vector<CandidateComment> out;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    auto line = contents.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      CandidateComment c;
      c.id = j.at("id").get<std::string>();
      c.text = j.at("text").get<std::string>();
      c.source = j.value("source", std::string("external"));
      if (j.contains("model_score")) c.model_score = j["model_score"].get<std::array<double, kNumClasses>>();
      c.status = parse_candidate_status(j.value("status", std::string("pending")));
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("candidates: ") + e.what(), line_no);
    }
  }
  return out;
}

Corpus merge_accepted(const Corpus& base, const AugmentationBatch& batch) {
  std::vector<std::string> clashes;
  for (const auto& s : batch.samples())
    if (base.contains(s.id)) clashes.push_back(s.id);
  if (!clashes.empty()) throw ValidationError("augmentation ids already in corpus: " + join(clashes, ", "));
  std::vector<Sample> merged = base.samples();
  merged.insert(merged.end(), batch.samples().begin(), batch.samples().end());
  return Corpus(std::move(merged));
}

AugmentationBatch load_batch(const std::filesystem::path& path) {
  Corpus c = load_corpus(path);
  return AugmentationBatch(c.samples());
}

}  // namespace ctlab
