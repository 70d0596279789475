#include "ctlab/predictions.hpp"

#include "ctlab/error.hpp"
#include "ctlab/util.hpp"

#include <nlohmann/json.hpp>

#include <unordered_map>

namespace ctlab {

std::string predictions_to_jsonl(std::span<const std::string> ids, const ProbabilityMatrix& probs,
                                 std::span<const DecisionLabel> decisions) {
  if (static_cast<Eigen::Index>(ids.size()) != probs.rows() || (!decisions.empty() && decisions.size() != ids.size()))
    throw ValidationError("predictions: ids, probabilities and decisions are not aligned");
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = ids[i];
    std::vector<double> row(kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) row[c] = probs(static_cast<Eigen::Index>(i), c);
    j["probs"] = row;
    if (!decisions.empty()) j["decision"] = std::string(to_string(decisions[i]));
    out += j.dump() + "\n";
  }
  return out;
}

ScoredRows parse_predictions(std::string_view text) {
  ScoredRows rows;
  std::vector<std::array<double, kNumClasses>> probs;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      const auto& id = j.at("id");
      rows.ids.push_back(id.is_string() ? id.get<std::string>() : id.dump());
      auto p = j.at("probs").get<std::vector<double>>();
      if (p.size() != kNumClasses) throw ParseError("probs must have 4 entries", line_no);
      for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw ParseError("probability outside [0,1]", line_no);
      probs.push_back({p[0], p[1], p[2], p[3]});
      std::optional<DecisionLabel> d;
      if (auto it = j.find("decision"); it != j.end() && it->is_string()) {
        d = parse_decision(it->get<std::string>());
        if (!d) throw ParseError("unknown decision '" + it->get<std::string>() + "'", line_no);
      }
      rows.decisions.push_back(d);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("predictions: ") + e.what(), line_no);
    }
  }
  rows.probs.resize(static_cast<Eigen::Index>(probs.size()), kNumClasses);
  for (std::size_t i = 0; i < probs.size(); ++i)
    for (int c = 0; c < kNumClasses; ++c) rows.probs(static_cast<Eigen::Index>(i), c) = probs[i][c];
  return rows;
}

ScoredRows read_predictions(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("predictions file not found: " + path.string());
  return parse_predictions(read_file(path));
}

ScoredRows align_to(const ScoredRows& rows, std::span<const std::string> ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < rows.ids.size(); ++i) index.emplace(rows.ids[i], i);
  ScoredRows out;
  out.probs.resize(static_cast<Eigen::Index>(ids.size()), kNumClasses);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    auto it = index.find(ids[k]);
    if (it == index.end()) throw ValidationError("no prediction for id '" + ids[k] + "'");
    out.ids.push_back(ids[k]);
    out.probs.row(static_cast<Eigen::Index>(k)) = rows.probs.row(static_cast<Eigen::Index>(it->second));
    out.decisions.push_back(rows.decisions[it->second]);
  }
  return out;
}

}  // namespace ctlab
