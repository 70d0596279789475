#include "ctlab/metrics.hpp"

#include "ctlab/error.hpp"
#include "ctlab/random.hpp"
#include "ctlab/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>
#include <sstream>

namespace ctlab {

namespace {

constexpr std::array<std::string_view, kNumClasses> kTableNames = {"Religio-communal", "Ethno-communal",
                                                                    "Nondenominational", "Noncommunal"};

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

PRF per_class_prf(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gold) {
  if (pred.size() != gold.size())
    throw ValidationError("per_class_prf: length mismatch " + std::to_string(pred.size()) + " vs " +
                          std::to_string(gold.size()));
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gold[i] != 0;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  PRF r;
  r.precision = ratio(tp, tp + fp);
  r.recall = ratio(tp, tp + fn);
  r.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  return r;
}

double macro_f1(const std::array<double, kNumClasses>& f1s) {
  return (f1s[0] + f1s[1] + f1s[2] + f1s[3]) / kNumClasses;
}

ConfusionMatrix confusion_matrix(std::span<const DecisionLabel> pred, std::span<const DecisionLabel> gold) {
  if (pred.size() != gold.size())
    throw ValidationError("confusion_matrix: length mismatch " + std::to_string(pred.size()) + " vs " +
                          std::to_string(gold.size()));
  ConfusionMatrix m = ConfusionMatrix::Zero();
  for (std::size_t i = 0; i < pred.size(); ++i) ++m(static_cast<int>(gold[i]), static_cast<int>(pred[i]));
  return m;
}

MetricsReport evaluate(const BinaryMatrix& pred, std::span<const DecisionLabel> decisions,
                       std::span<const LabelVector> gold) {
  const auto n = gold.size();
  if (static_cast<std::size_t>(pred.rows()) != n || decisions.size() != n)
    throw ValidationError("evaluate: predictions and gold labels are not aligned");
  MetricsReport r;
  r.n = n;
  std::array<double, kNumClasses> f1s{};
  std::vector<std::uint8_t> p(n), g(n);
  for (int c = 0; c < kNumClasses; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = pred(static_cast<Eigen::Index>(i), c);
      g[i] = gold[i][c];
      r.support[c] += g[i];
    }
    r.per_class[c] = per_class_prf(p, g);
    f1s[c] = r.per_class[c].f1;
  }
  r.macro_f1 = macro_f1(f1s);
  std::vector<DecisionLabel> gold_decisions;
  gold_decisions.reserve(n);
  for (const auto& l : gold) gold_decisions.push_back(l.decision());
  r.confusion = confusion_matrix(decisions, gold_decisions);
  return r;
}

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["macro_f1"] = r.macro_f1;
  for (int c = 0; c < kNumClasses; ++c) {
    nlohmann::ordered_json pc;
    pc["precision"] = r.per_class[c].precision;
    pc["recall"] = r.per_class[c].recall;
    pc["f1"] = r.per_class[c].f1;
    pc["support"] = r.support[c];
    j["per_class"][std::string(kClassKeys[c])] = pc;
  }
  j["confusion_labels"] = std::vector<std::string>(kDecisionNames.begin(), kDecisionNames.end());
  for (int g = 0; g < kNumDecisions; ++g) {
    std::vector<long> row(kNumDecisions);
    for (int p = 0; p < kNumDecisions; ++p) row[p] = r.confusion(g, p);
    j["confusion"].push_back(row);
  }
  return j.dump(2) + "\n";
}

std::string render_table(const MetricsReport& r, std::string_view title) {
  std::ostringstream os;
  if (!title.empty()) os << title << "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %7s %7s %7s %9s %8s\n", "Class", "Prec.", "Recall", "F1", "Macro F1", "Support");
  os << line;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& m = r.per_class[c];
    const std::string macro = c == 0 ? format_double(r.macro_f1, 4) : "";
    std::snprintf(line, sizeof line, "%-20s %7.3f %7.3f %7.3f %9s %8zu\n", std::string(kTableNames[c]).c_str(),
                  m.precision, m.recall, m.f1, macro.c_str(), r.support[c]);
    os << line;
  }
  return os.str();
}

std::string confusion_csv(const ConfusionMatrix& m) {
  std::string out = "gold\\pred";
  for (auto name : kDecisionNames) out += "," + std::string(name);
  out += "\n";
  for (int g = 0; g < kNumDecisions; ++g) {
    out += std::string(kDecisionNames[g]);
    for (int p = 0; p < kNumDecisions; ++p) out += "," + std::to_string(m(g, p));
    out += "\n";
  }
  return out;
}

std::string confusion_svg(const ConfusionMatrix& m, std::string_view title) {
  constexpr int cell = 80, left = 150, top = 60;
  const long peak = std::max<long>(1, m.maxCoeff());
  std::ostringstream os;
  const int size_w = left + cell * kNumDecisions + 20, size_h = top + cell * kNumDecisions + 40;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_w << "\" height=\"" << size_h
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << (title.empty() ? "Confusion matrix" : title)
     << " (rows: gold, columns: predicted)</text>\n";
  for (int p = 0; p < kNumDecisions; ++p)
    os << "<text x=\"" << left + p * cell + cell / 2 << "\" y=\"" << top - 8 << "\" text-anchor=\"middle\">"
       << kDecisionNames[p] << "</text>\n";
  for (int g = 0; g < kNumDecisions; ++g) {
    os << "<text x=\"" << left - 8 << "\" y=\"" << top + g * cell + cell / 2 + 4 << "\" text-anchor=\"end\">"
       << kDecisionNames[g] << "</text>\n";
    for (int p = 0; p < kNumDecisions; ++p) {
      const double t = static_cast<double>(m(g, p)) / static_cast<double>(peak);
      const int shade = static_cast<int>(255 - 200 * t);
      os << "<rect x=\"" << left + p * cell << "\" y=\"" << top + g * cell << "\" width=\"" << cell << "\" height=\""
         << cell << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#888\"/>\n";
      os << "<text x=\"" << left + p * cell + cell / 2 << "\" y=\"" << top + g * cell + cell / 2 + 4
         << "\" text-anchor=\"middle\" fill=\"" << (t > 0.6 ? "#fff" : "#000") << "\">" << m(g, p) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<Misclassification> misclassification_report(const Corpus& corpus, std::span<const std::string> ids,
                                                         std::span<const DecisionLabel> decisions,
                                                         const ProbabilityMatrix& probabilities) {
  if (ids.size() != decisions.size() || static_cast<Eigen::Index>(ids.size()) != probabilities.rows())
    throw ValidationError("misclassification_report: inputs are not aligned");
  std::vector<Misclassification> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& s = corpus.at(ids[i]);
    const auto gold = s.labels.decision();
    if (gold == decisions[i]) continue;
    out.push_back({s.id, s.text, gold, decisions[i], probabilities.row(static_cast<Eigen::Index>(i)).maxCoeff()});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  return out;
}

std::vector<Misclassification> subsample(const std::vector<Misclassification>& report, std::size_t k,
                                         std::uint64_t seed) {
  if (k >= report.size()) return report;
  std::vector<std::size_t> idx(report.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::substream(seed, "sample");
  // partial Fisher-Yates: the first k slots become the sample
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<Misclassification> out;
  out.reserve(k);
  for (auto i : idx) out.push_back(report[i]);
  return out;
}

std::string misclassifications_to_jsonl(const std::vector<Misclassification>& report) {
  std::string out;
  for (const auto& m : report) {
    nlohmann::ordered_json j;
    j["id"] = m.id;
    j["text"] = m.text;
    j["gold"] = std::string(to_string(m.gold));
    j["pred"] = std::string(to_string(m.pred));
    j["score"] = m.score;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace ctlab
