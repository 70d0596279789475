#include "ctlab/corpus.hpp"

#include "ctlab/csv.hpp"
#include "ctlab/error.hpp"
#include "ctlab/random.hpp"
#include "ctlab/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>

namespace ctlab {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kRequiredHeader[] = {"id", "text", "religio", "ethno", "nondenominational", "noncommunal"};
constexpr std::string_view kOptionalHeader[] = {"sublabel", "provenance", "needs_context"};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::uint8_t parse_flag(std::string_view raw, std::string_view column, long row) {
  const auto v = trim(raw);
  if (v == "0" || v == "false") return 0;
  if (v == "1" || v == "true") return 1;
  throw ParseError("column '" + std::string(column) + "' must be 0 or 1, got '" + v + "'", row);
}

bool parse_bool(std::string_view raw, long row) {
  const auto v = trim(raw);
  if (v.empty() || v == "0" || v == "false") return false;
  if (v == "1" || v == "true") return true;
  throw ParseError("needs_context must be 0/1/true/false, got '" + v + "'", row);
}

std::vector<std::size_t> canonical_order(const std::vector<Sample>& samples) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return samples[a].id < samples[b].id; });
  return idx;
}

ojson sample_to_json(const Sample& s) {
  ojson j;
  j["id"] = s.id;
  j["text"] = s.text;
  for (int c = 0; c < kNumClasses; ++c) j[std::string(kClassKeys[c])] = static_cast<int>(s.labels[c]);
  j["sublabel"] = s.sublabel ? ojson(*s.sublabel) : ojson(nullptr);
  j["provenance"] = std::string(to_string(s.provenance));
  j["needs_context"] = s.needs_context;
  return j;
}

}  // namespace

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Original: return "original";
    case Provenance::Paraphrase: return "paraphrase";
    case Provenance::Manual: return "manual";
    case Provenance::Mined: return "mined";
  }
  return "original";
}

Provenance parse_provenance(std::string_view s) {
  if (s.empty() || s == "original") return Provenance::Original;
  if (s == "paraphrase") return Provenance::Paraphrase;
  if (s == "manual") return Provenance::Manual;
  if (s == "mined") return Provenance::Mined;
  throw ValidationError("unknown provenance '" + std::string(s) + "'");
}

Corpus::Corpus(std::vector<Sample> samples) : samples_(std::move(samples)) {
  index_.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (s.id.empty()) throw ValidationError("sample " + std::to_string(i + 1) + " has an empty id");
    if (s.text.empty()) throw ValidationError("sample '" + s.id + "' has empty text");
    s.labels.validate("sample '" + s.id + "' (row " + std::to_string(i + 1) + ")");
    if (!index_.emplace(s.id, i).second) throw ValidationError("duplicate id '" + s.id + "'");
    for (int c = 0; c < kNumClasses; ++c) counts_[c] += s.labels[c];
    if (!s.labels.any()) ++nonviolent_;
  }
}

const Sample* Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &samples_[it->second];
}

const Sample& Corpus::at(std::string_view id) const {
  if (auto* s = find(id)) return *s;
  throw ValidationError("unknown id '" + std::string(id) + "'");
}

Corpus Corpus::subset(const std::vector<std::string>& ids) const {
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(at(id));
  return Corpus(std::move(out));
}

std::uint64_t Corpus::fingerprint() const { return fnv1a64(to_jsonl(*this)); }

CorpusFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return CorpusFormat::Csv;
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return CorpusFormat::Jsonl;
  throw ConfigError("cannot infer corpus format from '" + path.string() + "' (expected .csv or .jsonl)");
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw ConfigError("corpus file not found: " + path.string());
  const auto contents = read_file(path);
  return format == CorpusFormat::Csv ? parse_corpus_csv(contents) : parse_corpus_jsonl(contents);
}

Corpus load_corpus(const std::filesystem::path& path) { return load_corpus(path, format_from_path(path)); }

Corpus parse_corpus_csv(std::string_view contents) {
  if (contents.starts_with("\xEF\xBB\xBF")) contents.remove_prefix(3);
  auto rows = parse_csv(contents);
  if (rows.empty()) throw ParseError("missing header", 1);

  const auto& header = rows.front().fields;
  if (header.size() < std::size(kRequiredHeader)) throw ParseError("header must start with id,text,religio,ethno,nondenominational,noncommunal", 1);
  for (std::size_t i = 0; i < std::size(kRequiredHeader); ++i)
    if (trim(header[i]) != kRequiredHeader[i])
      throw ParseError("header column " + std::to_string(i + 1) + " must be '" + std::string(kRequiredHeader[i]) + "'", 1);
  int col_sub = -1, col_prov = -1, col_ctx = -1;
  for (std::size_t i = std::size(kRequiredHeader); i < header.size(); ++i) {
    const auto name = trim(header[i]);
    int* slot = name == kOptionalHeader[0] ? &col_sub : name == kOptionalHeader[1] ? &col_prov : name == kOptionalHeader[2] ? &col_ctx : nullptr;
    if (!slot) throw ParseError("unknown column '" + name + "'", 1);
    if (*slot >= 0) throw ParseError("duplicate column '" + name + "'", 1);
    *slot = static_cast<int>(i);
  }

  std::vector<Sample> samples;
  samples.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    const long row_no = static_cast<long>(r);
    if (f.size() == 1 && f[0].empty()) continue;  // blank line
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()) +
                           " (line " + std::to_string(rows[r].line) + ")",
                       row_no);
    Sample s;
    s.id = trim(f[0]);
    s.text = f[1];
    for (int c = 0; c < kNumClasses; ++c) s.labels.flags[c] = parse_flag(f[2 + c], kClassKeys[c], row_no);
    if (col_sub >= 0 && !trim(f[col_sub]).empty()) s.sublabel = trim(f[col_sub]);
    if (col_prov >= 0) {
      try {
        s.provenance = parse_provenance(trim(f[col_prov]));
      } catch (const ValidationError& e) {
        throw ParseError(e.what(), row_no);
      }
    }
    if (col_ctx >= 0) s.needs_context = parse_bool(f[col_ctx], row_no);
    if (s.text.empty()) throw ParseError("empty text for id '" + s.id + "'", row_no);
    if (!s.labels.is_valid())
      throw ValidationError("row " + std::to_string(row_no) + " (id '" + s.id +
                            "'): noncommunal cannot be combined with another class");
    samples.push_back(std::move(s));
  }
  return Corpus(std::move(samples));
}

Corpus parse_corpus_jsonl(std::string_view contents) {
  std::vector<Sample> samples;
  long row = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    auto line = contents.substr(pos, nl - pos);
    pos = nl + 1;
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), row);
    }
    if (!j.is_object()) throw ParseError("expected a JSON object", row);
    try {
      Sample s;
      const auto& id = j.at("id");
      s.id = id.is_string() ? id.get<std::string>() : id.dump();
      s.text = j.at("text").get<std::string>();
      for (int c = 0; c < kNumClasses; ++c) {
        const auto& v = j.at(std::string(kClassKeys[c]));
        int x = v.is_boolean() ? static_cast<int>(v.get<bool>()) : v.get<int>();
        if (x != 0 && x != 1) throw ParseError(std::string(kClassKeys[c]) + " must be 0 or 1", row);
        s.labels.flags[c] = static_cast<std::uint8_t>(x);
      }
      if (auto it = j.find("sublabel"); it != j.end() && !it->is_null())
        s.sublabel = it->is_string() ? it->get<std::string>() : it->dump();
      if (auto it = j.find("provenance"); it != j.end() && !it->is_null())
        s.provenance = parse_provenance(it->get<std::string>());
      if (auto it = j.find("needs_context"); it != j.end() && !it->is_null())
        s.needs_context = it->is_boolean() ? it->get<bool>() : it->get<int>() != 0;
      for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (std::find(std::begin(kRequiredHeader), std::end(kRequiredHeader), k) == std::end(kRequiredHeader) &&
            std::find(std::begin(kOptionalHeader), std::end(kOptionalHeader), k) == std::end(kOptionalHeader))
          throw ParseError("unknown field '" + k + "'", row);
      }
      if (s.text.empty()) throw ParseError("empty text for id '" + s.id + "'", row);
      if (!s.labels.is_valid())
        throw ValidationError("row " + std::to_string(row) + " (id '" + s.id +
                              "'): noncommunal cannot be combined with another class");
      samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad field: ") + e.what(), row);
    }
  }
  return Corpus(std::move(samples));
}

std::string to_csv(const Corpus& corpus) {
  std::string out = "id,text,religio,ethno,nondenominational,noncommunal,sublabel,provenance,needs_context\n";
  const auto& samples = corpus.samples();
  for (auto i : canonical_order(samples)) {
    const auto& s = samples[i];
    std::vector<std::string> f{s.id, s.text};
    for (int c = 0; c < kNumClasses; ++c) f.push_back(std::to_string(s.labels[c]));
    f.push_back(s.sublabel.value_or(""));
    f.emplace_back(to_string(s.provenance));
    f.push_back(s.needs_context ? "1" : "0");
    out += csv_line(f);
  }
  return out;
}

std::string to_jsonl(const std::vector<Sample>& samples) {
  std::string out;
  for (auto i : canonical_order(samples)) {
    out += sample_to_json(samples[i]).dump();
    out.push_back('\n');
  }
  return out;
}

std::string to_jsonl(const Corpus& corpus) { return to_jsonl(corpus.samples()); }

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, format_from_path(path) == CorpusFormat::Csv ? to_csv(corpus) : to_jsonl(corpus));
}

ClassDistribution class_distribution(const Corpus& corpus, bool violent_only) {
  if (corpus.empty()) throw EmptyInputError("class_distribution: corpus is empty");
  ClassDistribution d;
  std::size_t selected = 0;
  ClassCounts counts{};
  std::size_t nonviolent = 0;
  for (const auto& s : corpus.samples()) {
    if (violent_only && !s.labels.any()) continue;
    ++selected;
    for (int c = 0; c < kNumClasses; ++c) counts[c] += s.labels[c];
    if (!s.labels.any()) ++nonviolent;
  }
  if (selected == 0) throw EmptyInputError("class_distribution: no violent samples in corpus");
  d.denominator = selected;
  for (int c = 0; c < kNumClasses; ++c) d.fraction[c] = static_cast<double>(counts[c]) / static_cast<double>(selected);
  d.nonviolent = static_cast<double>(nonviolent) / static_cast<double>(selected);
  return d;
}

std::optional<SplitSpec::Part> SplitSpec::part_of(std::string_view id) const {
  auto has = [&](const std::vector<std::string>& v) { return std::find(v.begin(), v.end(), id) != v.end(); };
  if (has(train)) return Part::Train;
  if (has(val)) return Part::Val;
  if (has(test)) return Part::Test;
  return std::nullopt;
}

namespace {

/// Largest-remainder apportionment of `total` over per-stratum quotas.
std::vector<std::size_t> apportion(const std::vector<double>& quotas, std::size_t total) {
  std::vector<std::size_t> out(quotas.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < quotas.size(); ++k) {
    out[k] = static_cast<std::size_t>(std::floor(quotas[k]));
    assigned += out[k];
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return quotas[a] - std::floor(quotas[a]) > quotas[b] - std::floor(quotas[b]);
  });
  for (std::size_t i = 0; assigned < total && i < order.size(); ++i, ++assigned) ++out[order[i]];
  return out;
}

}  // namespace

SplitSpec split(const Corpus& corpus, std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (n < 10) throw ValidationError("split: corpus needs at least 10 samples, got " + std::to_string(n));

  const auto test_total = static_cast<std::size_t>(std::llround(kTestFraction * static_cast<double>(n)));
  const auto val_total = static_cast<std::size_t>(std::llround(kValFraction * static_cast<double>(n - test_total)));

  std::array<std::vector<std::string>, kNumDecisions> strata;
  for (const auto& s : corpus.samples()) strata[static_cast<int>(s.labels.decision())].push_back(s.id);

  Rng rng = Rng::substream(seed, "split");
  std::vector<double> test_quota(kNumDecisions), val_quota(kNumDecisions);
  for (int k = 0; k < kNumDecisions; ++k) {
    std::sort(strata[k].begin(), strata[k].end());
    rng.shuffle(std::span(strata[k]));
    test_quota[k] = kTestFraction * static_cast<double>(strata[k].size());
  }
  const auto test_k = apportion(test_quota, test_total);
  for (int k = 0; k < kNumDecisions; ++k)
    val_quota[k] = kValFraction * static_cast<double>(strata[k].size() - test_k[k]);
  const auto val_k = apportion(val_quota, val_total);

  SplitSpec out;
  out.seed = seed;
  for (int k = 0; k < kNumDecisions; ++k) {
    const auto& ids = strata[k];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i < test_k[k])
        out.test.push_back(ids[i]);
      else if (i < test_k[k] + val_k[k])
        out.val.push_back(ids[i]);
      else
        out.train.push_back(ids[i]);
    }
  }
  if (out.train.empty() || out.val.empty() || out.test.empty())
    throw ValidationError("split: corpus too small to populate train, val and test");
  return out;
}

std::string split_to_json(const SplitSpec& s) {
  ojson j;
  j["seed"] = s.seed;
  j["train"] = s.train;
  j["val"] = s.val;
  j["test"] = s.test;
  return j.dump(1) + "\n";
}

SplitSpec split_from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    SplitSpec s;
    s.seed = j.value("seed", std::uint64_t{0});
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("split file: ") + e.what());
  }
}

}  // namespace ctlab
