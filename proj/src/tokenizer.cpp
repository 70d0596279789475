#include "ctlab/tokenizer.hpp"

#include "ctlab/error.hpp"
#include "ctlab/random.hpp"
#include "ctlab/util.hpp"

#include <unicode/uchar.h>

#include <charconv>

namespace ctlab {

std::vector<std::string> pre_tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& word : split_whitespace(text)) {
    std::string cur;
    for (char32_t cp : utf8_decode(word)) {
      if (U_GET_GC_MASK(static_cast<UChar32>(cp)) & U_GC_P_MASK) {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
        std::string p;
        utf8_append(p, cp);
        out.push_back(std::move(p));
      } else {
        utf8_append(cur, cp);
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
  }
  return out;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  const auto sp = specials();
  std::vector<int> ids{sp.cls};
  for (const auto& word : pre_tokenize(text)) {
    auto w = word_ids(word);
    ids.insert(ids.end(), w.begin(), w.end());
  }
  ids.push_back(sp.sep);
  return ids;
}

std::vector<int> Tokenizer::encode(std::string_view text, int max_tokens) const {
  auto ids = encode(text);
  if (max_tokens >= kSpecialsPerSequence && static_cast<int>(ids.size()) > max_tokens) {
    const int sep = ids.back();
    ids.resize(static_cast<std::size_t>(max_tokens));
    ids.back() = sep;
  }
  return ids;
}

HashedSubwordTokenizer::HashedSubwordTokenizer(int buckets, int piece_len) : buckets_(buckets), piece_len_(piece_len) {
  if (buckets < 1 || piece_len < 1) throw ConfigError("hashed tokenizer needs buckets >= 1 and piece_len >= 1");
}

std::vector<std::string> HashedSubwordTokenizer::word_pieces(std::string_view word) const {
  const auto cps = utf8_decode(word);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < cps.size(); i += static_cast<std::size_t>(piece_len_)) {
    std::string piece = i == 0 ? "" : "##";
    piece += utf8_encode(std::u32string_view(cps).substr(i, static_cast<std::size_t>(piece_len_)));
    out.push_back(std::move(piece));
  }
  return out;
}

std::vector<int> HashedSubwordTokenizer::word_ids(std::string_view word) const {
  std::vector<int> out;
  for (const auto& p : word_pieces(word))
    out.push_back(4 + static_cast<int>(fnv1a64(p) % static_cast<std::uint64_t>(buckets_)));
  return out;
}

WordPieceTokenizer::WordPieceTokenizer(std::string id, std::vector<std::string> vocab)
    : id_(std::move(id)), vocab_(std::move(vocab)) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i));
  auto need = [&](const char* tok) {
    auto it = index_.find(tok);
    if (it == index_.end()) throw ConfigError("tokenizer '" + id_ + "': vocab lacks " + tok);
    return it->second;
  };
  specials_ = {need("[PAD]"), need("[UNK]"), need("[CLS]"), need("[SEP]")};
}

WordPieceTokenizer WordPieceTokenizer::from_file(std::string id, const std::filesystem::path& vocab_txt) {
  const auto text = read_file(vocab_txt);
  std::vector<std::string> vocab;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(std::move(line));
    pos = nl + 1;
  }
  return WordPieceTokenizer(std::move(id), std::move(vocab));
}

std::vector<std::string> WordPieceTokenizer::word_pieces(std::string_view word) const {
  const auto cps = utf8_decode(word);
  if (static_cast<int>(cps.size()) > max_chars_per_word_) return {vocab_[static_cast<std::size_t>(specials_.unk)]};
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < cps.size()) {
    std::size_t end = cps.size();
    std::string found;
    while (start < end) {
      std::string piece = start > 0 ? "##" : "";
      piece += utf8_encode(std::u32string_view(cps).substr(start, end - start));
      if (index_.contains(piece)) {
        found = std::move(piece);
        break;
      }
      --end;
    }
    if (found.empty()) return {vocab_[static_cast<std::size_t>(specials_.unk)]};
    out.push_back(std::move(found));
    start = end;
  }
  return out;
}

std::vector<int> WordPieceTokenizer::word_ids(std::string_view word) const {
  std::vector<int> out;
  for (const auto& p : word_pieces(word)) out.push_back(index_.at(p));
  return out;
}

TokenizerRegistry::TokenizerRegistry(std::vector<std::filesystem::path> search_roots) : roots_(std::move(search_roots)) {}

namespace {

bool parse_hashed_id(std::string_view id, int& buckets, int& piece_len) {
  if (!id.starts_with("hashed-")) return false;
  id.remove_prefix(7);
  auto dash = id.find('-');
  if (dash == std::string_view::npos) return false;
  auto a = id.substr(0, dash), b = id.substr(dash + 1);
  return std::from_chars(a.data(), a.data() + a.size(), buckets).ec == std::errc{} &&
         std::from_chars(b.data(), b.data() + b.size(), piece_len).ec == std::errc{} && buckets > 0 && piece_len > 0;
}

}  // namespace

bool TokenizerRegistry::has(std::string_view id) const {
  try {
    resolve(id);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

std::shared_ptr<const Tokenizer> TokenizerRegistry::resolve(std::string_view id) const {
  if (id == "tiny") return std::make_shared<HashedSubwordTokenizer>();
  int buckets = 0, piece_len = 0;
  if (parse_hashed_id(id, buckets, piece_len)) return std::make_shared<HashedSubwordTokenizer>(buckets, piece_len);
  for (const auto& root : roots_) {
    const auto vocab = root / std::string(id) / "vocab.txt";
    if (std::filesystem::exists(vocab)) return std::make_shared<WordPieceTokenizer>(WordPieceTokenizer::from_file(std::string(id), vocab));
  }
  if (std::filesystem::exists(std::filesystem::path(id) / "vocab.txt"))
    return std::make_shared<WordPieceTokenizer>(
        WordPieceTokenizer::from_file(std::string(id), std::filesystem::path(id) / "vocab.txt"));
  throw ConfigError("unknown tokenizer '" + std::string(id) +
                    "': use 'tiny', 'hashed-<buckets>-<piece_len>', or a directory containing vocab.txt");
}

TokenStats token_stats(std::string_view text, const Tokenizer& tokenizer, int max_tokens) {
  const int count = static_cast<int>(tokenizer.encode(text).size());
  return {count, count > max_tokens};
}

TokenStats token_stats(std::string_view text, std::string_view tokenizer_id, int max_tokens,
                       const TokenizerRegistry& registry) {
  return token_stats(text, *registry.resolve(tokenizer_id), max_tokens);
}

}  // namespace ctlab
