#include "ctlab/preprocess.hpp"

#include "ctlab/error.hpp"
#include "ctlab/util.hpp"

#include <nlohmann/json.hpp>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/uscript.h>

#include <regex>

namespace ctlab {

namespace {

std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  auto in = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString out = norm->normalize(in, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  std::string s;
  out.toUTF8String(s);
  return s;
}

bool is_mark(char32_t cp) {
  const auto mask = U_GET_GC_MASK(static_cast<UChar32>(cp));
  return (mask & U_GC_M_MASK) != 0;
}

bool in_bengali_block(char32_t cp) { return cp >= 0x0980 && cp <= 0x09FF; }

bool is_joiner(char32_t cp) { return cp == 0x200C || cp == 0x200D; }

bool is_emoji_component(char32_t cp) {
  const auto c = static_cast<UChar32>(cp);
  return u_hasBinaryProperty(c, UCHAR_EXTENDED_PICTOGRAPHIC) || u_hasBinaryProperty(c, UCHAR_EMOJI_MODIFIER) ||
         u_hasBinaryProperty(c, UCHAR_REGIONAL_INDICATOR);
}

/// Code points that can carry a combining mark in fix_chars.
bool is_base(char32_t cp) {
  const auto c = static_cast<UChar32>(cp);
  return u_isalpha(c) || u_isdigit(c) || is_mark(cp) || is_joiner(cp) || is_emoji_component(cp);
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (c == ' ') {
      pending = true;
      continue;
    }
    if (pending && !out.empty()) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

const std::regex& emoji_token_re() {
  static const std::regex re(":[a-z_]+_emoji:");
  return re;
}

}  // namespace

void PreprocessConfig::validate() const {
  if (max_tokens < 8) throw ConfigError("max_tokens must be >= 8, got " + std::to_string(max_tokens));
  for (const auto& [emoji, token] : emoji_map)
    if (!is_emoji_token(token)) throw ConfigError("emoji map value '" + token + "' does not match :[a-z_]+_emoji:");
}

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::set<std::string> out;
  const auto text = read_file(path);
  for (const auto& line : split_whitespace(text)) {
    if (line.starts_with('#')) continue;
    out.insert(nfc(line));
  }
  return out;
}

std::map<std::string, std::string, std::less<>> load_emoji_map(const std::filesystem::path& path) {
  std::map<std::string, std::string, std::less<>> out;
  try {
    auto j = nlohmann::json::parse(read_file(path));
    if (!j.is_object()) throw ConfigError("emoji map must be a JSON object: " + path.string());
    for (auto it = j.begin(); it != j.end(); ++it) out.emplace(it.key(), it.value().get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("emoji map " + path.string() + ": " + e.what());
  }
  return out;
}

PreprocessConfig load_preprocess_config(const std::filesystem::path& stopwords, const std::filesystem::path& emoji_map,
                                        int max_tokens) {
  PreprocessConfig cfg;
  if (!stopwords.empty()) cfg.stopwords = load_stopwords(stopwords);
  if (!emoji_map.empty()) cfg.emoji_map = load_emoji_map(emoji_map);
  cfg.max_tokens = max_tokens;
  cfg.validate();
  return cfg;
}

bool is_emoji_start(char32_t cp) {
  const auto c = static_cast<UChar32>(cp);
  return u_hasBinaryProperty(c, UCHAR_EXTENDED_PICTOGRAPHIC) || u_hasBinaryProperty(c, UCHAR_REGIONAL_INDICATOR) ||
         u_hasBinaryProperty(c, UCHAR_EMOJI_MODIFIER);
}

bool is_emoji_token(std::string_view token) {
  return std::regex_match(token.begin(), token.end(), emoji_token_re());
}

CharAction classify_char(char32_t cp) {
  const auto c = static_cast<UChar32>(cp);
  if (u_isUWhiteSpace(c)) return CharAction::Space;
  const auto mask = U_GET_GC_MASK(c);
  if (mask & U_GC_CC_MASK) return CharAction::Drop;
  if (cp == 0xFE0F || cp == 0x20E3 || is_joiner(cp)) return CharAction::KeepIfAttached;
  if (cp >= 0xE0020 && cp <= 0xE007F) return CharAction::KeepIfAttached;  // emoji tag sequences
  if (is_emoji_component(cp)) return CharAction::Keep;
  if (mask & U_GC_M_MASK) return CharAction::KeepIfAttached;
  if (u_isdigit(c)) return CharAction::Keep;
  if (mask & U_GC_L_MASK) {
    if (in_bengali_block(cp)) return CharAction::Keep;
    UErrorCode status = U_ZERO_ERROR;
    if (uscript_getScript(c, &status) == USCRIPT_LATIN) return CharAction::Keep;
    return CharAction::Drop;
  }
  if (mask & (U_GC_P_MASK | U_GC_S_MASK | U_GC_Z_MASK)) return CharAction::Space;
  return CharAction::Drop;
}

std::string fix_chars(std::string_view text) {
  std::u32string cps;
  for (char32_t cp : utf8_decode(text))
    if (cp != 0xFFFD && cp != 0xFFFC) cps.push_back(cp);
  const auto composed = utf8_decode(nfc(utf8_encode(cps)));
  std::u32string out;
  out.reserve(composed.size());
  bool attach_ok = false;
  for (char32_t cp : composed) {
    if (is_mark(cp) && cp != 0xFE0F && !attach_ok) continue;  // isolated combining mark
    if (cp == 0xFE0F && !attach_ok) continue;
    out.push_back(cp);
    attach_ok = is_base(cp);
  }
  return utf8_encode(out);
}

std::string strip_noise(std::string_view text) {
  std::string out;
  for (const auto& token : split_whitespace(text)) {
    if (!out.empty()) out.push_back(' ');
    if (is_emoji_token(token)) {
      out += token;
      continue;
    }
    bool attach_ok = false;
    for (char32_t cp : utf8_decode(token)) {
      switch (classify_char(cp)) {
        case CharAction::Keep:
          utf8_append(out, cp);
          attach_ok = true;
          break;
        case CharAction::KeepIfAttached:
          if (attach_ok) utf8_append(out, cp);
          break;
        case CharAction::Space:
          out.push_back(' ');
          attach_ok = false;
          break;
        case CharAction::Drop:
          attach_ok = false;
          break;
      }
    }
    out.push_back(' ');
  }
  return nfc(collapse_spaces(out));
}

std::string replace_emojis(std::string_view text, const std::map<std::string, std::string, std::less<>>& emoji_map) {
  std::size_t max_key = 1;
  for (const auto& [k, v] : emoji_map) max_key = std::max(max_key, utf8_decode(k).size());

  const auto cps = utf8_decode(text);
  std::string out;
  auto emit_token = [&](std::string_view token, std::size_t next) {
    if (!out.empty() && out.back() != ' ') out.push_back(' ');
    out += token;
    if (next < cps.size() && !u_isUWhiteSpace(static_cast<UChar32>(cps[next]))) out.push_back(' ');
  };

  // Marks and joiners left hanging off an emoji would be orphaned once it becomes a token.
  auto absorb_attached = [&](std::size_t j) {
    while (j < cps.size() && classify_char(cps[j]) == CharAction::KeepIfAttached) ++j;
    return j;
  };

  std::size_t i = 0;
  while (i < cps.size()) {
    if (!is_emoji_start(cps[i])) {
      utf8_append(out, cps[i]);
      ++i;
      continue;
    }
    bool matched = false;
    for (std::size_t len = std::min(max_key, cps.size() - i); len >= 1; --len) {
      const auto key = utf8_encode(std::u32string_view(cps).substr(i, len));
      if (auto it = emoji_map.find(key); it != emoji_map.end()) {
        const std::size_t end = absorb_attached(i + len);
        emit_token(it->second, end);
        i = end;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    // Unmapped: consume the whole emoji cluster (modifiers, selectors, ZWJ chains, tags).
    std::size_t j = i + 1;
    const bool regional = u_hasBinaryProperty(static_cast<UChar32>(cps[i]), UCHAR_REGIONAL_INDICATOR);
    if (regional && j < cps.size() && u_hasBinaryProperty(static_cast<UChar32>(cps[j]), UCHAR_REGIONAL_INDICATOR)) ++j;
    while (j < cps.size()) {
      const char32_t c = cps[j];
      if (c == 0xFE0F || c == 0x20E3 || u_hasBinaryProperty(static_cast<UChar32>(c), UCHAR_EMOJI_MODIFIER) ||
          (c >= 0xE0020 && c <= 0xE007F)) {
        ++j;
      } else if (c == 0x200D && j + 1 < cps.size() && is_emoji_start(cps[j + 1])) {
        j += 2;
      } else {
        break;
      }
    }
    j = absorb_attached(j);
    emit_token(kUnknownEmojiToken, j);
    i = j;
  }
  return out;
}

std::string remove_stopwords(std::string_view text, const std::set<std::string>& stopwords) {
  std::vector<std::string> kept;
  for (auto& tok : split_whitespace(text))
    if (is_emoji_token(tok) || !stopwords.contains(tok)) kept.push_back(std::move(tok));
  return join(kept, " ");
}

std::string normalize(std::string_view text, const PreprocessConfig& config) {
  std::string s(text);
  if (config.steps.fix_chars) s = fix_chars(s);
  if (config.steps.strip_noise) s = strip_noise(s);
  if (config.steps.replace_emojis) s = replace_emojis(s, config.emoji_map);
  if (config.steps.remove_stopwords) s = remove_stopwords(s, config.stopwords);
  return s;
}

}  // namespace ctlab
