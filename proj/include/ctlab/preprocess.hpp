#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace ctlab {

struct PreprocessSteps {
  bool fix_chars = true;
  bool strip_noise = true;
  bool replace_emojis = true;
  bool remove_stopwords = true;
};

struct PreprocessConfig {
  std::set<std::string> stopwords;
  /// emoji sequence (UTF-8) -> token of the form :name_emoji:
  std::map<std::string, std::string, std::less<>> emoji_map;
  int max_tokens = 512;
  PreprocessSteps steps;

  /// Throws ConfigError when max_tokens < 8 or an emoji token breaks the :[a-z_]+_emoji: pattern.
  void validate() const;
};

inline constexpr std::string_view kUnknownEmojiToken = ":unknown_emoji:";

/// One token per line, NFC-normalized on load; blank lines and '#' comments skipped.
std::set<std::string> load_stopwords(const std::filesystem::path& path);
/// JSON object {emoji: token}.
std::map<std::string, std::string, std::less<>> load_emoji_map(const std::filesystem::path& path);

PreprocessConfig load_preprocess_config(const std::filesystem::path& stopwords, const std::filesystem::path& emoji_map,
                                        int max_tokens = 512);

/// How strip_noise treats a single code point.
enum class CharAction { Keep, Space, Drop, KeepIfAttached };

/// The rule table behind strip_noise: Bengali/Latin letters, digits and emoji
/// components are kept; whitespace and punctuation become a space; combining
/// marks survive only when attached to a kept base; everything else is dropped.
CharAction classify_char(char32_t cp);

bool is_emoji_start(char32_t cp);
bool is_emoji_token(std::string_view token);

// Individual steps, exposed for testing. Each is idempotent on its own output.
std::string fix_chars(std::string_view text);
std::string strip_noise(std::string_view text);
std::string replace_emojis(std::string_view text, const std::map<std::string, std::string, std::less<>>& emoji_map);
std::string remove_stopwords(std::string_view text, const std::set<std::string>& stopwords);

/// fix_chars -> strip_noise -> replace_emojis -> remove_stopwords, each gated by config.steps.
std::string normalize(std::string_view text, const PreprocessConfig& config);

}  // namespace ctlab
