#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace loom {

using TokenId = std::int32_t;

/// Reserved ids occupy the front of every vocabulary, followed by entity
/// tokens, followed by ordinary words.
namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBegin = 1;
inline constexpr TokenId kEnd = 2;
inline constexpr TokenId kStepSeparator = 3;
inline constexpr TokenId kUnconditional = 4;
inline constexpr TokenId kCount = 5;
}  // namespace special

/// Entity tokens are atomic vocabulary items written as ⟨name⟩.
class EntityVocabulary {
 public:
  explicit EntityVocabulary(std::vector<std::string> names);

  /// The canonical toy set: model, garment, upper, bag, object, subject.
  static const EntityVocabulary& builtin();

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  bool contains_name(std::string_view name) const;

  static std::string token_for(std::string_view name);  // "model" -> "⟨model⟩"
  static bool is_entity_token(std::string_view token);
  static std::string name_of(std::string_view token);   // "⟨model⟩" -> "model"

 private:
  std::vector<std::string> names_;
};

/// Closed word-level vocabulary. Line n of vocab.txt holds the token with id n
/// (0-based).
class Vocabulary {
 public:
  Vocabulary(const EntityVocabulary& entities, const std::vector<std::string>& words);

  /// Vocabulary built from the toyworld caption templates.
  static const Vocabulary& builtin();
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  TokenId id(std::string_view token) const;  // throws VocabularyError
  bool contains(std::string_view token) const;

  bool is_reserved(TokenId id) const { return id < first_word_id_; }
  bool is_entity(TokenId id) const { return id >= special::kCount && id < first_word_id_; }
  TokenId first_entity_id() const { return special::kCount; }
  TokenId first_word_id() const { return first_word_id_; }

  /// FNV-1a 64 over serialize(); identifies the vocabulary inside checkpoints.
  std::uint64_t hash() const;

  std::vector<TokenId> tokenize(std::string_view text) const;
  std::string detokenize(std::span<const TokenId> ids) const;

 private:
  Vocabulary() = default;
  void index();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> lookup_;
  TokenId first_word_id_ = special::kCount;
};

/// Words used by the toyworld templates, in vocabulary order.
const std::vector<std::string>& builtin_words();

}  // namespace loom
