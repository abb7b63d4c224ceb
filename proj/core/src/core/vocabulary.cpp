#include "loom/core/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "loom/core/error.hpp"

namespace loom {

namespace {

constexpr std::string_view kEntityOpen = "\xE2\x9F\xA8";   // ⟨
constexpr std::string_view kEntityClose = "\xE2\x9F\xA9";  // ⟩

const char* const kSpecialNames[special::kCount] = {"<pad>", "<bos>", "<eos>", "<sep>",
                                                   "<uncond>"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Punctuation that always forms a token of its own.
bool is_punct(char c) { return c == ':' || c == '[' || c == ']'; }

}  // namespace

EntityVocabulary::EntityVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  for (const auto& n : names_) {
    if (n.empty()) throw VocabularyError("entity name must not be empty");
  }
}

const EntityVocabulary& EntityVocabulary::builtin() {
  static const EntityVocabulary vocab({"model", "garment", "upper", "bag", "object", "subject"});
  return vocab;
}

bool EntityVocabulary::contains_name(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::string EntityVocabulary::token_for(std::string_view name) {
  std::string out;
  out.reserve(name.size() + kEntityOpen.size() + kEntityClose.size());
  out.append(kEntityOpen).append(name).append(kEntityClose);
  return out;
}

bool EntityVocabulary::is_entity_token(std::string_view token) {
  return token.size() > kEntityOpen.size() + kEntityClose.size() && token.starts_with(kEntityOpen) &&
         token.ends_with(kEntityClose);
}

std::string EntityVocabulary::name_of(std::string_view token) {
  if (!is_entity_token(token)) throw VocabularyError("not an entity token: " + std::string(token));
  return std::string(
      token.substr(kEntityOpen.size(), token.size() - kEntityOpen.size() - kEntityClose.size()));
}

const std::vector<std::string>& builtin_words() {
  static const std::vector<std::string> words = {
      // plan grammar
      "Step", ":", "[", "]", "1", "2", "3", "4", "5", "6", "7", "8", "9",
      // scaffold
      "make", "plan", "then", "each", "step",
      // tutorial prompts and steps
      "draw", "a", "the", "in", "steps", "three", "four", "five", "six", "red", "green", "blue",
      "yellow", "purple", "orange", "circle", "square", "star", "house", "cup", "sketch", "full",
      "outline", "continue", "finish", "fill", "with", "add", "final", "details",
      // composition
      "place", "and", "on", "one", "canvas", "split", "scene", "into",
      // style transfer
      "redraw", "style", "original", "grayscale", "inverted", "warm", "cool", "dotted",
      // entity descriptions
      "wearing", "casual", "pose", "floral", "dress"};
  return words;
}

Vocabulary::Vocabulary(const EntityVocabulary& entities, const std::vector<std::string>& words) {
  for (const char* name : kSpecialNames) tokens_.emplace_back(name);
  for (const auto& name : entities.names()) tokens_.push_back(EntityVocabulary::token_for(name));
  first_word_id_ = static_cast<TokenId>(tokens_.size());
  for (const auto& w : words) {
    if (w.empty() || w.find_first_of(" \t\r\n") != std::string::npos) {
      throw VocabularyError("invalid vocabulary word: '" + w + "'");
    }
    if (EntityVocabulary::is_entity_token(w) || (w.front() == '<' && w.back() == '>')) {
      throw VocabularyError("word collides with reserved token syntax: " + w);
    }
    tokens_.push_back(w);
  }
  index();
}

void Vocabulary::index() {
  lookup_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = lookup_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw VocabularyError("duplicate vocabulary token: " + tokens_[i]);
  }
}

const Vocabulary& Vocabulary::builtin() {
  static const Vocabulary vocab(EntityVocabulary::builtin(), builtin_words());
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary file: " + path.string());
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.tokens_.push_back(line);
  }
  if (v.tokens_.size() < special::kCount) throw VocabularyError("vocabulary file too short");
  for (TokenId i = 0; i < special::kCount; ++i) {
    if (v.tokens_[i] != kSpecialNames[i]) {
      throw VocabularyError("reserved token mismatch at id " + std::to_string(i));
    }
  }
  TokenId id = special::kCount;
  while (id < static_cast<TokenId>(v.tokens_.size()) &&
         EntityVocabulary::is_entity_token(v.tokens_[id])) {
    ++id;
  }
  v.first_word_id_ = id;
  for (std::size_t i = id; i < v.tokens_.size(); ++i) {
    if (EntityVocabulary::is_entity_token(v.tokens_[i])) {
      throw VocabularyError("entity token after first word id: " + v.tokens_[i]);
    }
  }
  v.index();
  return v;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) out.append(t).push_back('\n');
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary file: " + path.string());
  out << serialize();
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw VocabularyError("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = lookup_.find(std::string(token));
  if (it == lookup_.end()) throw VocabularyError("out-of-vocabulary word: '" + std::string(token) + "'");
  return it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return lookup_.contains(std::string(token));
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
    } else if (c == '\n') {
      ids.push_back(special::kStepSeparator);
      ++i;
    } else if (is_punct(c)) {
      ids.push_back(id(text.substr(i, 1)));
      ++i;
    } else if (text.substr(i).starts_with(kEntityOpen)) {
      const auto close = text.find(kEntityClose, i);
      if (close == std::string_view::npos) {
        throw VocabularyError("unterminated entity token at offset " + std::to_string(i));
      }
      const auto len = close + kEntityClose.size() - i;
      ids.push_back(id(text.substr(i, len)));
      i += len;
    } else {
      std::size_t j = i;
      while (j < text.size() && !is_space(text[j]) && text[j] != '\n' && !is_punct(text[j]) &&
             !text.substr(j).starts_with(kEntityOpen)) {
        ++j;
      }
      ids.push_back(id(text.substr(i, j - i)));
      i = j;
    }
  }
  return ids;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  std::string_view prev;
  for (TokenId tid : ids) {
    if (tid == special::kStepSeparator) {
      out.push_back('\n');
      prev = "\n";
      continue;
    }
    const std::string& tok = token(tid);
    const bool glue_left = tok == ":" || tok == "]";
    const bool after_break = out.empty() || prev == "\n" || prev == "[";
    if (!glue_left && !after_break) out.push_back(' ');
    out += tok;
    prev = tok;
  }
  return out;
}

}  // namespace loom
