#pragma once

#include <stdexcept>
#include <string>

namespace loom {

// Every failure surfaced by the library derives from loom::Error so callers
// (the CLI in particular) can catch one type and print a one-line diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VocabularyError : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class StructureError : public Error { public: using Error::Error; };
class BindingError : public Error { public: using Error::Error; };
class RangeError : public Error { public: using Error::Error; };
class LayoutError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class CheckpointError : public Error { public: using Error::Error; };

/// Raised when a decoded plan cannot be parsed; carries the raw decoded text.
class PlanFormatError : public Error {
 public:
  PlanFormatError(const std::string& what, std::string raw_text)
      : Error(what), raw_text_(std::move(raw_text)) {}
  const std::string& raw_text() const { return raw_text_; }

 private:
  std::string raw_text_;
};

/// Raised by the training loop when a loss goes NaN/inf.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long batch_id)
      : Error(what), batch_id_(batch_id) {}
  long batch_id() const { return batch_id_; }

 private:
  long batch_id_;
};

}  // namespace loom
