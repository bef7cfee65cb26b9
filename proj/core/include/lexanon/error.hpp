#pragma once

#include <stdexcept>
#include <string>

namespace lexanon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value or unreadable config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Corpus file unreadable, malformed, or violating a Record invariant.
class CorpusError : public Error {
 public:
  using Error::Error;
};

/// Template manifest/body problems and render-time binding errors.
class TemplateError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Network failure, retry exhaustion, or an exhausted scripted backend.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool retryable = false)
      : Error(what), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// The provider declined to answer (content filter, policy refusal).
class RefusalError : public Error {
 public:
  explicit RefusalError(const std::string& provider_message)
      : Error("provider refusal: " + provider_message),
        provider_message_(provider_message) {}

  const std::string& provider_message() const noexcept { return provider_message_; }

 private:
  std::string provider_message_;
};

/// The provider answered with a payload we cannot interpret.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A model reply could not be parsed into the expected structure.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// An objective evaluation could not be completed.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lexanon
