#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace vuldat {

// Error categories map onto the CLI exit-code contract:
// usage/config -> 1, data (parse, schema, corruption, consistency) -> 2,
// backend (transport, protocol) -> 3.
enum class ErrorKind {
  kConfig,
  kParse,
  kSchema,
  kCorruption,
  kConsistency,
  kEncoding,
  kDegenerate,
  kIo,
  kTransport,
  kProtocol,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

/// Malformed feed document. `offset` is the byte offset into the input where
/// the problem was detected.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(ErrorKind::kParse, what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, int found_version)
      : Error(ErrorKind::kSchema, what), found_version_(found_version) {}

  int found_version() const noexcept { return found_version_; }

 private:
  int found_version_;
};

class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& what) : Error(ErrorKind::kCorruption, what) {}
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what) : Error(ErrorKind::kConsistency, what) {}
};

class EncodingError : public Error {
 public:
  EncodingError(const std::string& what, std::size_t offset)
      : Error(ErrorKind::kEncoding, what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& what) : Error(ErrorKind::kDegenerate, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

/// Backend unreachable. Carries enough metadata for the caller to decide
/// whether to retry.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, std::string endpoint, int attempts, bool retryable)
      : Error(ErrorKind::kTransport, what),
        endpoint_(std::move(endpoint)),
        attempts_(attempts),
        retryable_(retryable) {}

  const std::string& endpoint() const noexcept { return endpoint_; }
  int attempts() const noexcept { return attempts_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  std::string endpoint_;
  int attempts_;
  bool retryable_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(ErrorKind::kProtocol, what) {}
};

}  // namespace vuldat
