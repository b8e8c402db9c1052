#pragma once

#include <stdexcept>
#include <string>

namespace skbf {

/// Base of every error raised by the library. `module()` names the
/// component that failed so drivers can report it.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(message), module_(std::move(module)) {}

  [[nodiscard]] const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// skb_store

class LoadError : public Error {
 public:
  explicit LoadError(const std::string& message) : Error("skb_store", message) {}
};

class UnknownNodeError : public Error {
 public:
  explicit UnknownNodeError(const std::string& id)
      : Error("skb_store", "unknown node id '" + id + "'"), id_(id) {}
  [[nodiscard]] const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

// triplet_model

class ExtractionFormatError : public Error {
 public:
  explicit ExtractionFormatError(const std::string& message) : Error("triplet_model", message) {}
};

// llm_gateway

class GatewayError : public Error {
 public:
  explicit GatewayError(const std::string& message) : Error("llm_gateway", message) {}
};

/// Raised by providers for a single failed attempt; the gateway retries these.
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class ReplayMissError : public GatewayError {
 public:
  explicit ReplayMissError(const std::string& digest)
      : GatewayError("no recorded response for request digest " + digest), digest_(digest) {}
  [[nodiscard]] const std::string& digest() const noexcept { return digest_; }

 private:
  std::string digest_;
};

// candidate_filter

class EmptyPreparationError : public Error {
 public:
  explicit EmptyPreparationError(const std::string& message) : Error("candidate_filter", message) {}
};

class UnconstrainedTargetError : public Error {
 public:
  explicit UnconstrainedTargetError(const std::string& message)
      : Error("candidate_filter", message) {}
};

/// Propagation exceeded its sweep cap. Indicates a bug, never user input.
class PropagationLimitError : public Error {
 public:
  explicit PropagationLimitError(const std::string& message) : Error("candidate_filter", message) {}
};

// vector_search

class EmbedError : public Error {
 public:
  explicit EmbedError(const std::string& message) : Error("vector_search", message) {}
};

class SimilarityUndefinedError : public Error {
 public:
  explicit SimilarityUndefinedError(const std::string& message) : Error("vector_search", message) {}
};

class IndexMissError : public Error {
 public:
  explicit IndexMissError(const std::string& id)
      : Error("vector_search", "embedding index has no vector for node '" + id + "'"), id_(id) {}
  [[nodiscard]] const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

// reranker

class RerankUnavailableError : public Error {
 public:
  explicit RerankUnavailableError(const std::string& message) : Error("reranker", message) {}
};

// eval_harness

class DatasetError : public Error {
 public:
  explicit DatasetError(const std::string& message) : Error("eval_harness", message) {}
};

// configuration / io

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace skbf
