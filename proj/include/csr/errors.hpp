// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace csr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state chunk with no tokens was offered for appending.
class EmptyChunkError : public Error {
 public:
  using Error::Error;
};

/// A chunk id did not strictly increase along the chunk log.
class ChunkOrderError : public Error {
 public:
  using Error::Error;
};

/// An argument fell outside the domain of an analytic formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A versioned query or reconciliation request broke the routing protocol.
class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

/// Malformed input documents (scenario files, fixtures, serialized contexts).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Raised by an inference backend. Subclasses separate transport failures
/// from upstream protocol failures.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// The request never produced a usable HTTP response (connect, read, timeout).
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The upstream answered, but not with a successful streaming completion.
class UpstreamProtocolError : public BackendError {
 public:
  UpstreamProtocolError(int status, const std::string& what)
      : BackendError(what), status_(status) {}

  /// HTTP status, or 0 when the failure was in the stream body itself.
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace csr
