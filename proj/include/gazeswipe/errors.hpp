#pragma once

#include <stdexcept>
#include <string>

namespace gazeswipe {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite coordinates, unnormalized poses, malformed samples.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Event arrived in a phase that does not accept it, or out of timestamp order.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Unknown profile/strategy names, bad config documents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gazeswipe
