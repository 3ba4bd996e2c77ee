#ifndef NERGUIDE_COMMON_HPP_
#define NERGUIDE_COMMON_HPP_

#include <stdexcept>
#include <string>

namespace nerguide {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration: unknown keys, out-of-range values,
// missing paths. CLI maps this to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent data: corpora, manifests, checkpoints,
// misaligned datasets. CLI maps this to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// Training-time failure, e.g. a non-finite loss. CLI maps this to exit
// code 3.
class TrainError : public Error {
 public:
  using Error::Error;
};

}  // namespace nerguide

#endif  // NERGUIDE_COMMON_HPP_
