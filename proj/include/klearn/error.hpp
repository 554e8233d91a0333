#pragma once

#include <stdexcept>
#include <string>

namespace klearn {

// Malformed or unreadable input data (files, schemas, vocabularies).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An algorithm was asked to run on inputs that violate its preconditions.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace klearn
