#ifndef RPDLAB_ERRORS_H_
#define RPDLAB_ERRORS_H_

#include <stdexcept>
#include <string>

namespace rpdlab {

// Bad input values, malformed configs or data files. Maps to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable or unwritable files. Maps to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rpdlab

#endif  // RPDLAB_ERRORS_H_
