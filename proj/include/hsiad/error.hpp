#ifndef HSIAD_ERROR_HPP
#define HSIAD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hsiad {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument (shape, range, config value) was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Cube or score payload contains a non-finite value.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// File header could not be parsed or declares an unsupported layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File payload length disagrees with its header.
class SizeMismatchError : public Error {
 public:
  using Error::Error;
};

/// Region growth could not reach the requested area.
class GrowthFailure : public Error {
 public:
  using Error::Error;
};

/// Covariance stayed singular after ridge regularization.
class SingularCovariance : public Error {
 public:
  SingularCovariance(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition_estimate() const noexcept { return condition_; }

 private:
  double condition_;
};

}  // namespace hsiad

#endif  // HSIAD_ERROR_HPP
