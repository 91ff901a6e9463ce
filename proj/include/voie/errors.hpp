#pragma once

#include <stdexcept>
#include <string>

namespace voie {

/// Base class for all library errors.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// A table lacks an outcome column required by the requested computation.
class missing_column_error : public error {
 public:
  explicit missing_column_error(const std::string& what) : error(what) {}
};

/// An assignment references a treatment path the table cannot realize.
class missing_path_error : public error {
 public:
  explicit missing_path_error(const std::string& what) : error(what) {}
};

/// Design parameters violate the design invariants.
class invalid_design_error : public error {
 public:
  explicit invalid_design_error(const std::string& what) : error(what) {}
};

/// A bucket is too small for the requested estimate.
class insufficient_bucket_error : public error {
 public:
  explicit insufficient_bucket_error(const std::string& what) : error(what) {}
};

/// Variant shares do not sum to the first-iteration ramp fraction.
class share_sum_error : public error {
 public:
  explicit share_sum_error(const std::string& what) : error(what) {}
};

/// Full enumeration would exceed the configured assignment cap.
class cap_exceeded_error : public error {
 public:
  explicit cap_exceeded_error(const std::string& what) : error(what) {}
};

/// Malformed input file.
class parse_error : public error {
 public:
  explicit parse_error(const std::string& what) : error(what) {}
};

}  // namespace voie
