#pragma once

#include <stdexcept>
#include <string>

namespace adm {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(int epoch)
      : Error("training diverged: non-finite loss at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

enum class FormatErrc { bad_magic, unsupported_version, truncated, crc_mismatch, invalid_layout };

inline const char* to_string(FormatErrc c) {
  switch (c) {
    case FormatErrc::bad_magic: return "bad magic";
    case FormatErrc::unsupported_version: return "unsupported version";
    case FormatErrc::truncated: return "truncated blob";
    case FormatErrc::crc_mismatch: return "CRC mismatch";
    case FormatErrc::invalid_layout: return "invalid layout";
  }
  return "unknown";
}

// Raised when an .admf blob cannot be loaded.
class FormatError : public Error {
 public:
  FormatError(FormatErrc code, const std::string& detail)
      : Error(std::string("model format: ") + to_string(code) + ": " + detail), code_(code), detail_(detail) {}
  FormatErrc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  FormatErrc code_;
  std::string detail_;
};

enum class WireErrc { bad_magic, short_read, length_mismatch, confidence_range, size, invalid_field };

inline const char* to_string(WireErrc c) {
  switch (c) {
    case WireErrc::bad_magic: return "bad magic";
    case WireErrc::short_read: return "short read";
    case WireErrc::length_mismatch: return "length mismatch";
    case WireErrc::confidence_range: return "confidence out of range";
    case WireErrc::size: return "too many features";
    case WireErrc::invalid_field: return "invalid field";
  }
  return "unknown";
}

class WireError : public Error {
 public:
  WireError(WireErrc code, const std::string& detail)
      : Error(std::string("wire: ") + to_string(code) + ": " + detail), code_(code) {}
  WireErrc code() const noexcept { return code_; }

 private:
  WireErrc code_;
};

}  // namespace adm
