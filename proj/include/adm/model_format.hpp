#pragma once

// .admf: compact little-endian detector serialization for edge firmware.
//
//   "ADMF" | version u16 | precision u8 | input_dim u16 | layer_count u16
//   | layer sizes u16 x layer_count (input, hidden..., output) | threshold f64
//   | normalizer means, stds | per layer: weights row-major, biases | CRC32 (IEEE)
//
// Normalizer and layer parameters use the precision flag (0 = f32, 1 = f64).

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "adm/detector.hpp"

namespace adm {

enum class Precision : std::uint8_t { f32 = 0, f64 = 1 };

inline constexpr std::uint16_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[4] = {'A', 'D', 'M', 'F'};

inline std::size_t scalar_width(Precision p) { return p == Precision::f32 ? 4 : 8; }

inline Precision parse_precision(std::string_view s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + std::string(s) + "' (expected f32|f64)");
}

inline std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "byte codecs assume a little-endian host");

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buf_.insert(buf_.end(), raw, raw + sizeof(T));
  }
  void put_bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void put_scalar(double v, Precision p) {
    if (p == Precision::f32)
      put(static_cast<float>(v));
    else
      put(v);
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked reader; `on_short` builds the exception thrown when bytes run out.
template <typename OnShort>
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, OnShort on_short)
      : bytes_(bytes), on_short_(on_short) {}

  template <typename T>
  T get() {
    if (remaining() < sizeof(T)) on_short_();
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  double get_scalar(Precision p) {
    return p == Precision::f32 ? static_cast<double>(get<float>()) : get<double>();
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  OnShort on_short_;
  std::size_t pos_ = 0;
};

inline std::size_t header_size(std::size_t layer_count) {
  return 4 + 2 + 1 + 2 + 2 + 2 * layer_count + 8;
}

}  // namespace detail

inline std::size_t footprint(const ArchitectureSpec& spec, Precision p) {
  const auto sizes = spec.layer_sizes();
  const std::size_t w = scalar_width(p);
  return detail::header_size(sizes.size()) + 2 * spec.input_dim * w + spec.parameter_count() * w + 4;
}

// Exact blob length without materializing it.
inline std::size_t footprint(const DetectorModel& det, Precision p) {
  return footprint(det.model.spec(), p);
}

inline std::vector<std::uint8_t> export_blob(const DetectorModel& det, Precision p) {
  const auto& model = det.model;
  const auto sizes = model.spec().layer_sizes();
  detail::ByteWriter w;
  w.put_bytes({reinterpret_cast<const std::uint8_t*>(kModelMagic), 4});
  w.put<std::uint16_t>(kModelFormatVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(model.input_dim()));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(sizes.size()));
  for (auto s : sizes) w.put<std::uint16_t>(static_cast<std::uint16_t>(s));
  w.put<double>(det.threshold);
  for (double m : model.normalizer().means) w.put_scalar(m, p);
  for (double s : model.normalizer().stds) w.put_scalar(s, p);
  // Flat parameter order is already weights row-major then biases, layer by layer.
  for (double v : model.parameters()) w.put_scalar(v, p);
  w.put<std::uint32_t>(crc32_ieee(w.bytes()));
  return std::move(w.bytes());
}

inline DetectorModel import_blob(std::span<const std::uint8_t> blob) {
  auto truncated = [] { throw FormatError(FormatErrc::truncated, "blob ended early"); };
  detail::ByteReader r(blob, truncated);

  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.get<std::uint8_t>());
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw FormatError(FormatErrc::bad_magic, "expected ADMF");
  const auto version = r.get<std::uint16_t>();
  if (version != kModelFormatVersion)
    throw FormatError(FormatErrc::unsupported_version, "version " + std::to_string(version));
  const auto precision_flag = r.get<std::uint8_t>();
  if (precision_flag > 1)
    throw FormatError(FormatErrc::invalid_layout, "precision flag " + std::to_string(precision_flag));
  const auto p = static_cast<Precision>(precision_flag);
  const std::size_t input_dim = r.get<std::uint16_t>();
  const std::size_t layer_count = r.get<std::uint16_t>();
  if (layer_count < 3) throw FormatError(FormatErrc::invalid_layout, "fewer than 3 layers");
  std::vector<std::size_t> sizes(layer_count);
  for (auto& s : sizes) s = r.get<std::uint16_t>();
  if (sizes.front() != input_dim || sizes.back() != input_dim)
    throw FormatError(FormatErrc::invalid_layout, "outer layer sizes differ from input_dim");

  ArchitectureSpec spec{input_dim, std::vector<std::size_t>(sizes.begin() + 1, sizes.end() - 1)};
  try {
    spec.validate();
  } catch (const InvalidDimension& e) {
    throw FormatError(FormatErrc::invalid_layout, e.what());
  }
  const std::size_t expected = footprint(spec, p);
  if (blob.size() < expected) truncated();
  if (blob.size() > expected)
    throw FormatError(FormatErrc::invalid_layout, "trailing bytes after CRC");

  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, blob.data() + expected - 4, 4);
  if (stored_crc != crc32_ieee(blob.first(expected - 4)))
    throw FormatError(FormatErrc::crc_mismatch, "stored checksum does not match contents");

  const double threshold = r.get<double>();
  Normalizer norm{std::vector<double>(input_dim), std::vector<double>(input_dim)};
  for (auto& m : norm.means) m = r.get_scalar(p);
  for (auto& s : norm.stds) s = r.get_scalar(p);
  std::vector<double> params(spec.parameter_count());
  for (auto& v : params) v = r.get_scalar(p);
  for (double s : norm.stds)
    if (!(s > 0.0) || !std::isfinite(s)) throw FormatError(FormatErrc::invalid_layout, "non-positive std");
  if (!std::isfinite(threshold) || threshold < 0.0)
    throw FormatError(FormatErrc::invalid_layout, "invalid threshold");
  return {AutoencoderModel(std::move(spec), std::move(norm), std::move(params)), threshold};
}

inline void save_model(const std::string& path, const DetectorModel& det, Precision p) {
  const auto blob = export_blob(det, p);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!os) throw Error("failed writing '" + path + "'");
}

inline DetectorModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open model file '" + path + "'");
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return import_blob(blob);
  } catch (const FormatError& e) {
    throw FormatError(e.code(), e.detail() + " in '" + path + "'");
  }
}

}  // namespace adm
