#pragma once

// CSV and SVG emission. Every file starts with a comment naming the artifact
// version and the hash of the configuration that produced it.

#include "lossnet/model.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace lossnet {

inline constexpr const char* kVersion = "0.1.0";

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// 17 significant digits; "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double x);

/// RFC 4180 quoting when the field contains a comma, quote or line break.
std::string csv_field(std::string_view s);

/// Column label of a state, e.g. "y_3_0".
std::string state_label(const StateSpace& ss, std::size_t i, std::string_view prefix = "y");

struct Provenance {
  std::string config_hash;
  std::string command;
};

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const Provenance& prov, const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& fields);
  void row(const std::vector<double>& values);
  /// Flushes and closes; throws Error if the stream went bad.
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t width_;
};

/// Collects output files; unless commit() is called they are deleted when
/// the transaction goes out of scope.
class OutputTransaction {
 public:
  explicit OutputTransaction(std::filesystem::path dir);
  ~OutputTransaction();
  OutputTransaction(const OutputTransaction&) = delete;
  OutputTransaction& operator=(const OutputTransaction&) = delete;

  std::filesystem::path file(const std::string& name);
  void commit() { committed_ = true; }
  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
  bool committed_ = false;
};

struct SvgMarker {
  double x;
  double y;
  std::string label;
};

struct SvgPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  /// sign(y) * log10(1 + |y| / threshold); keeps sign changes visible over many decades.
  bool symlog_y = false;
  double symlog_threshold = 1.0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<SvgMarker> markers;
};

void write_svg(const std::filesystem::path& path, const Provenance& prov, const SvgPlot& plot);

}  // namespace lossnet
