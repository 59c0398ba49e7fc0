#include "lossnet/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

namespace lossnet {

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string state_label(const StateSpace& ss, std::size_t i, std::string_view prefix) {
  std::string s(prefix);
  for (int k = 0; k < ss.K; ++k) s += "_" + std::to_string(ss.theta(i, k));
  return s;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const Provenance& prov,
                     const std::vector<std::string>& columns)
    : path_(path), out_(path, std::ios::binary), width_(columns.size()) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  out_ << "# lossnet " << kVersion << " command=" << prov.command << " config_hash=" << prov.config_hash << "\r\n";
  row(columns);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) throw Error("CSV row width mismatch in " + path_.string());
  for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << csv_field(fields[i]);
  out_ << "\r\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> f;
  f.reserve(values.size());
  for (double v : values) f.push_back(format_number(v));
  row(f);
}

void CsvWriter::close() {
  out_.flush();
  if (!out_) throw Error("write failed for " + path_.string());
  out_.close();
}

OutputTransaction::OutputTransaction(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

OutputTransaction::~OutputTransaction() {
  if (committed_) return;
  for (const auto& f : files_) {
    std::error_code ec;
    std::filesystem::remove(f, ec);
  }
}

std::filesystem::path OutputTransaction::file(const std::string& name) {
  files_.push_back(dir_ / name);
  return files_.back();
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

void write_svg(const std::filesystem::path& path, const Provenance& prov, const SvgPlot& plot) {
  if (plot.x.size() != plot.y.size() || plot.x.empty()) throw Error("SVG plot needs matching non-empty series");
  const double W = 800, H = 500, left = 90, right = 20, top = 40, bottom = 60;
  auto fx = [&](double x) { return plot.log_x ? std::log10(x) : x; };
  auto fy = [&](double y) {
    if (!plot.symlog_y) return y;
    return std::copysign(std::log10(1.0 + std::abs(y) / plot.symlog_threshold), y);
  };
  auto inv_fy = [&](double v) {
    if (!plot.symlog_y) return v;
    return std::copysign(plot.symlog_threshold * (std::pow(10.0, std::abs(v)) - 1.0), v);
  };
  double x0 = fx(plot.x.front()), x1 = x0, y0 = fy(plot.y.front()), y1 = y0;
  for (std::size_t i = 0; i < plot.x.size(); ++i) {
    x0 = std::min(x0, fx(plot.x[i]));
    x1 = std::max(x1, fx(plot.x[i]));
    y0 = std::min(y0, fy(plot.y[i]));
    y1 = std::max(y1, fy(plot.y[i]));
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (fx(x) - x0) / (x1 - x0) * (W - left - right); };
  auto py_t = [&](double v) { return top + (y1 - v) / (y1 - y0) * (H - top - bottom); };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<!-- lossnet " << kVersion << " command=" << prov.command << " config_hash=" << prov.config_hash << " -->\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" style=\"fill:#ffffff\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" style=\"font:16px sans-serif;text-anchor:middle\">"
      << xml_escape(plot.title) << "</text>\n";
  // axes frame
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << W - left - right << "\" height=\""
      << H - top - bottom << "\" style=\"fill:none;stroke:#333333;stroke-width:1\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double fxv = x0 + (x1 - x0) * t / 5.0;
    const double xv = plot.log_x ? std::pow(10.0, fxv) : fxv;
    const double X = left + (W - left - right) * t / 5.0;
    out << "<text x=\"" << num(X) << "\" y=\"" << H - bottom + 18
        << "\" style=\"font:11px sans-serif;text-anchor:middle\">" << tick_label(xv) << "</text>\n";
    const double fyv = y0 + (y1 - y0) * t / 5.0;
    const double Y = py_t(fyv);
    out << "<text x=\"" << left - 6 << "\" y=\"" << num(Y + 4) << "\" style=\"font:11px sans-serif;text-anchor:end\">"
        << tick_label(inv_fy(fyv)) << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << num(Y) << "\" x2=\"" << W - right << "\" y2=\"" << num(Y)
        << "\" style=\"stroke:#dddddd;stroke-width:0.5\"/>\n";
  }
  if (y0 < 0.0 && y1 > 0.0)
    out << "<line x1=\"" << left << "\" y1=\"" << num(py_t(0.0)) << "\" x2=\"" << W - right << "\" y2=\""
        << num(py_t(0.0)) << "\" style=\"stroke:#888888;stroke-width:1;stroke-dasharray:4,3\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" style=\"font:13px sans-serif;text-anchor:middle\">"
      << xml_escape(plot.x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << H / 2 << "\" transform=\"rotate(-90 18 " << H / 2
      << ")\" style=\"font:13px sans-serif;text-anchor:middle\">" << xml_escape(plot.y_label)
      << (plot.symlog_y ? " (symlog)" : "") << "</text>\n";
  out << "<polyline style=\"fill:none;stroke:#1f77b4;stroke-width:1.5\" points=\"";
  for (std::size_t i = 0; i < plot.x.size(); ++i)
    out << (i ? " " : "") << num(px(plot.x[i])) << "," << num(py_t(fy(plot.y[i])));
  out << "\"/>\n";
  for (const auto& m : plot.markers) {
    const double X = px(m.x), Y = py_t(fy(m.y));
    out << "<circle cx=\"" << num(X) << "\" cy=\"" << num(Y) << "\" r=\"4\" style=\"fill:#d62728\"/>\n";
    out << "<text x=\"" << num(X + 6) << "\" y=\"" << num(Y - 6) << "\" style=\"font:11px sans-serif\">"
        << xml_escape(m.label) << "</text>\n";
  }
  out << "</svg>\n";
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace lossnet
