#include "reslab/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

namespace reslab {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string resonances_csv(const std::vector<Resonance>& rs) {
  std::string out = "re,im,multiplicity,residual\n";
  for (const auto& r : rs) {
    out += format_double(r.z.real());
    out += ',';
    out += format_double(r.z.imag());
    out += ',';
    out += std::to_string(r.multiplicity);
    out += ',';
    out += format_double(r.residual);
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json resonances_json_rows(const std::vector<Resonance>& rs) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : rs) {
    rows.push_back({{"re", r.z.real()},
                    {"im", r.z.imag()},
                    {"multiplicity", r.multiplicity},
                    {"residual", r.residual},
                    {"refined", r.refined}});
  }
  return rows;
}

std::string iso8601_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::ordered_json make_report(nlohmann::ordered_json config, nlohmann::ordered_json results,
                                   nlohmann::ordered_json diagnostics) {
  nlohmann::ordered_json report;
  report["config"] = std::move(config);
  report["results"] = std::move(results);
  report["diagnostics"] = std::move(diagnostics);
  report["timestamp"] = iso8601_utc_now();
  return report;
}

namespace {

// Short coordinate repr for SVG attributes; full precision is not needed for
// drawing and would bloat the file.
std::string coord(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string resonance_svg(const std::vector<Resonance>& rs, std::optional<double> strip_bound) {
  // Data bounds in plot coordinates (x = Re z, y = -Im z so deeper is lower).
  double x_lo = 0.0;
  double x_hi = 1.0;
  double y_lo = 0.0;
  double y_hi = 1.0;
  bool first = true;
  auto absorb = [&](double x, double y) {
    if (first) {
      x_lo = x_hi = x;
      y_lo = y_hi = y;
      first = false;
    } else {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  };
  for (const auto& r : rs) absorb(r.z.real(), -r.z.imag());
  if (!first) absorb(0.5 * (x_lo + x_hi), 0.0);  // keep the real axis in view
  if (strip_bound && !first) absorb(0.5 * (x_lo + x_hi), *strip_bound);

  double span_x = x_hi - x_lo;
  double span_y = y_hi - y_lo;
  // Keep both spans workable: a purely real spectrum would otherwise collapse
  // the vertical extent to rounding noise and hide every marker.
  const double floor_span = std::max(1.0e-3, 0.2 * std::max(span_x, span_y));
  if (span_x < floor_span) {
    const double c = 0.5 * (x_lo + x_hi);
    x_lo = c - 0.5 * floor_span;
    x_hi = c + 0.5 * floor_span;
    span_x = floor_span;
  }
  if (span_y < floor_span) {
    const double c = 0.5 * (y_lo + y_hi);
    y_lo = c - 0.5 * floor_span;
    y_hi = c + 0.5 * floor_span;
    span_y = floor_span;
  }
  const double mx = 0.05 * span_x;
  const double my = 0.05 * span_y;
  const double vb_x = x_lo - mx;
  const double vb_y = y_lo - my;
  const double vb_w = span_x + 2.0 * mx;
  const double vb_h = span_y + 2.0 * my;
  const double r0 = 0.012 * std::max(vb_w, vb_h);
  const double stroke = 0.15 * r0;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"" << coord(vb_x)
      << ' ' << coord(vb_y) << ' ' << coord(vb_w) << ' ' << coord(vb_h) << "\">\n";
  svg << "  <desc>Resonances in the complex plane; vertical axis is -Im z.</desc>\n";
  // Real axis.
  svg << "  <line x1=\"" << coord(vb_x) << "\" y1=\"0\" x2=\"" << coord(vb_x + vb_w)
      << "\" y2=\"0\" stroke=\"#888888\" stroke-width=\"" << coord(stroke) << "\"/>\n";
  if (strip_bound) {
    svg << "  <line x1=\"" << coord(vb_x) << "\" y1=\"" << coord(*strip_bound) << "\" x2=\""
        << coord(vb_x + vb_w) << "\" y2=\"" << coord(*strip_bound)
        << "\" stroke=\"#c03030\" stroke-width=\"" << coord(stroke)
        << "\" stroke-dasharray=\"" << coord(4.0 * stroke) << ',' << coord(4.0 * stroke)
        << "\"/>\n";
  }
  for (const auto& r : rs) {
    svg << "  <circle cx=\"" << coord(r.z.real()) << "\" cy=\"" << coord(-r.z.imag()) << "\" r=\""
        << coord(r0 * static_cast<double>(r.multiplicity))
        << "\" fill=\"#2060c0\" fill-opacity=\"0.7\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace reslab
