#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "reslab/solver.hpp"

namespace reslab {

// Decimal representation with 17 significant digits (round-trip exact).
std::string format_double(double v);

// `re,im,multiplicity,residual` header plus one LF-terminated row per
// resonance, in the order given (find_resonances already sorts by Re, Im).
std::string resonances_csv(const std::vector<Resonance>& rs);

// The same rows as an ordered JSON array.
nlohmann::ordered_json resonances_json_rows(const std::vector<Resonance>& rs);

// Current UTC time, e.g. "2026-01-07T12:34:56Z".
std::string iso8601_utc_now();

// Standard report envelope: config, results, diagnostics, timestamp. Reruns
// with the same config are byte-identical except for the timestamp field.
nlohmann::ordered_json make_report(nlohmann::ordered_json config, nlohmann::ordered_json results,
                                   nlohmann::ordered_json diagnostics);

// Standalone SVG 1.1 scatter plot of resonances in the complex plane. The
// imaginary axis is flipped (deeper resonances plot lower), marker radius
// grows with multiplicity, the real axis is drawn, and when strip_bound is
// given a dashed line marks Im = -strip_bound.
std::string resonance_svg(const std::vector<Resonance>& rs, std::optional<double> strip_bound);

}  // namespace reslab
