#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "reslab/cli.hpp"
#include "reslab/common.hpp"
#include "reslab/ensembles.hpp"
#include "reslab/graph.hpp"
#include "reslab/report.hpp"

using namespace reslab;
using nlohmann::ordered_json;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(RESLAB_BIN) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), got);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Fixture graph files shared by the integration cases.
struct Files {
  std::filesystem::path dir;
  std::string interval, triangle, balanced, malformed;

  Files() {
    dir = std::filesystem::temp_directory_path() / "reslab_cli_fixtures";
    std::filesystem::create_directories(dir);
    auto dump = [&](const char* name, const std::string& text) {
      const auto p = dir / name;
      std::ofstream(p, std::ios::binary) << text;
      return p.string();
    };
    interval = dump("interval.json", serialize_graph(fixture("interval(1)")));
    triangle = dump("triangle.json", serialize_graph(fixture("triangle_lead")));
    balanced = dump("balanced.json", serialize_graph(fixture("balanced_path(2, 1)")));
    malformed = dump("malformed.json", "{\"vertices\": 2, \"edges\": [");
  }
};

const Files& files() {
  static Files f;
  return f;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("double formatting round-trips exactly") {
  const double values[] = {0.0,   kPi,     -2.0 * kPi, 0.1,      1.0e-300,
                           -2.5e17, 1.0 / 3.0, -1e-9,      6.25e-2, 123456789.123456789};
  for (double v : values) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("csv writer emits the documented table") {
  std::vector<Resonance> rs;
  rs.push_back({Complex(0.5, -0.25), 1, 1e-12, true});
  rs.push_back({Complex(2.0, 0.0), 2, 5e-11, true});
  const std::string csv = resonances_csv(rs);
  CHECK(csv ==
        "re,im,multiplicity,residual\n"
        "0.5,-0.25,1,9.9999999999999998e-13\n"
        "2,0,2,5.0000000000000002e-11\n");
  // LF only, never CRLF.
  CHECK(csv.find('\r') == std::string::npos);
}

TEST_CASE("report envelope and timestamp format") {
  const ordered_json rep = make_report({{"command", "x"}}, {{"value", 1}}, {{"n", 2}});
  auto it = rep.begin();
  CHECK(it.key() == "config");
  ++it;
  CHECK(it.key() == "results");
  ++it;
  CHECK(it.key() == "diagnostics");
  ++it;
  CHECK(it.key() == "timestamp");
  const std::string ts = rep["timestamp"].get<std::string>();
  CHECK(std::regex_match(ts, std::regex(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z)")));
}

TEST_CASE("svg scatter structure") {
  std::vector<Resonance> rs;
  rs.push_back({Complex(1.0, -0.5), 1, 1e-12, true});
  rs.push_back({Complex(4.0, -1.5), 2, 1e-12, true});

  SUBCASE("markers, flipped axis, multiplicity radius") {
    const std::string svg = resonance_svg(rs, std::nullopt);
    CHECK(svg.rfind("<?xml version=\"1.0\"", 0) == 0);
    CHECK(svg.find("version=\"1.1\"") != std::string::npos);
    CHECK(svg.find("viewBox=\"") != std::string::npos);
    CHECK(count_occurrences(svg, "<circle") == 2);
    // Depth -0.5 plots at vertical coordinate +0.5 (flipped axis).
    CHECK(svg.find("cy=\"0.5\"") != std::string::npos);
    CHECK(svg.find("cy=\"1.5\"") != std::string::npos);
    // Radius proportional to multiplicity: extract both r attributes.
    std::regex re_r("r=\"([0-9.eE+-]+)\"");
    std::vector<double> radii;
    for (std::sregex_iterator m(svg.begin(), svg.end(), re_r), end; m != end; ++m) {
      radii.push_back(std::stod((*m)[1]));
    }
    REQUIRE(radii.size() == 2);
    CHECK(radii[1] == doctest::Approx(2.0 * radii[0]).epsilon(1e-6));
    // No strip bound requested: no dashed line.
    CHECK(svg.find("stroke-dasharray") == std::string::npos);
  }

  SUBCASE("strip bound line when requested") {
    const std::string svg = resonance_svg(rs, 2.5);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
    CHECK(svg.find("y1=\"2.5\"") != std::string::npos);
  }

  SUBCASE("purely real spectrum keeps a usable canvas") {
    std::vector<Resonance> real_only;
    real_only.push_back({Complex(kPi, 0.0), 1, 1e-12, true});
    real_only.push_back({Complex(2.0 * kPi, 0.0), 1, 1e-12, true});
    const std::string svg = resonance_svg(real_only, std::nullopt);
    const std::regex re_vb("viewBox=\"([^\"]+)\"");
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, re_vb));
    std::istringstream vb(m[1]);
    double x0 = 0, y0 = 0, w = 0, h = 0;
    vb >> x0 >> y0 >> w >> h;
    CHECK(w > 0.1);
    CHECK(h > 0.1);
  }
}

TEST_CASE("exception mapping to exit codes") {
  CHECK(run_mapped([] { return 0; }) == 0);
  CHECK(run_mapped([] { return 7; }) == 7);
  CHECK(run_mapped([]() -> int { throw InputError("x"); }) == 2);
  CHECK(run_mapped([]() -> int { throw NumericalError("x"); }) == 3);
  CHECK(run_mapped([]() -> int { throw PolicyError("x"); }) == 4);
  CHECK(run_mapped([]() -> int { throw std::runtime_error("x"); }) == 3);
}

TEST_CASE("validate subcommand") {
  SUBCASE("unbalanced graph reports its strip bound") {
    const RunResult r = run_cli("validate " + files().triangle);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("unbalanced: true") != std::string::npos);
    CHECK(r.output.find("strip bound: 1.0986122886681098") != std::string::npos);
    CHECK(r.output.find("lead vertices: 1") != std::string::npos);
  }
  SUBCASE("balanced endpoints still validate but warn") {
    const RunResult r = run_cli("validate " + files().balanced);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("balanced vertices: [0, 2]") != std::string::npos);
    CHECK(r.output.find("warning") != std::string::npos);
    CHECK(r.output.find("unbalanced: false") != std::string::npos);
    CHECK(r.output.find("strip bound") == std::string::npos);
  }
  SUBCASE("malformed file exits 2") {
    CHECK(run_cli("validate " + files().malformed).exit_code == 2);
  }
  SUBCASE("missing file exits 2") {
    CHECK(run_cli("validate " + files().dir.string() + "/nope.json").exit_code == 2);
  }
}

TEST_CASE("resonances subcommand csv and policies") {
  SUBCASE("interval spectrum rows") {
    const RunResult r = run_cli("resonances " + files().interval + " --re 2:8 --im -0.5:0.5");
    REQUIRE(r.exit_code == 0);
    const auto rows = parse_csv(r.output);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"re", "im", "multiplicity", "residual"});
    CHECK(std::stod(rows[1][0]) == doctest::Approx(kPi).epsilon(1e-10));
    CHECK(std::stod(rows[2][0]) == doctest::Approx(2.0 * kPi).epsilon(1e-10));
    CHECK(std::abs(std::stod(rows[1][1])) < 1e-10);
    CHECK(std::stoi(rows[1][2]) == 1);
  }
  SUBCASE("origin box without opt-in exits 4, with opt-in succeeds") {
    const std::string box = " --re -1:1 --im -1:1";
    CHECK(run_cli("resonances " + files().interval + box).exit_code == 4);
    const RunResult ok = run_cli("resonances " + files().interval + box + " --allow-origin");
    CHECK(ok.exit_code == 0);
    CHECK(parse_csv(ok.output).size() == 1);  // header only: no nonzero roots there
  }
  SUBCASE("bad range syntax exits 2") {
    CHECK(run_cli("resonances " + files().interval + " --re 2-8 --im -1:0").exit_code == 2);
    CHECK(run_cli("resonances " + files().interval + " --re 2:8 --im -1:").exit_code == 2);
  }
  SUBCASE("unknown flag exits 2") {
    CHECK(run_cli("resonances " + files().interval + " --re 2:8 --im -1:0 --bogus").exit_code ==
          2);
  }
  SUBCASE("im upper bound may be zero") {
    const RunResult r = run_cli("resonances " + files().triangle + " --re 1:3 --im -1:0");
    CHECK(r.exit_code == 0);
  }
}

TEST_CASE("resonances json determinism and csv equivalence") {
  const std::string base = "resonances " + files().triangle + " --re 6:6.6 --im -0.2:0.01";
  const RunResult j1 = run_cli(base + " --format json");
  const RunResult j2 = run_cli(base + " --format json");
  const RunResult c1 = run_cli(base);
  REQUIRE(j1.exit_code == 0);
  REQUIRE(j2.exit_code == 0);
  REQUIRE(c1.exit_code == 0);

  ordered_json a = ordered_json::parse(j1.output);
  ordered_json b = ordered_json::parse(j2.output);
  for (const char* key : {"config", "results", "diagnostics", "timestamp"}) {
    CHECK(a.contains(key));
  }
  // Byte-identical reports once the timestamp is removed.
  a.erase("timestamp");
  b.erase("timestamp");
  CHECK(a.dump() == b.dump());

  // CSV and JSON carry identical numerical content.
  const auto rows = parse_csv(c1.output);
  const auto& rj = a["results"]["resonances"];
  REQUIRE(rows.size() == rj.size() + 1);
  for (std::size_t i = 0; i < rj.size(); ++i) {
    CHECK(std::stod(rows[i + 1][0]) == rj[i]["re"].get<double>());
    CHECK(std::stod(rows[i + 1][1]) == rj[i]["im"].get<double>());
    CHECK(std::stoi(rows[i + 1][2]) == rj[i]["multiplicity"].get<int>());
    CHECK(std::stod(rows[i + 1][3]) == rj[i]["residual"].get<double>());
  }
  CHECK(a["results"]["resonances"][0]["re"].get<double>() ==
        doctest::Approx(2.0 * kPi).epsilon(1e-10));
}

TEST_CASE("resonances svg output file") {
  const auto svg_path = files().dir / "plot.svg";
  const auto csv_path = files().dir / "plot.csv";
  const RunResult r = run_cli("resonances " + files().interval +
                              " --re 2:8 --im -0.5:0.5 --svg " + svg_path.string() + " --out " +
                              csv_path.string());
  REQUIRE(r.exit_code == 0);
  std::ifstream svg_in(svg_path);
  REQUIRE(svg_in.good());
  std::stringstream ss;
  ss << svg_in.rdbuf();
  const std::string svg = ss.str();
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("version=\"1.1\"") != std::string::npos);

  std::ifstream csv_in(csv_path);
  REQUIRE(csv_in.good());
  std::stringstream cs;
  cs << csv_in.rdbuf();
  const auto rows = parse_csv(cs.str());
  CHECK(count_occurrences(svg, "<circle") == rows.size() - 1);
}

TEST_CASE("compare and scan subcommands") {
  SUBCASE("compare emits the standard envelope") {
    const RunResult r =
        run_cli("compare " + files().triangle + " --window 1:8 --bins 1 --cutoff 1.5");
    REQUIRE(r.exit_code == 0);
    const ordered_json rep = ordered_json::parse(r.output);
    CHECK(rep["config"]["command"] == "compare");
    CHECK(rep["config"]["window"] == ordered_json::array({1.0, 8.0}));
    CHECK(rep["results"]["distance"].is_number());
    CHECK(rep["results"]["distance"].get<double>() >= 0.0);
    CHECK(rep["results"]["open"]["edges"].size() ==
          rep["results"]["open"]["weights"].size() + 1);
  }
  SUBCASE("scan counts grow as the cutoff shrinks") {
    const RunResult r = run_cli("scan " + files().triangle +
                                " --window 1:15 --depth 2 --deltas 0.8,0.4,0.2");
    REQUIRE(r.exit_code == 0);
    const ordered_json rep = ordered_json::parse(r.output);
    const auto counts = rep["results"]["counts"].get<std::vector<long>>();
    REQUIRE(counts.size() == 3);
    CHECK(counts[0] <= counts[1]);
    CHECK(counts[1] <= counts[2]);
    CHECK(rep["config"]["deltas"] == ordered_json::array({0.8, 0.4, 0.2}));
  }
  SUBCASE("scan rejects non-decreasing deltas via exit 2") {
    CHECK(run_cli("scan " + files().triangle + " --window 1:15 --depth 2 --deltas 0.2,0.4")
              .exit_code == 2);
  }
}

TEST_CASE("ensemble subcommand determinism and seed override") {
  const std::string base =
      "ensemble --n 8 --leads 1 --seed 5 --window 1:6 --bins 1 --cutoff 2";
  const RunResult r1 = run_cli(base);
  const RunResult r2 = run_cli(base);
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  ordered_json a = ordered_json::parse(r1.output);
  ordered_json b = ordered_json::parse(r2.output);
  a.erase("timestamp");
  b.erase("timestamp");
  CHECK(a.dump() == b.dump());
  CHECK(a["results"]["members"][0]["n"] == 8);
  CHECK(a["results"]["members"][0]["seed"] == 5);
  CHECK(a["results"]["members"][0]["distance"].is_number());
}

TEST_CASE("env seed override changes the config echo") {
  const std::string cmd = std::string("RESLAB_SEED=7 ") + RESLAB_BIN +
                          " ensemble --n 8 --leads 1 --seed 5 --window 1:6 --bins 1 --cutoff 2";
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), got);
  REQUIRE(WEXITSTATUS(pclose(pipe)) == 0);
  const ordered_json rep = ordered_json::parse(out);
  CHECK(rep["config"]["seed"] == 7);
  CHECK(rep["results"]["members"][0]["seed"] == 7);

  // And garbage in the variable is an input error.
  const std::string bad = std::string("RESLAB_SEED=abc ") + RESLAB_BIN +
                          " ensemble --n 8 --leads 1 --window 1:6 --bins 1 --cutoff 2";
  FILE* pipe2 = popen((bad + " >/dev/null 2>&1").c_str(), "r");
  REQUIRE(pipe2 != nullptr);
  CHECK(WEXITSTATUS(pclose(pipe2)) == 2);
}

TEST_CASE("hermitian subcommand zero damping gives zero counts") {
  const RunResult r = run_cli(
      "hermitian --n 30 --damp-counts 0,3 --scale 0.05 --deltas 0.1,0.01 --seed 11 --window -1:1");
  REQUIRE(r.exit_code == 0);
  const ordered_json rep = ordered_json::parse(r.output);
  const auto counts = rep["results"]["counts"];
  REQUIRE(counts.size() == 2);
  for (const auto& c : counts[0]) CHECK(c.get<long>() == 0);
  CHECK(rep["results"]["b_trace_norms"][0].get<double>() == 0.0);
  CHECK(rep["results"]["b_trace_norms"][1].get<double>() ==
        doctest::Approx(0.15).epsilon(1e-12));
}
