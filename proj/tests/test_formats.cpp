#include <doctest.h>

#include <cstring>
#include <sstream>

#include "fixtures.hpp"
#include "melmix/errors.hpp"
#include "melmix/formats.hpp"
#include "scratch.hpp"

using namespace melmix;

namespace {

/// Rounds every value through float32 so round trips compare exactly.
Grid as_float(Grid g) {
  for (double& v : g.values()) v = static_cast<float>(v);
  return g;
}

TvcGmmField as_float(TvcGmmField f) {
  for (auto& c : f.all()) {
    auto p = pack(c);
    for (double& v : p) v = static_cast<float>(v);
    c = unpack(p);
  }
  return f;
}

}  // namespace

TEST_SUITE("formats") {
  TEST_CASE("TFG1 byte layout") {
    std::ostringstream out;
    write_tfg1(out, Grid(1, 2, {1.0, -2.0}));
    const std::string bytes = out.str();
    REQUIRE(bytes.size() == 4 + 8 + 8);
    CHECK(bytes.substr(0, 4) == "TFG1");
    CHECK(bytes.substr(4, 8) == std::string("\x01\0\0\0\x02\0\0\0", 8));
    float v[2];
    std::memcpy(v, bytes.data() + 12, 8);
    CHECK(v[0] == 1.0f);
    CHECK(v[1] == -2.0f);
  }

  TEST_CASE("TFG1 round trip") {
    const Grid g = as_float(fixtures::noise_grid(7, 5, 3));
    std::stringstream io;
    write_tfg1(io, g);
    CHECK(read_tfg1(io) == g);
    Scratch dir("tfg1");
    save_tfg1(dir / "g.tfg1", g);
    CHECK(load_tfg1(dir / "g.tfg1") == g);
  }

  TEST_CASE("TFG1 errors") {
    std::istringstream bad_magic(std::string("TFGX\1\0\0\0\1\0\0\0\0\0\0\0", 16));
    CHECK_THROWS_AS(read_tfg1(bad_magic), FormatError);
    std::istringstream truncated(std::string("TFG1\2\0\0\0\2\0\0\0\0\0\0\0", 16));
    CHECK_THROWS_AS(read_tfg1(truncated), FormatError);
    CHECK_THROWS_AS(load_tfg1("/nonexistent/melmix.tfg1"), IoError);
  }

  TEST_CASE("TVCG round trip and layout") {
    const TvcGmmField f = as_float(fixtures::random_field(3, 4, 2, 8));
    std::stringstream io;
    write_tvcg(io, f);
    CHECK(io.str().size() == 20 + 3 * 4 * 2 * kParamsPerComponent * 4);
    CHECK(io.str().substr(0, 4) == "TVCG");
    CHECK(read_tvcg(io) == f);
    Scratch dir("tvcg");
    save_tvcg(dir / "f.tvcg", f);
    CHECK(load_tvcg(dir / "f.tvcg") == f);
  }

  TEST_CASE("TVCG rejects unknown versions") {
    std::stringstream io;
    write_tvcg(io, TvcGmmField(1, 1, 1));
    std::string bytes = io.str();
    bytes[4] = 2;
    std::istringstream in(bytes);
    CHECK_THROWS_AS(read_tvcg(in), FormatError);
  }

  TEST_CASE("TVDS round trip") {
    auto d = generate(default_synth_spec(1), 3);
    for (auto& r : d.records) r.spec = as_float(r.spec);
    std::stringstream io;
    write_tvds(io, d);
    const auto back = read_tvds(io);
    CHECK(back.n_conditions == 4);
    REQUIRE(back.records.size() == d.records.size());
    for (std::size_t i = 0; i < d.records.size(); ++i) {
      CHECK(back.records[i].condition == d.records[i].condition);
      CHECK(back.records[i].spec == d.records[i].spec);
    }
    std::istringstream wrong("TVCG");
    CHECK_THROWS_AS(read_tvds(wrong), FormatError);
  }

  TEST_CASE("spec JSON round trip") {
    const SynthSpec s = default_synth_spec(12);
    const SynthSpec back = synth_spec_from_json(synth_spec_to_json(s));
    CHECK(back.rows == s.rows);
    CHECK(back.cols == s.cols);
    CHECK(back.seed == 12);
    REQUIRE(back.conditions.size() == 4);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(back.conditions[c].weights == s.conditions[c].weights);
      CHECK(back.conditions[c].patterns == s.conditions[c].patterns);
      CHECK(back.conditions[c].rho_f == s.conditions[c].rho_f);
    }
  }

  TEST_CASE("spec JSON syntax errors report the line") {
    const std::string text = "{\n  \"rows\": 2,\n  \"cols\": 2,\n  \"conditions\": [,]\n}";
    CHECK_THROWS_WITH_AS(synth_spec_from_json(text), doctest::Contains("line 4"), ConfigError);
  }

  TEST_CASE("spec JSON field errors report the path") {
    const std::string missing = R"({"rows": 2, "cols": 2, "conditions": [{"weights": [1.0], "rho_t": 0, "rho_f": 0,
      "patterns": [[[0, 0], [0, 0]]]}]})";
    CHECK_THROWS_WITH_AS(synth_spec_from_json(missing), doctest::Contains("conditions[0].noise_std"), ConfigError);
    const std::string short_row = R"({"rows": 2, "cols": 2, "conditions": [{"weights": [1.0], "noise_std": 1,
      "rho_t": 0, "rho_f": 0, "patterns": [[[0, 0], [0]]]}]})";
    CHECK_THROWS_WITH_AS(synth_spec_from_json(short_row), doctest::Contains("patterns[0]"), ConfigError);
    const std::string wrong_type = R"({"rows": "two", "cols": 2, "conditions": []})";
    CHECK_THROWS_WITH_AS(synth_spec_from_json(wrong_type), doctest::Contains("'rows'"), ConfigError);
    const std::string invalid = R"({"rows": 2, "cols": 2, "conditions": [{"weights": [0.3], "noise_std": 1,
      "rho_t": 0, "rho_f": 0, "patterns": [[[0, 0], [0, 0]]]}]})";
    CHECK_THROWS_AS(synth_spec_from_json(invalid), ConfigError);
  }
}
