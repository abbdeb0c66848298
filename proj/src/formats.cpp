#include "melmix/formats.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>

#include "melmix/errors.hpp"

namespace melmix {

namespace {

using json = nlohmann::json;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

void put_f32(std::ostream& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw FormatError(std::string("truncated input while reading ") + what);
  }
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

double get_f32(std::istream& in, const char* what) { return std::bit_cast<float>(get_u32(in, what)); }

void expect_magic(std::istream& in, const char* magic) {
  char got[4] = {};
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("bad magic: expected ") + magic);
  }
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw DomainError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

template <typename Write>
void save_file(const std::filesystem::path& path, Write write) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write(out);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

template <typename Read>
auto load_file(const std::filesystem::path& path, Read read) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

[[noreturn]] void field_error(const std::string& path, const std::string& message) {
  throw ConfigError("spec field '" + path + "': " + message);
}

template <typename T>
T get_field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) field_error(path + key, "missing");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    field_error(path + key, "has the wrong type");
  }
}

}  // namespace

void write_tfg1(std::ostream& out, const Grid& grid) {
  out.write("TFG1", 4);
  put_u32(out, checked_u32(grid.rows(), "T"));
  put_u32(out, checked_u32(grid.cols(), "F"));
  for (double v : grid.values()) put_f32(out, v);
}

Grid read_tfg1(std::istream& in) {
  expect_magic(in, "TFG1");
  const std::uint32_t rows = get_u32(in, "TFG1 T");
  const std::uint32_t cols = get_u32(in, "TFG1 F");
  Grid g(rows, cols);
  for (double& v : g.values()) v = get_f32(in, "TFG1 values");
  return g;
}

void save_tfg1(const std::filesystem::path& path, const Grid& grid) {
  save_file(path, [&](std::ostream& out) { write_tfg1(out, grid); });
}

Grid load_tfg1(const std::filesystem::path& path) { return load_file(path, read_tfg1); }

void write_tvcg(std::ostream& out, const TvcGmmField& field) {
  out.write("TVCG", 4);
  put_u32(out, 1);
  put_u32(out, checked_u32(field.rows(), "T"));
  put_u32(out, checked_u32(field.cols(), "F"));
  put_u32(out, checked_u32(field.components(), "K"));
  for (const TvcComponent& c : field.all()) {
    for (double p : pack(c)) put_f32(out, p);
  }
}

TvcGmmField read_tvcg(std::istream& in) {
  expect_magic(in, "TVCG");
  const std::uint32_t version = get_u32(in, "TVCG version");
  if (version != 1) throw FormatError("unsupported TVCG version " + std::to_string(version));
  const std::uint32_t rows = get_u32(in, "TVCG T");
  const std::uint32_t cols = get_u32(in, "TVCG F");
  const std::uint32_t k = get_u32(in, "TVCG K");
  if (k == 0) throw FormatError("TVCG with K = 0");
  TvcGmmField field(rows, cols, k);
  std::array<double, kParamsPerComponent> p{};
  for (TvcComponent& c : field.all()) {
    for (double& v : p) v = get_f32(in, "TVCG records");
    c = unpack(p);
  }
  return field;
}

void save_tvcg(const std::filesystem::path& path, const TvcGmmField& field) {
  save_file(path, [&](std::ostream& out) { write_tvcg(out, field); });
}

TvcGmmField load_tvcg(const std::filesystem::path& path) { return load_file(path, read_tvcg); }

void write_tvds(std::ostream& out, const ConditionedDataset& data) {
  out.write("TVDS", 4);
  put_u32(out, 1);
  put_u32(out, checked_u32(data.records.size(), "record count"));
  for (const auto& r : data.records) {
    put_u32(out, r.condition);
    write_tfg1(out, r.spec);
  }
}

ConditionedDataset read_tvds(std::istream& in) {
  expect_magic(in, "TVDS");
  const std::uint32_t version = get_u32(in, "TVDS version");
  if (version != 1) throw FormatError("unsupported TVDS version " + std::to_string(version));
  const std::uint32_t n = get_u32(in, "TVDS record count");
  ConditionedDataset data;
  data.records.reserve(std::min<std::uint32_t>(n, 1u << 20));
  for (std::uint32_t i = 0; i < n; ++i) {
    DatasetRecord r;
    r.condition = get_u32(in, "TVDS condition id");
    r.spec = read_tfg1(in);
    data.n_conditions = std::max<std::size_t>(data.n_conditions, r.condition + 1u);
    data.records.push_back(std::move(r));
  }
  return data;
}

void save_tvds(const std::filesystem::path& path, const ConditionedDataset& data) {
  save_file(path, [&](std::ostream& out) { write_tvds(out, data); });
}

ConditionedDataset load_tvds(const std::filesystem::path& path) { return load_file(path, read_tvds); }

SynthSpec synth_spec_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = text.substr(0, std::min<std::size_t>(e.byte, text.size()));
    const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
    throw ConfigError("spec JSON syntax error at line " + std::to_string(line) + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("spec JSON must be an object");

  SynthSpec spec;
  spec.rows = get_field<std::size_t>(doc, "rows", "");
  spec.cols = get_field<std::size_t>(doc, "cols", "");
  spec.seed = doc.contains("seed") ? get_field<std::uint64_t>(doc, "seed", "") : 0;
  if (!doc.contains("conditions") || !doc["conditions"].is_array()) field_error("conditions", "must be an array");
  const json& conditions = doc["conditions"];
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    const std::string path = "conditions[" + std::to_string(c) + "].";
    const json& entry = conditions[c];
    if (!entry.is_object()) field_error(path.substr(0, path.size() - 1), "must be an object");
    ConditionSpec cond;
    cond.weights = get_field<std::vector<double>>(entry, "weights", path);
    cond.noise_std = get_field<double>(entry, "noise_std", path);
    cond.rho_t = get_field<double>(entry, "rho_t", path);
    cond.rho_f = get_field<double>(entry, "rho_f", path);
    const auto patterns = get_field<std::vector<std::vector<std::vector<double>>>>(entry, "patterns", path);
    for (std::size_t m = 0; m < patterns.size(); ++m) {
      const std::string ppath = path + "patterns[" + std::to_string(m) + "]";
      if (patterns[m].size() != spec.rows) field_error(ppath, "must have `rows` rows");
      Grid g(spec.rows, spec.cols);
      for (std::size_t t = 0; t < spec.rows; ++t) {
        if (patterns[m][t].size() != spec.cols) field_error(ppath, "row " + std::to_string(t) + " must have `cols` values");
        for (std::size_t f = 0; f < spec.cols; ++f) g(t, f) = patterns[m][t][f];
      }
      cond.patterns.push_back(std::move(g));
    }
    spec.conditions.push_back(std::move(cond));
  }
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid spec: ") + e.what());
  }
  return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  json doc;
  doc["rows"] = spec.rows;
  doc["cols"] = spec.cols;
  doc["seed"] = spec.seed;
  doc["conditions"] = json::array();
  for (const ConditionSpec& cond : spec.conditions) {
    json entry;
    entry["weights"] = cond.weights;
    entry["noise_std"] = cond.noise_std;
    entry["rho_t"] = cond.rho_t;
    entry["rho_f"] = cond.rho_f;
    entry["patterns"] = json::array();
    for (const Grid& p : cond.patterns) {
      json rows = json::array();
      for (std::size_t t = 0; t < p.rows(); ++t) {
        const auto r = p.row(t);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
      }
      entry["patterns"].push_back(std::move(rows));
    }
    doc["conditions"].push_back(std::move(entry));
  }
  return doc.dump(2);
}

}  // namespace melmix
