#pragma once

// Binary containers (all integers u32 little-endian, all reals float32 LE):
//
//   TFG1  "TFG1" T F, then T*F values row-major (time-major).
//   TVCG  "TVCG" version=1 T F K, then per bin, per component:
//         logit mu0 mu1 mu2 d1 d2 d3 l21 l31 l32.
//   TVDS  "TVDS" version=1 n_records, then per record: condition_id followed
//         by a complete TFG1 payload.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "melmix/grid.hpp"
#include "melmix/synth.hpp"
#include "melmix/tvcgmm.hpp"

namespace melmix {

void write_tfg1(std::ostream& out, const Grid& grid);
Grid read_tfg1(std::istream& in);
void save_tfg1(const std::filesystem::path& path, const Grid& grid);
Grid load_tfg1(const std::filesystem::path& path);

void write_tvcg(std::ostream& out, const TvcGmmField& field);
TvcGmmField read_tvcg(std::istream& in);
void save_tvcg(const std::filesystem::path& path, const TvcGmmField& field);
TvcGmmField load_tvcg(const std::filesystem::path& path);

void write_tvds(std::ostream& out, const ConditionedDataset& data);
/// n_conditions is recovered as 1 + the largest condition id.
ConditionedDataset read_tvds(std::istream& in);
void save_tvds(const std::filesystem::path& path, const ConditionedDataset& data);
ConditionedDataset load_tvds(const std::filesystem::path& path);

/// Parses a synthetic-data spec. Errors are ConfigError messages that name the
/// JSON line (syntax errors) or the offending field path.
SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);

}  // namespace melmix
