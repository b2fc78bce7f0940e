// matrix_io.hpp - DDSM sensing-matrix container
//
// Binary layout (little endian):
//   "DDSM" | u32 M | u32 LB | M*LB pairs of f64 (re, im), row-major
// A JSON sidecar carries the grid and pilot configuration plus an FNV-1a 64
// checksum of the binary file.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "ddest/afdm_sensing.hpp"

namespace ddest {

void write_ddsm(std::ostream& os, const MatrixXc& A);
/// Throws ChecksumError on a bad magic, truncated payload or trailing bytes.
MatrixXc read_ddsm(std::istream& is);

std::uint64_t fnv1a64(const std::string& bytes);
std::string to_hex(std::uint64_t v);

struct MatrixFiles {
  std::filesystem::path binary;
  std::filesystem::path sidecar;
};

MatrixFiles matrix_files(const std::filesystem::path& stem);

/// Writes <stem>.ddsm and <stem>.json.
MatrixFiles export_sensing_matrix(const std::filesystem::path& stem, const GridConfig& cfg,
                                  const PilotConfig& pilot, const SensingMatrix& Mp);

struct ImportedMatrix {
  MatrixXc entries;
  GridConfig grid;
  nlohmann::json sidecar;
};

/// Reads both files and verifies the checksum and dimensions. Throws
/// ChecksumError on any mismatch.
ImportedMatrix import_sensing_matrix(const std::filesystem::path& stem);

}  // namespace ddest
