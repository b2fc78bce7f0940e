#include "ddest/matrix_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "ddest/config_io.hpp"

namespace ddest {

namespace {

constexpr char kMagic[4] = {'D', 'D', 'S', 'M'};

template <typename U>
void put_le(std::string& out, U v) {
  for (size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::string& in, size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw ChecksumError("DDSM: truncated payload");
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

std::string encode(const MatrixXc& A) {
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(A.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(A.cols()));
  out.reserve(out.size() + static_cast<size_t>(A.size()) * 16);
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) {
      put_le(out, std::bit_cast<std::uint64_t>(A(i, j).real()));
      put_le(out, std::bit_cast<std::uint64_t>(A(i, j).imag()));
    }
  }
  return out;
}

MatrixXc decode(const std::string& in) {
  if (in.size() < 12 || in.compare(0, 4, kMagic, 4) != 0) throw ChecksumError("DDSM: bad magic");
  size_t pos = 4;
  const auto rows = get_le<std::uint32_t>(in, pos);
  const auto cols = get_le<std::uint32_t>(in, pos);
  const size_t expected = 12 + static_cast<size_t>(rows) * cols * 16;
  if (in.size() != expected) throw ChecksumError("DDSM: payload size does not match dimensions");
  MatrixXc A(rows, cols);
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) {
      const Real re = std::bit_cast<Real>(get_le<std::uint64_t>(in, pos));
      const Real im = std::bit_cast<Real>(get_le<std::uint64_t>(in, pos));
      A(i, j) = Complex(re, im);
    }
  }
  return A;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ChecksumError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

void write_ddsm(std::ostream& os, const MatrixXc& A) {
  const std::string bytes = encode(A);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

MatrixXc read_ddsm(std::istream& is) {
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode(ss.str());
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  static const char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<size_t>(i)] = digits[v & 0xF];
  return s;
}

MatrixFiles matrix_files(const std::filesystem::path& stem) {
  MatrixFiles f;
  f.binary = stem;
  f.binary += ".ddsm";
  f.sidecar = stem;
  f.sidecar += ".json";
  return f;
}

MatrixFiles export_sensing_matrix(const std::filesystem::path& stem, const GridConfig& cfg,
                                  const PilotConfig& pilot, const SensingMatrix& Mp) {
  const MatrixFiles files = matrix_files(stem);
  const std::string bytes = encode(Mp.entries());
  {
    std::ofstream os(files.binary, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + files.binary.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  nlohmann::json side{{"format", "DDSM"},
                      {"rows", Mp.rows()},
                      {"cols", Mp.cols()},
                      {"fnv1a64", to_hex(fnv1a64(bytes))},
                      {"grid", grid_to_json(cfg)},
                      {"pilot", pilot_to_json(pilot)}};
  std::ofstream js(files.sidecar);
  if (!js) throw std::runtime_error("cannot write " + files.sidecar.string());
  js << side.dump(2) << '\n';
  return files;
}

ImportedMatrix import_sensing_matrix(const std::filesystem::path& stem) {
  const MatrixFiles files = matrix_files(stem);
  const std::string bytes = slurp(files.binary);
  ImportedMatrix out;
  out.sidecar = nlohmann::json::parse(slurp(files.sidecar), nullptr, false);
  if (out.sidecar.is_discarded() || !out.sidecar.is_object()) throw ChecksumError("sidecar is not valid JSON");
  if (out.sidecar.value("fnv1a64", std::string()) != to_hex(fnv1a64(bytes)))
    throw ChecksumError("checksum mismatch for " + files.binary.string());
  out.entries = decode(bytes);
  if (out.sidecar.value("rows", Index{-1}) != out.entries.rows() ||
      out.sidecar.value("cols", Index{-1}) != out.entries.cols())
    throw ChecksumError("sidecar dimensions do not match " + files.binary.string());
  out.grid = grid_from_json(out.sidecar.at("grid"));
  return out;
}

}  // namespace ddest
