#include "driftrec/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "binary artifact formats are little-endian; big-endian hosts are unsupported");

namespace driftrec {

namespace {

[[noreturn]] void fail(const std::filesystem::path& p, const std::string& what) {
  throw std::runtime_error(p.string() + ": " + what);
}

}  // namespace

BinaryWriter::BinaryWriter(const std::filesystem::path& path, const char magic[8], std::uint32_t version)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) fail(path, "cannot open for writing");
  out_.write(magic, 8);
  write_u32(version);
}

BinaryWriter::~BinaryWriter() { close(); }

void BinaryWriter::close() {
  if (out_.is_open()) {
    out_.close();
    if (!out_) fail(path_, "write failed on close");
  }
}

void BinaryWriter::write_u32(std::uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
void BinaryWriter::write_u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), 8); }
void BinaryWriter::write_i64(std::int64_t v) { out_.write(reinterpret_cast<const char*>(&v), 8); }
void BinaryWriter::write_f64(double v) { out_.write(reinterpret_cast<const char*>(&v), 8); }

void BinaryWriter::write_string(const std::string& s) {
  write_u64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::write_vector(const Eigen::VectorXd& v) {
  write_u64(static_cast<std::uint64_t>(v.size()));
  out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

void BinaryWriter::write_matrix(const Eigen::MatrixXd& m) {
  write_u64(static_cast<std::uint64_t>(m.rows()));
  write_u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      write_f64(m(r, c));
    }
  }
}

BinaryReader::BinaryReader(const std::filesystem::path& path, const char magic[8], std::uint32_t expect_version)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) fail(path, "cannot open for reading");
  char got[8];
  in_.read(got, 8);
  if (!in_ || std::memcmp(got, magic, 8) != 0) fail(path, "bad magic (wrong file type?)");
  const std::uint32_t version = read_u32();
  if (version != expect_version) {
    fail(path, "unsupported format version " + std::to_string(version));
  }
}

std::uint32_t BinaryReader::read_u32() {
  std::uint32_t v = 0;
  in_.read(reinterpret_cast<char*>(&v), 4);
  if (!in_) fail(path_, "truncated file");
  return v;
}

std::uint64_t BinaryReader::read_u64() {
  std::uint64_t v = 0;
  in_.read(reinterpret_cast<char*>(&v), 8);
  if (!in_) fail(path_, "truncated file");
  return v;
}

std::int64_t BinaryReader::read_i64() {
  std::int64_t v = 0;
  in_.read(reinterpret_cast<char*>(&v), 8);
  if (!in_) fail(path_, "truncated file");
  return v;
}

double BinaryReader::read_f64() {
  double v = 0;
  in_.read(reinterpret_cast<char*>(&v), 8);
  if (!in_) fail(path_, "truncated file");
  return v;
}

std::string BinaryReader::read_string() {
  const std::uint64_t n = read_u64();
  std::string s(n, '\0');
  in_.read(s.data(), static_cast<std::streamsize>(n));
  if (!in_) fail(path_, "truncated file");
  return s;
}

Eigen::VectorXd BinaryReader::read_vector() {
  const std::uint64_t n = read_u64();
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
  if (!in_) fail(path_, "truncated file");
  return v;
}

Eigen::MatrixXd BinaryReader::read_matrix() {
  const std::uint64_t rows = read_u64();
  const std::uint64_t cols = read_u64();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::uint64_t r = 0; r < rows; ++r) {
    for (std::uint64_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = read_f64();
    }
  }
  return m;
}

}  // namespace driftrec
