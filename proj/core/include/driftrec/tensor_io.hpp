#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace driftrec {

// Little-endian binary files with an 8-byte magic and a u32 format version.
// Doubles are written as raw IEEE-754 64-bit values.

class BinaryWriter {
 public:
  BinaryWriter(const std::filesystem::path& path, const char magic[8], std::uint32_t version);
  ~BinaryWriter();

  void write_u32(std::uint32_t v);
  void write_u64(std::uint64_t v);
  void write_i64(std::int64_t v);
  void write_f64(double v);
  void write_string(const std::string& s);
  void write_vector(const Eigen::VectorXd& v);
  void write_matrix(const Eigen::MatrixXd& m);  // row-major payload

  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class BinaryReader {
 public:
  BinaryReader(const std::filesystem::path& path, const char magic[8], std::uint32_t expect_version);

  std::uint32_t read_u32();
  std::uint64_t read_u64();
  std::int64_t read_i64();
  double read_f64();
  std::string read_string();
  Eigen::VectorXd read_vector();
  Eigen::MatrixXd read_matrix();

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace driftrec
