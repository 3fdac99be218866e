#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace mfnet::cli {

/// Comma separated output. The first line is a comment carrying the spec hash
/// and seed, the second the column names.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string_view spec_hash, std::uint64_t seed,
            const std::vector<std::string>& columns);

  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(std::int64_t v);
  CsvWriter& operator<<(std::uint64_t v);
  CsvWriter& operator<<(std::string_view v);
  void end_row();

 private:
  void separator();

  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
};

std::string format_double(double v);

}  // namespace mfnet::cli
