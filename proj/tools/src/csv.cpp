#include "csv.hpp"

#include <cmath>
#include <cstdio>

#include "mfnet/error.hpp"

namespace mfnet::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::string_view spec_hash, std::uint64_t seed,
                     const std::vector<std::string>& columns)
    : out_(path), path_(path), columns_(columns.size()) {
  if (!out_) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out_ << "# spec_hash=" << spec_hash << " seed=" << seed << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void CsvWriter::separator() {
  if (in_row_++ > 0) out_ << ',';
}

CsvWriter& CsvWriter::operator<<(double v) {
  separator();
  out_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(std::int64_t v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(std::uint64_t v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(std::string_view v) {
  separator();
  out_ << v;
  return *this;
}

void CsvWriter::end_row() {
  if (in_row_ != columns_) {
    throw Error(ErrorCode::InvalidArgument, path_.string() + ": row has " + std::to_string(in_row_) +
                                                " fields, header has " + std::to_string(columns_));
  }
  out_ << '\n';
  in_row_ = 0;
  if (!out_) throw Error(ErrorCode::InvalidArgument, "write failed: " + path_.string());
}

}  // namespace mfnet::cli
