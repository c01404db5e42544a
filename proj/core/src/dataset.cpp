#include "supkde/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "supkde/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary dataset I/O assumes a little-endian host");

namespace supkde {

namespace {

constexpr char kMagic[8] = {'S', 'K', 'D', 'E', 'B', 'I', 'N', '1'};

bool parse_double(std::string_view field, double& out) {
  // Trim surrounding whitespace; from_chars wants a bare number.
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
    field.remove_prefix(1);
  }
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' ||
                            field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (field.empty()) return false;
  const auto* begin = field.data();
  const auto* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_fields(const std::string& line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.emplace_back(line.data() + start, i - start);
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

Dataset::Dataset(std::size_t n, int d, std::vector<double> column_major)
    : n_(n), d_(d), data_(std::move(column_major)) {
  if (n_ < 2) throw ArgumentError("dataset: need at least 2 observations");
  if (d_ < 1) throw ArgumentError("dataset: dimension must be positive");
  if (data_.size() != n_ * static_cast<std::size_t>(d_)) {
    throw ArgumentError("dataset: storage size does not match n*d");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw ArgumentError("dataset: non-finite entry");
    }
  }
}

Dataset Dataset::from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool ok = true;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!parse_double(fields[j], row[j])) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      if (first_content_line) {
        first_content_line = false;  // header line
        continue;
      }
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed CSV row");
    }
    first_content_line = false;
    if (width == 0) {
      width = row.size();
    } else if (row.size() != width) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(width) +
                        " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) {
    throw FormatError(path.string() + ": need at least 2 data rows");
  }
  const std::size_t n = rows.size();
  const int d = static_cast<int>(width);
  std::vector<double> data(n * width);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < width; ++j) data[j * n + i] = rows[i][j];
  }
  try {
    return Dataset(n, d, std::move(data));
  } catch (const ArgumentError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Dataset Dataset::from_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw FormatError(path.string() + ": bad magic, not a SKDEBIN1 file");
  }
  std::uint64_t n = 0;
  std::uint32_t d = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  if (!in || n < 2 || d < 1 || n > (1ULL << 40) || d > (1u << 16)) {
    throw FormatError(path.string() + ": implausible header (n=" +
                      std::to_string(n) + ", d=" + std::to_string(d) + ")");
  }
  std::vector<double> data(n * d);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw FormatError(path.string() + ": truncated data section");
  try {
    return Dataset(n, static_cast<int>(d), std::move(data));
  } catch (const ArgumentError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void Dataset::write_binary(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 8);
  const std::uint64_t n = n_;
  const std::uint32_t d = static_cast<std::uint32_t>(d_);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  out.write(reinterpret_cast<const char*>(data_.data()),
            static_cast<std::streamsize>(data_.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

void Dataset::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < n_; ++i) {
    for (int j = 0; j < d_; ++j) {
      if (j) out << ',';
      out << (*this)(i, j);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::pair<double, double> Dataset::range(int j) const {
  const auto col = column(j);
  const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
  return {*mn, *mx};
}

}  // namespace supkde
