#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace supkde {

/// n x d sample matrix stored column-major; all entries finite, n >= 2.
class Dataset {
 public:
  Dataset(std::size_t n, int d, std::vector<double> column_major);

  /// CSV with one row per observation; a non-numeric first line is treated
  /// as a header. Throws FormatError with the offending line number.
  static Dataset from_csv(const std::filesystem::path& path);

  /// Binary layout: magic "SKDEBIN1", u64 n, u32 d, then d columns of n
  /// doubles, all little-endian.
  static Dataset from_binary(const std::filesystem::path& path);
  void write_binary(const std::filesystem::path& path) const;
  void write_csv(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return n_; }
  int dim() const noexcept { return d_; }
  double operator()(std::size_t i, int j) const {
    return data_[static_cast<std::size_t>(j) * n_ + i];
  }
  std::span<const double> column(int j) const {
    return {data_.data() + static_cast<std::size_t>(j) * n_, n_};
  }
  /// Per-axis (min, max) over the sample.
  std::pair<double, double> range(int j) const;

 private:
  std::size_t n_ = 0;
  int d_ = 0;
  std::vector<double> data_;
};

}  // namespace supkde
