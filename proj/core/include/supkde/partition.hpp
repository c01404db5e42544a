#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace supkde {

/// A set partition of the coordinate indices {0, ..., dim-1}, canonical form:
/// every block sorted ascending, blocks ordered by their smallest element.
/// Serialized form uses 1-based indices, e.g. [[1,2],[3]].
class Partition {
 public:
  Partition(std::vector<std::vector<int>> blocks, int dim);

  static Partition trivial(int dim);      // {{0..dim-1}}
  static Partition singletons(int dim);   // {{0},{1},...}

  static Partition from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::string to_string() const;  // compact 1-based JSON text

  int dim() const noexcept { return dim_; }
  const std::vector<std::vector<int>>& blocks() const noexcept {
    return blocks_;
  }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  std::size_t max_block_size() const;

  friend bool operator==(const Partition&, const Partition&) = default;
  friend std::strong_ordering operator<=>(const Partition& a,
                                          const Partition& b);

 private:
  std::vector<std::vector<int>> blocks_;
  int dim_ = 0;
};

/// Meet of two partitions: all nonempty pairwise block intersections.
/// The result refines both arguments.
Partition diamond(const Partition& p, const Partition& q);

/// True iff every block of `p` is contained in some block of `q`.
bool refines(const Partition& p, const Partition& q);

/// A candidate set of independence structures. Always contains the
/// trivial partition; an optional cap bounds the block sizes of every
/// other member (the mandatory trivial partition is exempt).
class PartitionFamily {
 public:
  PartitionFamily(int dim, std::vector<Partition> members,
                  std::optional<int> max_block_size = std::nullopt);

  int dim() const noexcept { return dim_; }
  const std::vector<Partition>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }
  std::optional<int> max_block_size() const noexcept {
    return max_block_size_;
  }

  nlohmann::json to_json() const;
  static PartitionFamily from_json(const nlohmann::json& j);

 private:
  int dim_ = 0;
  std::vector<Partition> members_;
  std::optional<int> max_block_size_;
};

/// All set partitions of {0..d-1}; |result| is the d-th Bell number.
/// Guarded to d <= 12 (Bell numbers grow super-exponentially).
PartitionFamily enumerate_all(int d);

/// All partitions whose blocks have size <= max_block, plus the trivial
/// partition and the given extras, deduplicated.
PartitionFamily restricted_family(int d, int max_block,
                                  const std::vector<Partition>& extra = {});

/// Default family used by selection: full enumeration for d <= 4, else
/// just {singletons, trivial}.
PartitionFamily default_family(int d);

}  // namespace supkde
