#include "supkde/partition.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "supkde/errors.hpp"

namespace supkde {

namespace {

void canonicalize(std::vector<std::vector<int>>& blocks) {
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  std::sort(blocks.begin(), blocks.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

}  // namespace

Partition::Partition(std::vector<std::vector<int>> blocks, int dim)
    : blocks_(std::move(blocks)), dim_(dim) {
  if (dim_ < 1) throw ArgumentError("partition dimension must be positive");
  std::vector<bool> seen(static_cast<std::size_t>(dim_), false);
  std::size_t covered = 0;
  for (const auto& b : blocks_) {
    if (b.empty()) throw ArgumentError("partition has an empty block");
    for (int i : b) {
      if (i < 0 || i >= dim_) {
        throw ArgumentError("partition block index " + std::to_string(i + 1) +
                            " out of range for dimension " +
                            std::to_string(dim_));
      }
      if (seen[static_cast<std::size_t>(i)]) {
        throw ArgumentError("partition blocks overlap at index " +
                            std::to_string(i + 1));
      }
      seen[static_cast<std::size_t>(i)] = true;
      ++covered;
    }
  }
  if (covered != static_cast<std::size_t>(dim_)) {
    throw ArgumentError("partition blocks do not cover {1.." +
                        std::to_string(dim_) + "}");
  }
  canonicalize(blocks_);
}

Partition Partition::trivial(int dim) {
  std::vector<int> all(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) all[static_cast<std::size_t>(i)] = i;
  return Partition({std::move(all)}, dim);
}

Partition Partition::singletons(int dim) {
  std::vector<std::vector<int>> blocks;
  blocks.reserve(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) blocks.push_back({i});
  return Partition(std::move(blocks), dim);
}

Partition Partition::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("partition JSON must be an array");
  std::vector<std::vector<int>> blocks;
  int max_index = 0;
  for (const auto& jb : j) {
    if (!jb.is_array()) {
      throw FormatError("partition JSON blocks must be arrays");
    }
    std::vector<int> block;
    for (const auto& ji : jb) {
      if (!ji.is_number_integer()) {
        throw FormatError("partition JSON indices must be integers");
      }
      const int one_based = ji.get<int>();
      max_index = std::max(max_index, one_based);
      block.push_back(one_based - 1);
    }
    blocks.push_back(std::move(block));
  }
  return Partition(std::move(blocks), max_index);
}

nlohmann::json Partition::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& b : blocks_) {
    nlohmann::json jb = nlohmann::json::array();
    for (int i : b) jb.push_back(i + 1);
    out.push_back(std::move(jb));
  }
  return out;
}

std::string Partition::to_string() const { return to_json().dump(); }

std::size_t Partition::max_block_size() const {
  std::size_t m = 0;
  for (const auto& b : blocks_) m = std::max(m, b.size());
  return m;
}

std::strong_ordering operator<=>(const Partition& a, const Partition& b) {
  if (a.dim_ != b.dim_) return a.dim_ <=> b.dim_;
  return a.blocks_ <=> b.blocks_;
}

Partition diamond(const Partition& p, const Partition& q) {
  if (p.dim() != q.dim()) {
    throw ArgumentError("diamond: partitions have different dimensions (" +
                        std::to_string(p.dim()) + " vs " +
                        std::to_string(q.dim()) + ")");
  }
  std::vector<std::vector<int>> blocks;
  std::vector<int> inter;
  for (const auto& bi : p.blocks()) {
    for (const auto& bj : q.blocks()) {
      inter.clear();
      std::set_intersection(bi.begin(), bi.end(), bj.begin(), bj.end(),
                            std::back_inserter(inter));
      if (!inter.empty()) blocks.push_back(inter);
    }
  }
  return Partition(std::move(blocks), p.dim());
}

bool refines(const Partition& p, const Partition& q) {
  if (p.dim() != q.dim()) {
    throw ArgumentError("refines: partitions have different dimensions");
  }
  // Map each index to its q-block; a p-block refines iff all of its
  // members land in the same q-block.
  std::vector<int> owner(static_cast<std::size_t>(q.dim()), -1);
  for (std::size_t bi = 0; bi < q.blocks().size(); ++bi) {
    for (int i : q.blocks()[bi]) {
      owner[static_cast<std::size_t>(i)] = static_cast<int>(bi);
    }
  }
  for (const auto& b : p.blocks()) {
    const int first = owner[static_cast<std::size_t>(b.front())];
    for (int i : b) {
      if (owner[static_cast<std::size_t>(i)] != first) return false;
    }
  }
  return true;
}

PartitionFamily::PartitionFamily(int dim, std::vector<Partition> members,
                                 std::optional<int> max_block_size)
    : dim_(dim), max_block_size_(max_block_size) {
  if (dim_ < 1) throw ArgumentError("family dimension must be positive");
  if (max_block_size_ && *max_block_size_ < 1) {
    throw ArgumentError("family block-size cap must be positive");
  }
  std::set<Partition> unique;
  for (auto& p : members) {
    if (p.dim() != dim_) {
      throw ArgumentError("family member " + p.to_string() +
                          " has dimension " + std::to_string(p.dim()) +
                          ", expected " + std::to_string(dim_));
    }
    unique.insert(std::move(p));
  }
  unique.insert(Partition::trivial(dim_));
  members_.assign(unique.begin(), unique.end());
  if (max_block_size_) {
    const auto cap = static_cast<std::size_t>(*max_block_size_);
    for (const auto& p : members_) {
      if (p == Partition::trivial(dim_)) continue;
      for (const auto& b : p.blocks()) {
        if (b.size() > cap) {
          throw ArgumentError("family member " + p.to_string() +
                              " violates the block-size cap " +
                              std::to_string(cap));
        }
      }
    }
  }
}

nlohmann::json PartitionFamily::to_json() const {
  nlohmann::json out;
  out["dim"] = dim_;
  if (max_block_size_) out["max_block_size"] = *max_block_size_;
  out["members"] = nlohmann::json::array();
  for (const auto& p : members_) out["members"].push_back(p.to_json());
  return out;
}

PartitionFamily PartitionFamily::from_json(const nlohmann::json& j) {
  if (!j.contains("dim") || !j.contains("members")) {
    throw FormatError("family JSON needs 'dim' and 'members'");
  }
  const int dim = j.at("dim").get<int>();
  std::vector<Partition> members;
  for (const auto& jp : j.at("members")) {
    auto p = Partition::from_json(jp);
    if (p.dim() < dim) {
      // from_json infers dim from the largest index; re-validate at `dim`.
      p = Partition(p.blocks(), dim);
    }
    members.push_back(std::move(p));
  }
  std::optional<int> cap;
  if (j.contains("max_block_size")) cap = j.at("max_block_size").get<int>();
  return PartitionFamily(dim, std::move(members), cap);
}

namespace {

// Restricted-growth-string enumeration: a[0]=0, a[i] <= 1+max(a[0..i-1]).
// Labels in order of first appearance give blocks already sorted by their
// smallest element.
void enumerate_rgs(int d, std::vector<int>& labels, int used,
                   std::vector<Partition>& out) {
  const int at = static_cast<int>(labels.size());
  if (at == d) {
    std::vector<std::vector<int>> blocks(static_cast<std::size_t>(used));
    for (int i = 0; i < d; ++i) {
      blocks[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])]
          .push_back(i);
    }
    out.emplace_back(std::move(blocks), d);
    return;
  }
  for (int lab = 0; lab <= used; ++lab) {
    labels.push_back(lab);
    enumerate_rgs(d, labels, std::max(used, lab + 1), out);
    labels.pop_back();
  }
}

}  // namespace

PartitionFamily enumerate_all(int d) {
  if (d < 1 || d > 12) {
    throw ArgumentError(
        "enumerate_all supports 1 <= d <= 12: the partition count is the "
        "d-th Bell number, which grows like (d/ln d)^d and is already "
        "4213597 at d = 12");
  }
  std::vector<Partition> out;
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(d));
  enumerate_rgs(d, labels, 0, out);
  return PartitionFamily(d, std::move(out));
}

PartitionFamily restricted_family(int d, int max_block,
                                  const std::vector<Partition>& extra) {
  if (max_block < 1 || max_block > d) {
    throw ArgumentError("restricted_family: need 1 <= max_block <= d");
  }
  for (const auto& p : extra) {
    if (p.dim() != d) {
      throw ArgumentError("restricted_family: extra partition " +
                          p.to_string() + " has wrong dimension");
    }
  }
  std::vector<Partition> members;
  if (max_block == 1) {
    // No enumeration needed; works for any d.
    members.push_back(Partition::singletons(d));
  } else {
    const auto all = enumerate_all(d);
    const auto cap = static_cast<std::size_t>(max_block);
    for (const auto& p : all.members()) {
      if (p.max_block_size() <= cap) members.push_back(p);
    }
  }
  members.insert(members.end(), extra.begin(), extra.end());
  // The mandatory trivial partition is exempt from the cap; record the cap
  // only if the extras honor it too.
  std::optional<int> cap = max_block;
  for (const auto& p : extra) {
    if (p.max_block_size() > static_cast<std::size_t>(max_block)) {
      cap.reset();
      break;
    }
  }
  return PartitionFamily(d, std::move(members), cap);
}

PartitionFamily default_family(int d) {
  if (d <= 4) return enumerate_all(d);
  return PartitionFamily(d, {Partition::singletons(d)});
}

}  // namespace supkde
