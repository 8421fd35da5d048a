#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace vhslice {

// RB count per user, index-aligned with the caller's user list.
using IntraSliceAllocation = std::vector<int>;

// Buffer-proportional split of a slice's RBs:
//   n_u = floor(b_u / sum(b) * slice_rbs)
// followed by handing the RBs stranded by flooring to the users with the
// largest fractional remainder (ties: lowest index). Empty slice -> all zero.
inline IntraSliceAllocation proportional_allocate(int slice_rbs,
                                                  std::span<const std::int64_t> occupancy) {
  if (slice_rbs < 0) throw std::invalid_argument("proportional_allocate: slice_rbs < 0");
  IntraSliceAllocation alloc(occupancy.size(), 0);
  std::int64_t total = 0;
  for (auto b : occupancy) {
    if (b < 0) throw std::invalid_argument("proportional_allocate: negative occupancy");
    total += b;
  }
  if (total == 0 || slice_rbs == 0) return alloc;

  // Exact integer arithmetic: share = b * N / total, remainder = b * N mod total.
  std::vector<std::int64_t> remainder(occupancy.size(), 0);
  int assigned = 0;
  for (std::size_t i = 0; i < occupancy.size(); ++i) {
    const __int128 scaled = static_cast<__int128>(occupancy[i]) * slice_rbs;
    alloc[i] = static_cast<int>(scaled / total);
    remainder[i] = static_cast<std::int64_t>(scaled % total);
    assigned += alloc[i];
  }
  int leftover = slice_rbs - assigned;
  if (leftover == 0) return alloc;

  std::vector<std::size_t> order(occupancy.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  // leftover < number of users with a non-zero remainder, so users with an
  // empty buffer never receive a stranded RB.
  for (std::size_t k = 0; leftover > 0; ++k, --leftover) ++alloc[order[k]];
  return alloc;
}

// Cyclic dealing starting at `offset` (mod n). Users with an empty buffer are
// skipped; `backlogged` may be empty, meaning every user is eligible.
inline IntraSliceAllocation round_robin_allocate(int slice_rbs, std::size_t num_users,
                                                 std::size_t offset,
                                                 std::span<const bool> backlogged = {}) {
  if (slice_rbs < 0) throw std::invalid_argument("round_robin_allocate: slice_rbs < 0");
  if (!backlogged.empty() && backlogged.size() != num_users)
    throw std::invalid_argument("round_robin_allocate: backlog mask size mismatch");
  IntraSliceAllocation alloc(num_users, 0);
  std::vector<std::size_t> eligible;
  for (std::size_t k = 0; k < num_users; ++k) {
    const std::size_t u = (offset + k) % num_users;
    if (backlogged.empty() || backlogged[u]) eligible.push_back(u);
  }
  if (eligible.empty()) return alloc;
  for (int rb = 0; rb < slice_rbs; ++rb) ++alloc[eligible[static_cast<std::size_t>(rb) % eligible.size()]];
  return alloc;
}

enum class IntraSliceScheduler { proportional, round_robin };

// Round-robin needs a rotating start; this keeps it next to the policy choice.
class IntraSliceScheduling {
 public:
  explicit IntraSliceScheduling(IntraSliceScheduler kind = IntraSliceScheduler::proportional)
      : kind_(kind) {}

  IntraSliceScheduler kind() const { return kind_; }

  IntraSliceAllocation allocate(int slice_rbs, std::span<const std::int64_t> occupancy) {
    if (kind_ == IntraSliceScheduler::proportional)
      return proportional_allocate(slice_rbs, occupancy);
    auto flags = std::make_unique<bool[]>(occupancy.size());
    for (std::size_t i = 0; i < occupancy.size(); ++i) flags[i] = occupancy[i] > 0;
    auto out = round_robin_allocate(slice_rbs, occupancy.size(), offset_,
                                    std::span<const bool>(flags.get(), occupancy.size()));
    if (!occupancy.empty()) offset_ = (offset_ + static_cast<std::size_t>(slice_rbs)) % occupancy.size();
    return out;
  }

 private:
  IntraSliceScheduler kind_;
  std::size_t offset_ = 0;
};

}  // namespace vhslice
