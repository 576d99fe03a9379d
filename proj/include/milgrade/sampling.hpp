#pragma once

#include <cstdint>
#include <vector>

namespace milgrade {

// i.i.d. index draws with replacement, P(i) proportional to
// 1 / count(class(labels[i])); deterministic per seed.
std::vector<std::size_t> weighted_sample_indices(const std::vector<int>& labels,
                                                 std::size_t n_draws, std::uint64_t seed);

} // namespace milgrade
