#include "milgrade/sampling.hpp"

#include <map>

#include "milgrade/errors.hpp"
#include "milgrade/rng.hpp"

namespace milgrade {

std::vector<std::size_t> weighted_sample_indices(const std::vector<int>& labels,
                                                 std::size_t n_draws, std::uint64_t seed) {
    if (labels.empty()) throw ContractError("weighted_sample_indices: empty labels");

    std::map<int, std::size_t> counts;
    for (int l : labels) ++counts[l];

    // Cumulative weights over indices; binary search per draw.
    std::vector<double> cum(labels.size());
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        total += 1.0 / static_cast<double>(counts[labels[i]]);
        cum[i] = total;
    }

    Rng rng(seed);
    std::vector<std::size_t> out(n_draws);
    for (std::size_t d = 0; d < n_draws; ++d) {
        const double r = rng.uniform01() * total;
        std::size_t lo = 0;
        std::size_t hi = cum.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (r < cum[mid]) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        out[d] = lo;
    }
    return out;
}

} // namespace milgrade
