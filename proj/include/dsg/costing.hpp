#pragma once

#include <algorithm>
#include <cstdint>

#include "dsg/core.hpp"

namespace dsg {

// Per-field message encoding. Every field costs ceil(log2 range) bits; the
// budget asserted by the simulator is 64 + 8 * ceil(log2(n + dummies)).
struct BitTable {
    int id_bits = 1;
    int level_bits = 1;
    int time_bits = 1;
    int rank_bits = 1;
    int count_bits = 1;

    static BitTable for_run(std::uint64_t population, int height, std::int64_t now) {
        BitTable b;
        b.id_bits = std::max(1, ceil_log2(population + 1));
        b.level_bits = std::max(1, ceil_log2(static_cast<std::uint64_t>(height) + 1));
        b.time_bits = std::max(1, ceil_log2(static_cast<std::uint64_t>(now) + 1));
        b.rank_bits = std::max(1, ceil_log2(population + 1));
        b.count_bits = b.rank_bits;
        return b;
    }

    // Priority = class flag + sign + group-id * time magnitude.
    int priority_bits() const { return 2 + id_bits + time_bits; }
    int ranked_value_bits() const { return priority_bits() + 2 * rank_bits + id_bits; }
    int notification_chunk_bits() const { return level_bits + 2 * (time_bits + id_bits + 1); }
    int count_vector_bits() const { return id_bits + 4 * count_bits; }
    int median_bits() const { return priority_bits() + id_bits; }
    int group_id_bits() const { return id_bits + level_bits; }

    static int budget(std::uint64_t population) { return 64 + 8 * std::max(1, ceil_log2(population)); }
};

struct CostMeter {
    long long messages = 0;
    int max_bits = 0;

    void msg(int bits, long long count = 1) {
        if (count <= 0) return;
        messages += count;
        max_bits = std::max(max_bits, bits);
    }
};

}  // namespace dsg
