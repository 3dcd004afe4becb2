#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dsg/core.hpp"

namespace dsg {

// Priority assigned during a transformation. Infinite beats every finite
// value (rule P1); finite values are signed (positive for the communicating
// group, negative bands for everyone else).
struct PriorityValue {
    bool infinite = false;
    std::int64_t number = 0;

    static PriorityValue inf() { return {true, 0}; }
    static PriorityValue finite(std::int64_t v) { return {false, v}; }

    bool is_negative() const { return !infinite && number < 0; }

    friend bool operator==(const PriorityValue& a, const PriorityValue& b) {
        return a.infinite == b.infinite && (a.infinite || a.number == b.number);
    }
    friend std::strong_ordering operator<=>(const PriorityValue& a, const PriorityValue& b) {
        if (a.infinite != b.infinite) return a.infinite ? std::strong_ordering::greater : std::strong_ordering::less;
        if (a.infinite) return std::strong_ordering::equal;
        return a.number <=> b.number;
    }

    std::string str() const { return infinite ? "inf" : std::to_string(number); }
};

// A priority together with the id of the node that holds it. Ties in value
// are ordered by origin id, which gives every split a total order to cut at.
struct RankedPriority {
    PriorityValue value;
    std::int64_t origin = 0;

    friend bool operator==(const RankedPriority&, const RankedPriority&) = default;
    friend std::strong_ordering operator<=>(const RankedPriority& a, const RankedPriority& b) {
        if (auto c = a.value <=> b.value; c != 0) return c;
        return a.origin <=> b.origin;
    }
};

// Median broadcast to a list. A median computed by the AMF carries the origin
// of the chosen value; a pinned (scripted) median carries none, in which case
// comparisons fall back to value order with ties kept on the >= side.
struct MedianPriority {
    PriorityValue value;
    std::optional<std::int64_t> origin;

    static MedianPriority pinned(std::int64_t v) { return {PriorityValue::finite(v), std::nullopt}; }
};

// True when (p, id) sorts at or above the median cut.
inline bool at_or_above(const PriorityValue& p, std::int64_t id, const MedianPriority& m) {
    if (!m.origin) return p >= m.value;
    return RankedPriority{p, id} >= RankedPriority{m.value, *m.origin};
}

}  // namespace dsg
