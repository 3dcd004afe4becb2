#pragma once

#include <cstdint>
#include <cassert>
#include <compare>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace dsg {

// Node identity. Real nodes carry integer ids (>= 1, unique, spaced >= 1).
// Dummy relay nodes get a key strictly between two real keys: whole + num/den
// with 0 <= num/den < 1 and den a power of two, so comparisons stay exact.
struct NodeKey {
    std::int64_t whole = 0;
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    static NodeKey real(std::int64_t id) { return NodeKey{id, 0, 1}; }

    bool is_integer() const { return num == 0; }

    friend bool operator==(const NodeKey& a, const NodeKey& b) {
        return a.whole == b.whole && a.num * b.den == b.num * a.den;
    }
    friend std::strong_ordering operator<=>(const NodeKey& a, const NodeKey& b) {
        if (a.whole != b.whole) return a.whole <=> b.whole;
        return a.num * b.den <=> b.num * a.den;
    }

    // Exact midpoint, used when placing a dummy between base-level neighbors.
    static NodeKey between(const NodeKey& lo, const NodeKey& hi) {
        assert(lo < hi);
        if (hi.whole > lo.whole && !(lo.num == 0 && hi.num == 0 && hi.whole == lo.whole + 1)) {
            // Far apart: offset the left key by half of its remaining sub-unit gap.
            NodeKey k{lo.whole, lo.num * 2 + lo.den, lo.den * 2};
            k.normalize();
            if (k < hi) return k;
        }
        // Same unit interval (or adjacent integers): true rational midpoint.
        std::uint64_t d = std::lcm(lo.den, hi.den);
        std::uint64_t an = lo.num * (d / lo.den);
        std::uint64_t bn = hi.num * (d / hi.den) + static_cast<std::uint64_t>(hi.whole - lo.whole) * d;
        NodeKey k{lo.whole, an + bn, 2 * d};
        k.normalize();
        assert(lo < k && k < hi);
        return k;
    }

    void normalize() {
        while (num >= den) { num -= den; whole += 1; }
        while (num != 0 && (num % 2 == 0) && (den % 2 == 0)) { num /= 2; den /= 2; }
    }

    std::string str() const {
        if (num == 0) return std::to_string(whole);
        return std::to_string(whole) + "+" + std::to_string(num) + "/" + std::to_string(den);
    }
};

// splitmix64: small, fast, and stable across platforms, which keeps traces
// byte-identical for a given seed regardless of the standard library.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    // Uniform in [0, n).
    std::uint64_t below(std::uint64_t n) {
        assert(n > 0);
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }
    bool chance(std::uint64_t num, std::uint64_t den) { return below(den) < num; }
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        Rng r(a ^ (b * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL));
        r.next();
        return r.next();
    }
};

inline int ceil_log2(std::uint64_t v) {
    if (v <= 1) return 0;
    int b = 0;
    std::uint64_t x = v - 1;
    while (x > 0) { x >>= 1; ++b; }
    return b;
}

}  // namespace dsg
