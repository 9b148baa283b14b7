#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace londi {

inline constexpr const char* kVersion = "0.1.0";

/// Input failed validation (bad dimensions, malformed file, out-of-range value).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative solver hit its iteration cap before reaching tolerance.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double last_residual)
        : std::runtime_error(what), last_residual_(last_residual) {}
    double last_residual() const { return last_residual_; }

private:
    double last_residual_;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Seed derivation.
//
// Streams are derived from seed *values* (not positions) with a splitmix64
// chain, so adding a seed to a list never perturbs the streams of the seeds
// already in it. The same derivation backs per-episode streams inside runs.
// ---------------------------------------------------------------------------

inline std::uint64_t split_mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t root, std::uint64_t a,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = split_mix64(root);
    h = split_mix64(h ^ (a + 0x1000000001b3ULL));
    h = split_mix64(h ^ (b + 0xcbf29ce484222325ULL));
    h = split_mix64(h ^ (c + 0x100000001b3ULL));
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t stream) { return std::mt19937_64(stream); }

/// Shortest fixed formatting that round-trips a double exactly (17 significant
/// digits). Used by every text format so that save/load/save is bit-exact.
std::string format_double(double v);

/// FNV-1a over a string; stable across runs and platforms (unlike std::hash).
std::uint64_t fnv1a(const std::string& s);

std::string hex64(std::uint64_t v);

}  // namespace londi
