#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace leafid {

// Error categories map 1:1 onto CLI exit codes (see README).
enum class ErrorKind : int {
    usage = 1,        // bad flags / bad config
    io = 2,           // missing or unreadable file
    validation = 3,   // malformed input, invariant violation
    fingerprint = 4,  // model/reference-set fingerprint mismatch
    numeric = 5,      // NaN loss, no leaf detected, degenerate input
    internal = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error usage_error(const std::string& m) { return Error(ErrorKind::usage, m); }
inline Error io_error(const std::string& m) { return Error(ErrorKind::io, m); }
inline Error validation_error(const std::string& m) { return Error(ErrorKind::validation, m); }
inline Error fingerprint_error(const std::string& m) { return Error(ErrorKind::fingerprint, m); }
inline Error numeric_error(const std::string& m) { return Error(ErrorKind::numeric, m); }

// FNV-1a over a byte range. Used for model/reference-set fingerprints;
// collision resistance is not a goal, mismatch detection is.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

// Derives an independent stream seed from a master seed and a stream tag,
// so per-item generators stay decoupled from iteration order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
    std::uint64_t x = master * 0x9e3779b97f4a7c15ull + tag;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace leafid
