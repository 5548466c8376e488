#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>

namespace clawnet {

/// Seeded source for generated identifiers so that runs are reproducible.
class IdGenerator {
public:
    explicit IdGenerator(std::uint64_t seed = 0) : rng_(seed) {}

    /// Four lowercase hex digits.
    std::string hex4();

    /// `<prefix>-<zero padded counter>`; counters are per prefix.
    std::string next(const std::string& prefix);

private:
    std::mutex mu_;
    std::mt19937_64 rng_;
    std::map<std::string, std::uint64_t> counters_;
};

}  // namespace clawnet
