#include "clawnet/common/idgen.hpp"

#include <cstdio>

namespace clawnet {

std::string IdGenerator::hex4() {
    std::lock_guard lock(mu_);
    char buf[8];
    std::snprintf(buf, sizeof buf, "%04x", static_cast<unsigned>(rng_() & 0xffffu));
    return buf;
}

std::string IdGenerator::next(const std::string& prefix) {
    std::lock_guard lock(mu_);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s-%04llu", prefix.c_str(),
                  static_cast<unsigned long long>(++counters_[prefix]));
    return buf;
}

}  // namespace clawnet
