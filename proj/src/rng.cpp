#include "dfbk/rng.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace dfbk {

std::string RandomStream::serialize() const {
    // Hex words plus the Box-Muller spare encoded through its bit pattern,
    // so resume restores the stream exactly.
    char buf[128];
    uint64_t spare_bits;
    std::memcpy(&spare_bits, &spare_, sizeof spare_bits);
    std::snprintf(buf, sizeof buf, "%016llx %016llx %016llx %016llx %d %016llx",
                  (unsigned long long)state_[0], (unsigned long long)state_[1],
                  (unsigned long long)state_[2], (unsigned long long)state_[3],
                  has_spare_ ? 1 : 0, (unsigned long long)spare_bits);
    return buf;
}

RandomStream RandomStream::deserialize(const std::string& text) {
    RandomStream r;
    unsigned long long s0, s1, s2, s3, spare_bits;
    int has_spare = 0;
    if (std::sscanf(text.c_str(), "%llx %llx %llx %llx %d %llx", &s0, &s1, &s2, &s3, &has_spare,
                    &spare_bits) != 6)
        throw std::runtime_error("RandomStream::deserialize: malformed state string");
    r.state_ = {s0, s1, s2, s3};
    r.has_spare_ = has_spare != 0;
    std::memcpy(&r.spare_, &spare_bits, sizeof r.spare_);
    return r;
}

}  // namespace dfbk
