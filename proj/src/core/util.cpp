#include <cstdio>
#include <fstream>
#include <sstream>

#include "mixagent/hash.hpp"
#include "mixagent/rng.hpp"

namespace mixagent {

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) {
    std::uint64_t h = fnv1a64(label);
    for (int i = 0; i < 8; ++i) h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&master) + i, 1), h);
    for (int i = 0; i < 8; ++i) h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&index) + i, 1), h);
    // One splitmix round to decorrelate nearby indices.
    Rng r(h);
    return r.u64();
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

std::string content_hash(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return content_hash(ss.str());
}

}  // namespace mixagent
