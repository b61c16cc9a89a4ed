#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mixagent {

// FNV-1a 64-bit, used for content hashes in manifests and provenance tags.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);
std::string content_hash(std::string_view bytes);
std::string file_hash(const std::string& path);

}  // namespace mixagent
