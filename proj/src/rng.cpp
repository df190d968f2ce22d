#include "marc/rng.hpp"

namespace marc {

std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char ch : stage) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = master ^ h ^ (index * 0x9e3779b97f4a7c15ULL);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace marc
