#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace marc {

/// Incremental SHA-256 (OpenSSL EVP), hex-encoded on finish.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(const void* data, std::size_t bytes);
    template <class T>
    Sha256& update(std::span<const T> values) {
        return update(values.data(), values.size_bytes());
    }
    Sha256& update(std::string_view text) { return update(text.data(), text.size()); }

    std::string hex();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string sha256_file(const std::filesystem::path& path);

}  // namespace marc
