#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace skillrl {

// Streaming SHA-256 (OpenSSL EVP underneath), hex digest out.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, size_t len);
    void update(const std::string& s) { update(s.data(), s.size()); }
    void update(const std::vector<double>& v) {
        update(v.data(), v.size() * sizeof(double));
    }

    // finalizes; the object must not be updated afterwards
    std::string hex();

private:
    void* ctx_;
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);

}  // namespace skillrl
