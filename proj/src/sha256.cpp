#include "evomd/sha256.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace evomd {

namespace {

struct DigestCtx {
    EVP_MD_CTX* ctx;
    DigestCtx() : ctx(EVP_MD_CTX_new()) {
        if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("sha256: EVP init failed");
    }
    ~DigestCtx() { EVP_MD_CTX_free(ctx); }
    void update(const void* data, std::size_t len) {
        if (EVP_DigestUpdate(ctx, data, len) != 1)
            throw std::runtime_error("sha256: EVP update failed");
    }
    std::string finish() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx, md.data(), &len) != 1)
            throw std::runtime_error("sha256: EVP final failed");
        static const char* hex = "0123456789abcdef";
        std::string out;
        out.reserve(2 * len);
        for (unsigned int i = 0; i < len; ++i) {
            out.push_back(hex[md[i] >> 4]);
            out.push_back(hex[md[i] & 0xf]);
        }
        return out;
    }
};

}  // namespace

std::string sha256_hex(std::string_view data) {
    DigestCtx d;
    d.update(data.data(), data.size());
    return d.finish();
}

std::string sha256_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("sha256: cannot open " + path.string());
    DigestCtx d;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return d.finish();
}

}  // namespace evomd
