#include "mwspill/cli.hpp"

#include "mwspill/error.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <memory>

namespace mwspill::cli {

std::string sha256_hex(const std::string& bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw Error("hash", "SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open '" + path + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

void RunManifest::add_input(const std::string& path) {
    if (path.empty()) return;
    inputs.emplace_back(path, sha256_file(path));
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json in = nlohmann::json::array();
    for (const auto& [p, h] : inputs) in.push_back({{"path", p}, {"sha256", h}});
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [p, h] : outputs) out.push_back({{"path", p}, {"sha256", h}});
    return {{"command", command}, {"tool_version", kToolVersion}, {"seed", seed},
            {"config", config},   {"inputs", in},                 {"outputs", out}};
}

}  // namespace mwspill::cli
