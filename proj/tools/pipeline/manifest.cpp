#include "manifest.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fftw3.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/version.h>

#include "neurorate/error.hpp"

namespace neurorate::cli {

namespace {

class Digest {
public:
    Digest() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 initialisation failed");
    }
    void update(const char* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw Error("SHA-256 update failed");
    }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw Error("SHA-256 finalisation failed");
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += digits[md[i] >> 4];
            out += digits[md[i] & 15];
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

} // namespace

std::string sha256_hex(const std::string& bytes) {
    Digest d;
    d.update(bytes.data(), bytes.size());
    return d.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string() + " for checksumming");
    Digest d;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return d.hex();
}

std::filesystem::path write_manifest(const RunConfig& config, const std::string& subcommand,
                                     const std::vector<std::filesystem::path>& artifacts) {
    const std::string text = canonical_text(config);
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["seed"] = config.seed;
    j["threads"] = config.threads;
    j["config_sha256"] = sha256_hex(text);
    j["config"] = text;
    auto& v = j["versions"];
    v["neurorate"] = NEURORATE_VERSION;
    v["compiler"] = __VERSION__;
    v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    v["fftw"] = std::string(fftw_version);
    v["boost"] = BOOST_LIB_VERSION;
    v["spdlog"] = std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) + "." +
                  std::to_string(SPDLOG_VER_PATCH);
    auto& list = j["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& p : artifacts) {
        list.push_back({{"path", std::filesystem::relative(p, config.out).generic_string()},
                        {"bytes", std::filesystem::file_size(p)},
                        {"sha256", sha256_file(p)}});
    }
    const auto path = config.out / ("manifest-" + subcommand + ".json");
    std::ofstream(path) << j.dump(2) << '\n';
    return path;
}

} // namespace neurorate::cli
