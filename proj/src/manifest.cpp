#include "ebmine/manifest.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ebmine {

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path + " for digest");
    std::uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[h & 0xf];
        h >>= 4;
    }
    return out;
}

void write_manifest(const Manifest& m, const std::string& primary_output) {
    nlohmann::ordered_json j;
    j["tool_version"] = kToolVersion;
    j["subcommand"] = m.subcommand;
    j["config"] = nlohmann::ordered_json::parse(m.config_json);
    auto digest_list = [](const std::vector<std::string>& paths) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& p : paths) arr.push_back({{"path", p}, {"digest", file_digest(p)}});
        return arr;
    };
    j["inputs"] = digest_list(m.inputs);
    j["outputs"] = digest_list(m.outputs);
    std::string path = primary_output + ".manifest.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

} // namespace ebmine
