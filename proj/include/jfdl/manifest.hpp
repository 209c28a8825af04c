#ifndef JFDL_MANIFEST_HPP
#define JFDL_MANIFEST_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "jfdl/errors.hpp"
#include "jfdl/rng.hpp"

namespace jfdl {

inline constexpr const char* kVersion = "0.1.0";

/// FNV-1a 64 over the file bytes; good enough to detect any content drift
/// between reruns.
inline uint64_t file_checksum(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("checksum: cannot open " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof(buf));
        std::streamsize got = f.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

inline std::string checksum_hex(uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Provenance record of one CLI run: echoed config, code version, wall-clock
/// bounds and checksums of every produced file. Written atomically at run end.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::string started, finished;
    std::vector<std::pair<std::string, std::string>> outputs; // (relative path, checksum)

    static std::string now_utc() {
        auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    void add_output(const std::filesystem::path& out_dir, const std::string& rel) {
        outputs.emplace_back(rel, checksum_hex(file_checksum((out_dir / rel).string())));
    }

    void write(const std::filesystem::path& out_dir) const {
        auto esc = [](const std::string& s) {
            std::string r;
            for (char c : s) {
                if (c == '"' || c == '\\') r += '\\';
                r += c;
            }
            return r;
        };
        std::string tmp = (out_dir / ".manifest.tmp").string();
        {
            std::ofstream f(tmp);
            if (!f) throw ConfigError("cannot write manifest in " + out_dir.string());
            f << "{\n";
            f << "  \"command\": \"" << esc(command) << "\",\n";
            f << "  \"version\": \"" << kVersion << "\",\n";
            f << "  \"started\": \"" << started << "\",\n";
            f << "  \"finished\": \"" << finished << "\",\n";
            f << "  \"config\": {\n";
            size_t i = 0;
            for (const auto& [k, v] : config) {
                f << "    \"" << esc(k) << "\": \"" << esc(v) << "\"";
                f << (++i < config.size() ? ",\n" : "\n");
            }
            f << "  },\n";
            f << "  \"outputs\": {\n";
            for (size_t j = 0; j < outputs.size(); ++j) {
                f << "    \"" << esc(outputs[j].first) << "\": \"" << outputs[j].second << "\"";
                f << (j + 1 < outputs.size() ? ",\n" : "\n");
            }
            f << "  }\n}\n";
        }
        std::filesystem::rename(tmp, out_dir / "manifest.json");
    }
};

} // namespace jfdl

#endif
