#include "util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eslcli {

using nlohmann::json;

std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open '" + path.string() + "'");
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<std::filesystem::path> list_maps(const std::filesystem::path& dir_or_file,
                                             const std::string& extension) {
    namespace fs = std::filesystem;
    std::vector<fs::path> out;
    if (fs::is_regular_file(dir_or_file)) {
        out.push_back(dir_or_file);
        return out;
    }
    if (!fs::is_directory(dir_or_file)) {
        throw IoFailure("no such file or directory: '" +
                                 dir_or_file.string() + "'");
    }
    for (const auto& entry : fs::directory_iterator(dir_or_file)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) {
        throw IoFailure("no " + extension + " files under '" +
                                 dir_or_file.string() + "'");
    }
    return out;
}

void Provenance::add_input(const std::filesystem::path& path) {
    input_hashes[path.string()] = hex64(fnv1a64_file(path));
}

void Provenance::add_inputs(const std::vector<std::filesystem::path>& paths) {
    for (const auto& p : paths) add_input(p);
}

std::string Provenance::config_hash() const {
    json hashed;
    hashed["command"] = command;
    hashed["config"] = config;
    hashed["inputs"] = input_hashes;
    const std::string canonical = hashed.dump();
    return hex64(fnv1a64(canonical.data(), canonical.size()));
}

json Provenance::to_json() const {
    json j;
    j["tool"] = "eslkit";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["config"] = config;
    j["inputs"] = input_hashes;
    j["config_hash"] = config_hash();
    return j;
}

bool begin_run(const Provenance& prov, const std::filesystem::path& out_dir,
               bool force) {
    namespace fs = std::filesystem;
    const fs::path marker = out_dir / "provenance.json";
    if (!force && fs::exists(marker)) {
        std::ifstream in(marker);
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            const json previous = json::parse(ss.str());
            if (previous.value("config_hash", std::string()) == prov.config_hash()) {
                std::fprintf(stderr,
                             "[eslkit] %s: output up to date (config hash %s), "
                             "skipping; use --force to rerun\n",
                             prov.command.c_str(), prov.config_hash().c_str());
                return false;
            }
        } catch (const json::exception&) {
            // unreadable marker: treat as stale and rerun
        }
    }
    fs::create_directories(out_dir);
    return true;
}

void finish_run(const Provenance& prov, const std::filesystem::path& out_dir) {
    write_text_file(out_dir / "provenance.json", prov.to_json().dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw IoFailure("cannot open '" + path.string() + "' for writing");
    }
    out << text;
}

}  // namespace eslcli
