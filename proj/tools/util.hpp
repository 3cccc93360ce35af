#pragma once

#include <cstdint>
#include <stdexcept>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace eslcli {

/// Thrown by tool-level code for missing/unreadable/unwritable files;
/// mapped to the I/O exit code alongside esl::MapIoError.
class IoFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Exit codes, sysexits-style: usage 64, bad data 65, divergence 70,
// I/O failure 74.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitData = 65;
inline constexpr int kExitDivergence = 70;
inline constexpr int kExitIo = 74;

inline constexpr const char* kToolVersion = "0.1.0";

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

/// Sorted listing of regular files in `dir` with the given extension
/// (".segp", ".segl", ...). A single-file path returns itself.
std::vector<std::filesystem::path> list_maps(const std::filesystem::path& dir_or_file,
                                             const std::string& extension);

/// Provenance sidecar: effective config, tool version, seed, input
/// hashes, and the config hash that names this run.
struct Provenance {
    std::string command;
    nlohmann::json config;
    nlohmann::json input_hashes = nlohmann::json::object();

    void add_input(const std::filesystem::path& path);
    void add_inputs(const std::vector<std::filesystem::path>& paths);
    std::string config_hash() const;
    nlohmann::json to_json() const;
};

/// Writes provenance.json under out_dir. Returns false (skip) when a
/// previous run with the same config hash already completed there and
/// force is not set.
bool begin_run(const Provenance& prov, const std::filesystem::path& out_dir,
               bool force);
void finish_run(const Provenance& prov, const std::filesystem::path& out_dir);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace eslcli
