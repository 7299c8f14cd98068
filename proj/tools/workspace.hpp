#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fnroot/serialize.hpp"

namespace fnroot::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kMissingInput = 2, kFormatError = 3, kStageOrder = 4 };

/// Aborts a command with a specific exit code.
class CliError : public std::runtime_error {
public:
    CliError(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const { return code_; }

private:
    ExitCode code_;
};

inline constexpr int kStoreFormatVersion = 1;

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

/// Exclusive writer lock, released on destruction.
class WorkspaceLock {
public:
    explicit WorkspaceLock(const std::filesystem::path& root);
    ~WorkspaceLock();
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    std::filesystem::path path_;
};

/// Stage names used in the manifest.
namespace stage {
inline const std::string kPackets = "packets";
inline const std::string kFlows = "flows";
inline const std::string kMap = "map";
inline const std::string kClassify = "classify";
inline const std::string kReport = "report";
inline std::string alerts(const std::string& label) { return "alerts:" + label; }
}  // namespace stage

class Workspace {
public:
    explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }
    bool initialized() const;

    /// Creates the directory and an empty manifest; keeps an existing one.
    void create();
    /// Loads the manifest; exit 4 when the workspace was never initialized.
    void load();
    void save();

    Json& manifest() { return manifest_; }
    const Json& manifest() const { return manifest_; }

    bool complete(const std::string& name) const;
    /// Exit 4 naming `name` unless it is complete.
    void require(const std::string& name) const;
    const Json& stage_info(const std::string& name) const;
    void mark_complete(const std::string& name, Json info);
    void invalidate(const std::string& name);
    void invalidate_all();
    /// Marks every stage that consumes `name` incomplete.
    void invalidate_downstream(const std::string& name);
    std::vector<std::string> alert_labels(bool complete_only) const;

    /// Versioned line-oriented store: one header object, then one record per line.
    void write_store(const std::string& relative, const std::string& kind, const std::vector<Json>& records) const;
    std::vector<Json> read_store(const std::string& relative, const std::string& kind) const;
    void write_json(const std::string& relative, const Json& value) const;
    Json read_json(const std::string& relative) const;
    void write_text(const std::string& relative, const std::string& text) const;

private:
    std::filesystem::path root_;
    Json manifest_;
};

}  // namespace fnroot::cli
