#include "workspace.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace fnroot::cli {

namespace fs = std::filesystem;

namespace {

const char* kManifest = "manifest.json";
const char* kLockFile = "workspace.lock";

std::string hex(const unsigned char* data, unsigned n) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < n; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xF]);
    }
    return out;
}

// Writes to a sibling temp file and renames, so readers never see half a store.
void atomic_write(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &n, EVP_sha256(), nullptr);
    return hex(md, n);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError(kMissingInput, "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

WorkspaceLock::WorkspaceLock(const fs::path& root) : path_(root / kLockFile) {
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw CliError(kStageOrder, "workspace is locked by another command (" + path_.string() +
                                            "); remove the file if no command is running");
        throw CliError(kMissingInput, "cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

WorkspaceLock::~WorkspaceLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

bool Workspace::initialized() const { return fs::exists(root_ / kManifest); }

void Workspace::create() {
    fs::create_directories(root_);
    if (initialized()) {
        load();
        return;
    }
    manifest_ = {{"format_version", kStoreFormatVersion}, {"stages", Json::object()}};
    save();
}

void Workspace::load() {
    if (!initialized())
        throw CliError(kStageOrder, "workspace " + root_.string() + " is not initialized; run 'init' first");
    try {
        manifest_ = Json::parse(read_file(root_ / kManifest));
    } catch (const Json::exception& e) {
        throw CliError(kFormatError, "corrupt manifest: " + std::string(e.what()));
    }
    if (manifest_.value("format_version", 0) != kStoreFormatVersion)
        throw CliError(kFormatError, "unsupported workspace format version");
}

void Workspace::save() { atomic_write(root_ / kManifest, manifest_.dump(2) + "\n"); }

bool Workspace::complete(const std::string& name) const {
    const auto& stages = manifest_.at("stages");
    auto it = stages.find(name);
    return it != stages.end() && it->value("complete", false);
}

void Workspace::require(const std::string& name) const {
    if (!complete(name)) throw CliError(kStageOrder, "prerequisite stage '" + name + "' is not complete");
}

const Json& Workspace::stage_info(const std::string& name) const { return manifest_.at("stages").at(name); }

void Workspace::mark_complete(const std::string& name, Json info) {
    info["complete"] = true;
    manifest_["stages"][name] = std::move(info);
}

void Workspace::invalidate(const std::string& name) {
    auto& stages = manifest_["stages"];
    if (stages.contains(name)) stages[name]["complete"] = false;
}

void Workspace::invalidate_all() {
    for (auto& [name, info] : manifest_["stages"].items()) info["complete"] = false;
}

void Workspace::invalidate_downstream(const std::string& name) {
    std::vector<std::string> targets;
    if (name == stage::kPackets || name == stage::kFlows || name.rfind("alerts:", 0) == 0)
        targets = {stage::kMap, stage::kClassify, stage::kReport};
    else if (name == stage::kMap)
        targets = {stage::kClassify, stage::kReport};
    else if (name == stage::kClassify)
        targets = {stage::kReport};
    // Flows derived from packets go stale with them.
    if (name == stage::kPackets && manifest_["stages"].contains(stage::kFlows) &&
        manifest_["stages"][stage::kFlows].value("source", "") == "derived")
        targets.push_back(stage::kFlows);
    for (const auto& t : targets) invalidate(t);
}

std::vector<std::string> Workspace::alert_labels(bool complete_only) const {
    std::vector<std::string> out;
    for (const auto& [name, info] : manifest_.at("stages").items()) {
        if (name.rfind("alerts:", 0) != 0) continue;
        if (complete_only && !info.value("complete", false)) continue;
        out.push_back(name.substr(7));
    }
    return out;  // object keys iterate sorted
}

void Workspace::write_store(const std::string& relative, const std::string& kind,
                            const std::vector<Json>& records) const {
    std::string content =
        Json{{"store", kind}, {"format_version", kStoreFormatVersion}, {"records", records.size()}}.dump() + "\n";
    for (const auto& r : records) content += r.dump() + "\n";
    atomic_write(root_ / relative, content);
}

std::vector<Json> Workspace::read_store(const std::string& relative, const std::string& kind) const {
    std::istringstream in(read_file(root_ / relative));
    std::string line;
    if (!std::getline(in, line)) throw CliError(kFormatError, "empty store " + relative);
    std::vector<Json> out;
    try {
        auto header = Json::parse(line);
        if (header.value("store", "") != kind || header.value("format_version", 0) != kStoreFormatVersion)
            throw CliError(kFormatError, "store " + relative + " has an unexpected header");
        auto expected = header.at("records").get<std::size_t>();
        while (std::getline(in, line)) out.push_back(Json::parse(line));
        if (out.size() != expected) throw CliError(kFormatError, "store " + relative + " is truncated");
    } catch (const Json::exception& e) {
        throw CliError(kFormatError, "corrupt store " + relative + ": " + e.what());
    }
    return out;
}

void Workspace::write_json(const std::string& relative, const Json& value) const {
    atomic_write(root_ / relative, value.dump(2) + "\n");
}

Json Workspace::read_json(const std::string& relative) const {
    try {
        return Json::parse(read_file(root_ / relative));
    } catch (const Json::exception& e) {
        throw CliError(kFormatError, "corrupt file " + relative + ": " + e.what());
    }
}

void Workspace::write_text(const std::string& relative, const std::string& text) const {
    atomic_write(root_ / relative, text);
}

}  // namespace fnroot::cli
