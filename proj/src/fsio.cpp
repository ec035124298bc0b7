#include "troika/fsio.hpp"

#include <chrono>
#include <fstream>
#include <system_error>
#include <thread>

#include "troika/errors.hpp"

namespace fs = std::filesystem;

namespace troika::fsio {

namespace {

void write_whole_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for write: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("short write: " + path.string());
}

} // namespace

void atomic_write_hooked(const fs::path& path, const std::string& content,
                         const WriteFn& raw_write,
                         const std::function<void(const fs::path&, const fs::path&)>& raw_rename) {
    fs::path tmp = path;
    tmp += ".tmp";
    raw_write(tmp, content);
    raw_rename(tmp, path);
}

void atomic_write(const fs::path& path, const std::string& content) {
    atomic_write_hooked(
        path, content, [](const fs::path& p, const std::string& c) { write_whole_file(p, c); },
        [](const fs::path& from, const fs::path& to) { fs::rename(from, to); });
}

void append(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot open for append: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("short append: " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open for read: " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

std::optional<std::string> read_file_retry_once(const fs::path& path) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        {
            std::ifstream in(path, std::ios::binary);
            if (in) {
                return std::string((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
            }
        }
        if (attempt == 0) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return std::nullopt;
}

} // namespace troika::fsio
