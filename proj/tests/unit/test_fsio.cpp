#include <doctest.h>

#include <filesystem>

#include "troika/errors.hpp"
#include "troika/fsio.hpp"

using namespace troika;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
    fs::path p = fs::temp_directory_path() / (std::string("troika-fsio-") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("atomic_write replaces content and leaves no temp files") {
    fs::path dir = fresh_dir("atomic");
    fs::path f = dir / "a.txt";
    fsio::atomic_write(f, "one");
    fsio::atomic_write(f, "two");
    CHECK(fsio::read_file(f) == "two");
    int files = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        (void)e;
        ++files;
    }
    CHECK(files == 1);
    fs::remove_all(dir);
}

TEST_CASE("a failed temp write leaves the previous content intact") {
    fs::path dir = fresh_dir("fault");
    fs::path f = dir / "a.txt";
    fsio::atomic_write(f, "stable");

    auto throwing_write = [](const fs::path&, const std::string&) {
        throw Error("injected");
    };
    auto no_rename = [](const fs::path&, const fs::path&) { FAIL("rename after failed write"); };
    CHECK_THROWS_AS(fsio::atomic_write_hooked(f, "torn", throwing_write, no_rename), Error);
    CHECK(fsio::read_file(f) == "stable");
    fs::remove_all(dir);
}

TEST_CASE("append creates and extends") {
    fs::path dir = fresh_dir("append");
    fs::path f = dir / "log";
    fsio::append(f, "a\n");
    fsio::append(f, "b\n");
    CHECK(fsio::read_file(f) == "a\nb\n");
    fs::remove_all(dir);
}

TEST_CASE("read_file on a missing path throws; retry_once returns nullopt") {
    fs::path missing = fs::temp_directory_path() / "troika-fsio-none" / "gone.txt";
    CHECK_THROWS_AS(fsio::read_file(missing), Error);
    CHECK_FALSE(fsio::read_file_retry_once(missing).has_value());
}

TEST_CASE("read_file round-trips binary content") {
    fs::path dir = fresh_dir("binary");
    std::string blob;
    for (int i = 0; i < 256; ++i) blob.push_back(static_cast<char>(i));
    fsio::atomic_write(dir / "blob", blob);
    CHECK(fsio::read_file(dir / "blob") == blob);
    fs::remove_all(dir);
}
