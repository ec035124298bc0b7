#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace troika::fsio {

/// Write hook used by persistence. Tests inject a throwing hook to prove that
/// a crash at any single write leaves either the old or the new state on
/// disk, never a torn hybrid. The default hook performs the real write.
using WriteFn = std::function<void(const std::filesystem::path&, const std::string&)>;

/// Write `content` to `path` via a temp file in the same directory followed
/// by an atomic rename.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// As above but with the two raw writes (temp-file write, rename) routed
/// through `raw_write` / `raw_rename` so tests can fault-inject.
void atomic_write_hooked(const std::filesystem::path& path, const std::string& content,
                         const WriteFn& raw_write,
                         const std::function<void(const std::filesystem::path&,
                                                  const std::filesystem::path&)>& raw_rename);

/// Plain append (event log). Creates the file if absent.
void append(const std::filesystem::path& path, const std::string& content);

/// Whole-file read; throws troika::Error when the file cannot be read.
std::string read_file(const std::filesystem::path& path);

/// Whole-file read that tolerates catching a writer mid-rename by retrying
/// once after a short pause. Returns nullopt when the file is still absent
/// after the retry.
std::optional<std::string> read_file_retry_once(const std::filesystem::path& path);

} // namespace troika::fsio
