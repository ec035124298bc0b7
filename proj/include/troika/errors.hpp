#pragma once

#include <stdexcept>
#include <string>

namespace troika {

/// Base class for all troika errors. Subtypes exist so callers (and the CLI
/// exit-code mapping) can distinguish failure classes without string matching.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Problem identifier failed the [A-Za-z0-9_-]+ safety check.
class UnsafeIdentifier : public Error {
public:
    explicit UnsafeIdentifier(const std::string& id)
        : Error("unsafe problem identifier: '" + id + "' (allowed: [A-Za-z0-9_-]+)") {}
};

/// A new run would land on an existing workspace that is not resumable.
class WorkspaceCollision : public Error {
public:
    explicit WorkspaceCollision(const std::string& path)
        : Error("workspace already exists and is not a fresh target: " + path) {}
};

/// Another writer holds the workspace lock.
class WorkspaceLocked : public Error {
public:
    explicit WorkspaceLocked(const std::string& path)
        : Error("workspace is locked by another writer: " + path) {}
};

/// resume requested but the machine mirror is missing or unreadable.
class ResumeImpossible : public Error {
public:
    explicit ResumeImpossible(const std::string& why) : Error("resume impossible: " + why) {}
};

/// A scripted backend saw a request that does not match the next script entry,
/// or ran out of entries. The message names the first differing field.
class ScriptDivergence : public Error {
public:
    explicit ScriptDivergence(const std::string& why) : Error("script divergence: " + why) {}
};

/// Config file or profile file could not be parsed / failed validation.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& why) : Error("config error: " + why) {}
};

/// Skill name not present in the registry directory.
class UnknownSkill : public Error {
public:
    explicit UnknownSkill(const std::string& name) : Error("unknown skill: " + name) {}
};

/// Process backend could not spawn or control the external agent process.
class SpawnError : public Error {
public:
    explicit SpawnError(const std::string& why) : Error("agent process error: " + why) {}
};

/// An internal consistency precondition was violated; indicates a bug, not
/// bad input. Runs abort with a diagnostic rather than limping on.
class InternalError : public Error {
public:
    explicit InternalError(const std::string& why) : Error("internal error: " + why) {}
};

} // namespace troika
