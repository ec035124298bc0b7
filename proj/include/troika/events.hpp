#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace troika {

enum class EventKind {
    PhaseEnter,
    Dispatch,
    VerdictParsed,
    ChallengeRound,
    Stalemate,
    TraceBack,
    ReplanProposed,
    ReplanDecided,
    Timeout,
    MetaIntervention,
    PureReasoningOn,
    SolutionAccepted,
    SolutionRejected,
    Aborted,
    Solved,
};

const char* event_kind_label(EventKind k);
std::optional<EventKind> event_kind_from_label(std::string_view label);

struct Event {
    std::string iso_time;
    EventKind kind = EventKind::PhaseEnter;
    std::string payload_json; ///< Compact single-line JSON object.

    bool operator==(const Event&) const = default;
};

/// `<iso-time> <Kind> <payload>` with a trailing newline.
std::string format_event_line(const Event& e);

/// Parse one log line; nullopt for blank or unparseable lines.
std::optional<Event> parse_event_line(std::string_view line);

/// Read every parseable event from a log file. `corrupt_lines` counts lines
/// that failed to parse so stats can flag partial logs.
std::vector<Event> read_event_log(const std::filesystem::path& path, int* corrupt_lines = nullptr);

/// Append-only event sink. Events buffer in memory and reach disk only when
/// flush() runs at a persistence checkpoint, so a crash between checkpoints
/// loses the unapplied transition's events together with its state changes.
class EventBuffer {
public:
    void emit(std::string iso_time, EventKind kind, std::string payload_json);
    void flush(const std::filesystem::path& log_path);
    const std::vector<Event>& pending() const { return pending_; }
    void clear() { pending_.clear(); }

private:
    std::vector<Event> pending_;
};

} // namespace troika
