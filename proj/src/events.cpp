#include "troika/events.hpp"

#include <fstream>

#include "troika/fsio.hpp"

namespace troika {

const char* event_kind_label(EventKind k) {
    switch (k) {
    case EventKind::PhaseEnter: return "PhaseEnter";
    case EventKind::Dispatch: return "Dispatch";
    case EventKind::VerdictParsed: return "VerdictParsed";
    case EventKind::ChallengeRound: return "ChallengeRound";
    case EventKind::Stalemate: return "Stalemate";
    case EventKind::TraceBack: return "TraceBack";
    case EventKind::ReplanProposed: return "ReplanProposed";
    case EventKind::ReplanDecided: return "ReplanDecided";
    case EventKind::Timeout: return "Timeout";
    case EventKind::MetaIntervention: return "MetaIntervention";
    case EventKind::PureReasoningOn: return "PureReasoningOn";
    case EventKind::SolutionAccepted: return "SolutionAccepted";
    case EventKind::SolutionRejected: return "SolutionRejected";
    case EventKind::Aborted: return "Aborted";
    case EventKind::Solved: return "Solved";
    }
    return "PhaseEnter";
}

std::optional<EventKind> event_kind_from_label(std::string_view label) {
    static constexpr EventKind all[] = {
        EventKind::PhaseEnter,   EventKind::Dispatch,     EventKind::VerdictParsed,
        EventKind::ChallengeRound, EventKind::Stalemate,  EventKind::TraceBack,
        EventKind::ReplanProposed, EventKind::ReplanDecided, EventKind::Timeout,
        EventKind::MetaIntervention, EventKind::PureReasoningOn, EventKind::SolutionAccepted,
        EventKind::SolutionRejected, EventKind::Aborted,  EventKind::Solved,
    };
    for (EventKind k : all)
        if (label == event_kind_label(k)) return k;
    return std::nullopt;
}

std::string format_event_line(const Event& e) {
    std::string line = e.iso_time;
    line += ' ';
    line += event_kind_label(e.kind);
    line += ' ';
    line += e.payload_json.empty() ? "{}" : e.payload_json;
    line += '\n';
    return line;
}

std::optional<Event> parse_event_line(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
    if (line.empty()) return std::nullopt;
    size_t sp1 = line.find(' ');
    if (sp1 == std::string_view::npos) return std::nullopt;
    size_t sp2 = line.find(' ', sp1 + 1);
    if (sp2 == std::string_view::npos) return std::nullopt;
    auto kind = event_kind_from_label(line.substr(sp1 + 1, sp2 - sp1 - 1));
    if (!kind) return std::nullopt;
    Event e;
    e.iso_time = std::string(line.substr(0, sp1));
    e.kind = *kind;
    e.payload_json = std::string(line.substr(sp2 + 1));
    if (e.payload_json.empty() || e.payload_json.front() != '{') return std::nullopt;
    return e;
}

std::vector<Event> read_event_log(const std::filesystem::path& path, int* corrupt_lines) {
    std::vector<Event> events;
    if (corrupt_lines) *corrupt_lines = 0;
    std::ifstream in(path);
    if (!in) return events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (auto e = parse_event_line(line)) {
            events.push_back(std::move(*e));
        } else if (corrupt_lines) {
            ++*corrupt_lines;
        }
    }
    return events;
}

void EventBuffer::emit(std::string iso_time, EventKind kind, std::string payload_json) {
    pending_.push_back(Event{std::move(iso_time), kind, std::move(payload_json)});
}

void EventBuffer::flush(const std::filesystem::path& log_path) {
    if (pending_.empty()) return;
    std::string chunk;
    for (const Event& e : pending_) chunk += format_event_line(e);
    fsio::append(log_path, chunk);
    pending_.clear();
}

} // namespace troika
