#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <json.hpp>

#include "de/errors.hpp"
#include "de/runtime.hpp"

namespace de {

/// The log file could not be opened, written or read.
class LogIoError : public Error {
public:
    using Error::Error;
};

/// A payload as first consumed by a channel, kept so digests can be
/// recomputed from the log alone.
struct ProductDocument {
    std::string channel;
    std::string name;
    std::int64_t generation = 0;
    SimTime created_at = 0;
    SimTime expiration_at = 0;
    std::string producer;
    Payload payload;
    std::string digest;

    bool operator==(const ProductDocument&) const = default;
};

/// One decision cycle. Written for completed and aborted cycles; a cycle
/// ending in error leaves a StatusLine instead.
struct DecisionRecord {
    std::int64_t cycle_id = 0;
    std::string channel_id;
    SimTime sim_time_s = 0;
    std::string outcome = "completed";
    std::vector<ConsumedProduct> consumed;
    /// Declared facts and every derived fact: "true", "false" or "failed".
    std::map<std::string, std::string> fact_values;
    std::vector<std::string> fired_rules;
    std::vector<RequestRecord> requests;
    PublishStatus publish_status = PublishStatus::None;
    /// Acknowledged spend of this channel up to and including this cycle.
    double cumulative_spend = 0.0;
    std::vector<Incident> incidents;

    bool operator==(const DecisionRecord&) const = default;
};

struct StatusLine {
    std::string channel_id;
    ChannelState state = ChannelState::Boot;
    std::int64_t cycle_id = 0;
    std::optional<std::string> last_error;
    SimTime sim_time_s = 0;

    bool operator==(const StatusLine&) const = default;
};

using LogLine = std::variant<ProductDocument, DecisionRecord, StatusLine>;

/// One line of the log: compact JSON with sorted keys and a "kind" field.
[[nodiscard]] nlohmann::json to_json(const LogLine& line);
[[nodiscard]] LogLine log_line_from_json(const nlohmann::json& document);
[[nodiscard]] std::string log_line_text(const LogLine& line);

/// Append-only writer. Each line goes out in a single write followed by a
/// flush, so a crash leaves at most one truncated final line.
class DecisionLogWriter {
public:
    /// Refuses an existing non-empty file unless `overwrite` is set.
    DecisionLogWriter(const std::filesystem::path& path, bool overwrite);
    ~DecisionLogWriter();
    DecisionLogWriter(const DecisionLogWriter&) = delete;
    DecisionLogWriter& operator=(const DecisionLogWriter&) = delete;

    void append(const LogLine& line);

private:
    std::filesystem::path path_;
    std::FILE* file_ = nullptr;
};

/// Turns cycle reports into log lines. Tracks, per channel, which product
/// generations were already logged, the acknowledged spend, and the last
/// state written.
class DecisionRecorder {
public:
    [[nodiscard]] std::vector<LogLine> record(const CycleReport& report);
    /// Status lines for every channel whose state changed since its last one.
    [[nodiscard]] std::vector<LogLine> status_changes(std::span<Channel* const> channels, SimTime now);
    /// Final status line for every channel.
    [[nodiscard]] std::vector<LogLine> final_status(std::span<Channel* const> channels, SimTime now);

private:
    std::set<std::tuple<std::string, std::string, std::int64_t>> logged_;
    std::map<std::string, double> spend_;
    std::map<std::string, ChannelStatus> last_status_;
};

[[nodiscard]] PublishStatus cycle_publish_status(const CycleReport& report);

struct CorruptRecord {
    std::size_t line = 0;
    std::string message;
};

struct LogContents {
    std::vector<LogLine> lines;
    /// First unreadable line; nothing after it is returned.
    std::optional<CorruptRecord> corrupt;
};

/// Throws LogIoError when the file cannot be opened.
[[nodiscard]] LogContents read_log(const std::filesystem::path& path);

}  // namespace de
