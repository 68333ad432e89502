#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "de/channel.hpp"
#include "de/datablock.hpp"
#include "de/modules.hpp"

namespace de {

enum class ChannelState { Boot, Steady, Offline, Error };

[[nodiscard]] std::string_view to_string(ChannelState state) noexcept;
[[nodiscard]] ChannelState channel_state_from_string(std::string_view text);

struct ChannelStatus {
    std::string channel_id;
    ChannelState state = ChannelState::Boot;
    std::int64_t cycle_id = 0;
    std::optional<std::string> last_error;

    bool operator==(const ChannelStatus&) const = default;
};

/// Simulated clock. Monotone; only the scheduler moves it.
class Clock {
public:
    explicit Clock(SimTime start = 0) : now_(start) {}
    [[nodiscard]] SimTime now() const noexcept { return now_; }
    void advance_to(SimTime t);

private:
    SimTime now_;
};

struct ChannelModules {
    std::map<std::string, std::unique_ptr<Source>> sources;
    std::map<std::string, std::unique_ptr<Transform>> transforms;
    std::map<std::string, std::unique_ptr<Publisher>> publishers;
};

struct ChannelOptions {
    /// Immediate retries after a failed source fetch before the channel errors.
    int source_retry_cap = 3;
};

/// An assembled, runnable Decision Channel and its lifecycle state.
class Channel {
public:
    /// Throws de::Error when the spec has violations or a module instance is
    /// missing.
    Channel(ChannelSpec spec, ChannelModules modules, ChannelOptions options = {});

    [[nodiscard]] const ChannelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const ChannelStatus& status() const noexcept { return status_; }
    [[nodiscard]] const std::vector<std::string>& transform_sequence() const noexcept { return order_; }

    /// Operator stop: any state -> offline.
    void stop();

private:
    friend struct CycleRunner;

    ChannelSpec spec_;
    ChannelModules modules_;
    ChannelOptions options_;
    std::vector<std::string> order_;
    ChannelStatus status_;
    std::map<std::string, SimTime> next_due_;
};

enum class CycleOutcome { Completed, Aborted, Error };

[[nodiscard]] std::string_view to_string(CycleOutcome outcome) noexcept;

struct WrittenProduct {
    std::string name;
    ProductHeader header;
    std::string digest;
};

struct ConsumedProduct {
    std::string product;
    std::int64_t generation = 0;
    std::string digest;

    bool operator==(const ConsumedProduct&) const = default;
};

struct PublisherReport {
    std::string publisher;
    PublishOutcome outcome;
};

struct CycleReport {
    std::string channel_id;
    std::int64_t cycle_id = 0;
    SimTime sim_time_s = 0;
    CycleOutcome outcome = CycleOutcome::Completed;
    ChannelState state_after = ChannelState::Boot;
    std::vector<WrittenProduct> written;
    /// Products visible at the end of the cycle (what facts and publishers saw).
    DataBlockSnapshot final_snapshot;
    EvaluationResult evaluation;
    std::vector<PublisherReport> publishers;
    std::vector<Incident> incidents;

    [[nodiscard]] std::vector<ConsumedProduct> consumed() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// One gather -> transform -> infer -> publish pass. Requires state boot or
/// steady. Source exhaustion moves the channel to error; a transform failure
/// or missing input aborts the cycle without publishing.
CycleReport run_cycle(Channel& channel, const Clock& clock, DataBlock& datablock);

struct ScheduleHooks {
    /// Called after the clock moves, before any cycle at that instant.
    std::function<void(SimTime)> on_advance;
    std::function<void(const CycleReport&)> on_report;
    /// Polled between steps; true ends the schedule early.
    std::function<bool()> should_stop;
};

/// Runs up to `n_cycles` cycles per channel, each channel on its own period,
/// in channel order at equal instants. A channel leaving boot/steady stops
/// being scheduled; the others carry on.
void schedule(std::span<Channel* const> channels, Clock& clock, DataBlock& datablock, std::int64_t n_cycles,
              const ScheduleHooks& hooks = {});

}  // namespace de
