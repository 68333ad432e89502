#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "de/config.hpp"
#include "de/provisioning.hpp"
#include "de/provisioning_modules.hpp"
#include "de/request_record.hpp"

namespace de::sim {

/// price(t) = base * (1 + amplitude * sin(2*pi*t/period) + jitter * u(t)),
/// clamped at zero, with u(t) in [-1, 1] drawn from the world seed.
struct PriceProcess {
    double base_price = 0.0;
    double amplitude = 0.0;
    SimTime period_s = 3600;
    double jitter = 0.0;

    [[nodiscard]] double at(SimTime t, double noise) const noexcept;
};

/// Counter-based uniform draw in [-1, 1]: a pure function of (seed, stream, t),
/// so draws replay identically whatever order they are taken in.
[[nodiscard]] double unit_noise(std::uint64_t seed, std::string_view stream, SimTime t);

/// [start_s, end_s); no end means until the end of the run.
struct Window {
    SimTime start_s = 0;
    std::optional<SimTime> end_s;

    [[nodiscard]] bool contains(SimTime t) const noexcept { return t >= start_s && (!end_s || t < *end_s); }
    bool operator==(const Window&) const = default;
};

struct ProviderScript {
    /// Static description; price, occupancy, state and allocation are filled
    /// in at fetch time.
    provisioning::ResourceEntry entry;
    PriceProcess price;
    double allocation_core_hours = 0.0;
    std::vector<Window> downtime;
};

/// Targets: "job_queue", "sink", "accounting". With `failures` set only that
/// many calls inside the window fail.
struct OutageScript {
    std::string target;
    Window window;
    std::optional<int> failures;
};

struct Scenario {
    std::optional<std::uint64_t> seed;
    std::vector<provisioning::Job> jobs;
    std::vector<ProviderScript> providers;
    std::vector<OutageScript> outages;
};

[[nodiscard]] Scenario scenario_from_json(const nlohmann::json& document);
[[nodiscard]] Scenario parse_scenario(std::string_view text);
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);

struct LedgerEntry {
    std::string channel_id;
    RequestRecord record;
    std::int64_t core_seconds = 0;
};

struct JobCounts {
    std::int64_t idle = 0;
    std::int64_t running = 0;
    std::int64_t done = 0;
};

/// Deterministic stand-in for the external systems: job queue, providers,
/// accounting, and the provisioner sink that starts jobs on requested slots.
class SimWorld : public provisioning::RequestSink {
public:
    SimWorld(Scenario scenario, std::uint64_t seed);

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    /// Completes running jobs whose walltime has elapsed by `now`.
    void advance_to(SimTime now);

    /// Throws ScriptedOutage.
    [[nodiscard]] Table fetch_jobs(SimTime now);
    /// Throws de::Error for an unknown provider.
    [[nodiscard]] Record fetch_provider(const std::string& provider, SimTime now) const;
    /// {spent, acknowledged_requests}. Throws ScriptedOutage.
    [[nodiscard]] Record fetch_accounting(SimTime now);

    [[nodiscard]] double price_at(const std::string& provider, SimTime t) const;

    std::vector<provisioning::SinkAck> accept(const std::string& channel_id, std::int64_t cycle_id,
                                              std::span<const provisioning::ResourceRequest> requests,
                                              const std::vector<std::string>& fired_rules, SimTime now) override;

    [[nodiscard]] const std::vector<LedgerEntry>& ledger() const noexcept { return ledger_; }
    /// Ledger as line-delimited wire records, one per acknowledged request.
    [[nodiscard]] std::string ledger_text() const;
    /// Sum of ledger projected costs, in ledger order.
    [[nodiscard]] double spent() const noexcept;

    [[nodiscard]] const std::vector<provisioning::Job>& jobs() const noexcept { return jobs_; }
    [[nodiscard]] JobCounts job_counts() const noexcept;
    [[nodiscard]] std::int64_t fulfilled_slots(const std::string& entry_id) const;
    [[nodiscard]] std::int64_t allocation_used_core_seconds(const std::string& entry_id) const;
    [[nodiscard]] std::int64_t allocation_total_core_seconds(const std::string& entry_id) const;
    [[nodiscard]] const std::vector<ProviderScript>& providers() const noexcept { return providers_; }

private:
    struct Placement {
        std::string entry_id;
        SimTime ends_at = 0;
    };

    bool outage_hits(const std::string& target, SimTime now);
    const ProviderScript& provider_named(const std::string& provider) const;
    const ProviderScript& provider_for_entry(const std::string& entry_id) const;
    [[nodiscard]] provisioning::ResourceEntry current_entry(const ProviderScript& script, SimTime now) const;

    std::uint64_t seed_;
    std::vector<provisioning::Job> jobs_;
    std::vector<std::optional<Placement>> placements_;
    std::vector<ProviderScript> providers_;
    std::vector<OutageScript> outages_;
    std::vector<int> outage_failures_;
    std::vector<LedgerEntry> ledger_;
    std::set<std::tuple<std::string, std::int64_t, std::string>> delivered_;
    std::map<std::string, std::int64_t> fulfilled_;
    std::map<std::string, std::int64_t> allocation_used_;
    SimTime now_ = 0;
};

/// Registers the simulated sources:
///   sim_job_queue   -> table of jobs (one product)
///   sim_provider    -> record for params.provider (one product)
///   sim_accounting  -> record {spent, acknowledged_requests} (one product)
void register_simulated_modules(ModuleRegistry& registry, SimWorld& world);

}  // namespace de::sim
