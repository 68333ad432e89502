#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "de/value.hpp"

namespace de::provisioning {

enum class JobState { Idle, Running, Done };
enum class ProviderKind { Grid, Cloud, Hpc };
enum class EntryState { Up, Down };

[[nodiscard]] std::string_view to_string(JobState state) noexcept;
[[nodiscard]] std::string_view to_string(ProviderKind kind) noexcept;
[[nodiscard]] std::string_view to_string(EntryState state) noexcept;
[[nodiscard]] JobState job_state_from_string(std::string_view text);
[[nodiscard]] ProviderKind provider_kind_from_string(std::string_view text);
[[nodiscard]] EntryState entry_state_from_string(std::string_view text);

struct Job {
    std::string job_id;
    std::int64_t cores = 1;
    std::int64_t memory_mb = 1;
    SimTime max_walltime_s = 1;
    std::optional<std::vector<std::string>> site_whitelist;
    JobState state = JobState::Idle;

    bool operator==(const Job&) const = default;
};

/// A provisionable resource class at one provider.
struct ResourceEntry {
    std::string entry_id;
    std::string provider;
    ProviderKind provider_kind = ProviderKind::Cloud;
    std::int64_t slot_cores = 1;
    std::int64_t slot_memory_mb = 1;
    double price_per_core_hour = 0.0;
    double performance_score = 1.0;
    double occupancy = 0.0;
    EntryState state = EntryState::Up;
    std::int64_t max_slots = 1;
    std::int64_t slots_in_use = 0;
    /// Meaningful for hpc entries only; other kinds are not allocation-metered.
    double allocation_core_hours_remaining = 0.0;

    [[nodiscard]] std::int64_t free_slots() const noexcept;
    bool operator==(const ResourceEntry&) const = default;
};

struct FigureOfMerit {
    std::string entry_id;
    double value = 0.0;

    bool operator==(const FigureOfMerit&) const = default;
};

/// Spend limits. The remaining budget is `budget_limit - budget_spent`; the
/// two are kept apart so affordability is checked as `spent + cost <= limit`
/// with the same floating point sums an auditor recomputes from the ledger.
struct PolicyParams {
    double budget_limit = 0.0;
    double budget_spent = 0.0;
    std::int64_t per_entry_max_request = 1;
    SimTime expected_job_walltime_s = 3600;

    [[nodiscard]] double budget_remaining() const noexcept { return budget_limit - budget_spent; }
};

struct ResourceRequest {
    std::string entry_id;
    std::int64_t slots = 0;
    std::int64_t slot_cores = 1;
    double projected_cost = 0.0;
    double fom_value = 0.0;
    SimTime walltime_s = 0;

    [[nodiscard]] std::int64_t core_seconds() const noexcept { return slots * slot_cores * walltime_s; }
    bool operator==(const ResourceRequest&) const = default;
};

/// entry_id -> ids of idle jobs the entry can run, in job order. Every entry
/// passed in has a key, possibly with an empty list.
using Eligibility = std::map<std::string, std::vector<std::string>>;

[[nodiscard]] bool job_fits(const Job& job, const ResourceEntry& entry) noexcept;

[[nodiscard]] Eligibility match_eligibility(std::span<const Job> jobs, std::span<const ResourceEntry> entries);

/// (price / performance) * (1 + occupancy); lower is better.
[[nodiscard]] double figure_of_merit(const ResourceEntry& entry) noexcept;

/// Ascending by the exact value of the formula on the entry fields, ties by
/// entry_id. `value` carries the rounded figure.
[[nodiscard]] std::vector<FigureOfMerit> rank_by_fom(std::span<const ResourceEntry> entries);

/// slots * slot_cores * price * walltime / 3600, evaluated left to right.
[[nodiscard]] double projected_cost(std::int64_t slots, const ResourceEntry& entry, SimTime walltime_s) noexcept;

/// Core-seconds left on an hpc allocation, rounded to the nearest second.
[[nodiscard]] std::int64_t allocation_core_seconds(const ResourceEntry& entry) noexcept;

/// Greedy fill in ranked order. Per entry the request is the smallest of:
/// unserved demand, idle jobs eligible there, per_entry_max_request, free
/// slots, slots affordable within the budget and, for hpc, slots within the
/// allocation. Stops when demand or budget runs out.
[[nodiscard]] std::vector<ResourceRequest> generate_requests(std::span<const FigureOfMerit> ranked,
                                                             const Eligibility& eligibility,
                                                             std::span<const Job> jobs,
                                                             std::span<const ResourceEntry> entries,
                                                             const PolicyParams& policy);

// Product schema for the provisioning channel. Whitelists travel as a
// comma-separated string; an empty string means no whitelist.
[[nodiscard]] Record to_record(const Job& job);
[[nodiscard]] Job job_from_record(const Record& record);
[[nodiscard]] Table jobs_to_table(std::span<const Job> jobs);
[[nodiscard]] std::vector<Job> jobs_from_table(const Table& table);

[[nodiscard]] Record to_record(const ResourceEntry& entry);
[[nodiscard]] ResourceEntry entry_from_record(const Record& record);

[[nodiscard]] Record to_record(const ResourceRequest& request);
[[nodiscard]] ResourceRequest request_from_record(const Record& record);

}  // namespace de::provisioning
