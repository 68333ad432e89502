#include "de/provisioning.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/multiprecision/cpp_int.hpp>

#include "de/errors.hpp"

namespace de::provisioning {

std::string_view to_string(JobState state) noexcept {
    switch (state) {
        case JobState::Idle: return "idle";
        case JobState::Running: return "running";
        case JobState::Done: return "done";
    }
    return "idle";
}

std::string_view to_string(ProviderKind kind) noexcept {
    switch (kind) {
        case ProviderKind::Grid: return "grid";
        case ProviderKind::Cloud: return "cloud";
        case ProviderKind::Hpc: return "hpc";
    }
    return "cloud";
}

std::string_view to_string(EntryState state) noexcept {
    return state == EntryState::Up ? "up" : "down";
}

JobState job_state_from_string(std::string_view text) {
    if (text == "idle") return JobState::Idle;
    if (text == "running") return JobState::Running;
    if (text == "done") return JobState::Done;
    throw Error("invalid job state '" + std::string(text) + "'");
}

ProviderKind provider_kind_from_string(std::string_view text) {
    if (text == "grid") return ProviderKind::Grid;
    if (text == "cloud") return ProviderKind::Cloud;
    if (text == "hpc") return ProviderKind::Hpc;
    throw Error("invalid provider kind '" + std::string(text) + "'");
}

EntryState entry_state_from_string(std::string_view text) {
    if (text == "up") return EntryState::Up;
    if (text == "down") return EntryState::Down;
    throw Error("invalid entry state '" + std::string(text) + "'");
}

std::int64_t ResourceEntry::free_slots() const noexcept {
    return std::max<std::int64_t>(0, max_slots - slots_in_use);
}

bool job_fits(const Job& job, const ResourceEntry& entry) noexcept {
    if (entry.state != EntryState::Up || job.cores > entry.slot_cores || job.memory_mb > entry.slot_memory_mb) {
        return false;
    }
    if (job.site_whitelist) {
        const auto& sites = *job.site_whitelist;
        return std::find(sites.begin(), sites.end(), entry.provider) != sites.end();
    }
    return true;
}

Eligibility match_eligibility(std::span<const Job> jobs, std::span<const ResourceEntry> entries) {
    Eligibility out;
    for (const auto& entry : entries) {
        auto& matched = out[entry.entry_id];
        for (const auto& job : jobs) {
            if (job.state == JobState::Idle && job_fits(job, entry)) {
                matched.push_back(job.job_id);
            }
        }
    }
    return out;
}

double figure_of_merit(const ResourceEntry& entry) noexcept {
    return (entry.price_per_core_hour / entry.performance_score) * (1.0 + entry.occupancy);
}

namespace {

using Rational = boost::multiprecision::cpp_rational;

// The formula evaluated without rounding. Rounded values can split entries
// that are tied in exact terms, and how they split depends on the price
// scale, so ordering uses the exact value.
Rational exact_fom(const ResourceEntry& entry) {
    return Rational(entry.price_per_core_hour) * (Rational(1) + Rational(entry.occupancy)) /
           Rational(entry.performance_score);
}

}  // namespace

std::vector<FigureOfMerit> rank_by_fom(std::span<const ResourceEntry> entries) {
    struct Keyed {
        Rational key;
        FigureOfMerit fom;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(entries.size());
    for (const auto& entry : entries) {
        keyed.push_back(Keyed{exact_fom(entry), FigureOfMerit{entry.entry_id, figure_of_merit(entry)}});
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        if (a.key != b.key) {
            return a.key < b.key;
        }
        return a.fom.entry_id < b.fom.entry_id;
    });
    std::vector<FigureOfMerit> out;
    out.reserve(keyed.size());
    for (auto& k : keyed) {
        out.push_back(std::move(k.fom));
    }
    return out;
}

double projected_cost(std::int64_t slots, const ResourceEntry& entry, SimTime walltime_s) noexcept {
    return static_cast<double>(slots) * static_cast<double>(entry.slot_cores) * entry.price_per_core_hour *
           static_cast<double>(walltime_s) / 3600.0;
}

std::int64_t allocation_core_seconds(const ResourceEntry& entry) noexcept {
    return std::max<std::int64_t>(0, std::llround(entry.allocation_core_hours_remaining * 3600.0));
}

std::vector<ResourceRequest> generate_requests(std::span<const FigureOfMerit> ranked, const Eligibility& eligibility,
                                               std::span<const Job> jobs, std::span<const ResourceEntry> entries,
                                               const PolicyParams& policy) {
    std::set<std::string> idle;
    for (const auto& job : jobs) {
        if (job.state == JobState::Idle) {
            idle.insert(job.job_id);
        }
    }
    auto idle_eligible = [&](const std::string& entry_id) {
        std::int64_t count = 0;
        if (auto it = eligibility.find(entry_id); it != eligibility.end()) {
            for (const auto& job_id : it->second) {
                count += idle.contains(job_id) ? 1 : 0;
            }
        }
        return count;
    };

    std::set<std::string> demand;
    for (const auto& fom : ranked) {
        if (auto it = eligibility.find(fom.entry_id); it != eligibility.end()) {
            for (const auto& job_id : it->second) {
                if (idle.contains(job_id)) {
                    demand.insert(job_id);
                }
            }
        }
    }
    auto unserved = static_cast<std::int64_t>(demand.size());

    const auto walltime = policy.expected_job_walltime_s;
    double spent = policy.budget_spent;
    std::vector<ResourceRequest> out;
    for (const auto& fom : ranked) {
        if (unserved <= 0 || spent >= policy.budget_limit) {
            break;
        }
        auto entry = std::find_if(entries.begin(), entries.end(),
                                  [&](const auto& e) { return e.entry_id == fom.entry_id; });
        if (entry == entries.end() || entry->state != EntryState::Up) {
            continue;
        }
        std::int64_t cap = std::min({unserved, idle_eligible(entry->entry_id), policy.per_entry_max_request,
                                     entry->free_slots()});
        if (entry->provider_kind == ProviderKind::Hpc) {
            cap = std::min(cap, allocation_core_seconds(*entry) / (entry->slot_cores * walltime));
        }
        if (cap <= 0) {
            continue;
        }

        auto fits = [&](std::int64_t k) { return spent + projected_cost(k, *entry, walltime) <= policy.budget_limit; };
        std::int64_t slots = cap;
        double unit = projected_cost(1, *entry, walltime);
        if (unit > 0.0) {
            // Floor estimate, then settle on the exact largest affordable count.
            double estimate = std::floor((policy.budget_limit - spent) / unit);
            slots = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::min(estimate, static_cast<double>(cap))), 0, cap);
            while (slots < cap && fits(slots + 1)) ++slots;
            while (slots > 0 && !fits(slots)) --slots;
        }
        if (slots <= 0) {
            continue;
        }

        ResourceRequest request;
        request.entry_id = entry->entry_id;
        request.slots = slots;
        request.slot_cores = entry->slot_cores;
        request.projected_cost = projected_cost(slots, *entry, walltime);
        request.fom_value = fom.value;
        request.walltime_s = walltime;
        spent += request.projected_cost;
        unserved -= slots;
        out.push_back(std::move(request));
    }
    return out;
}

namespace {

std::int64_t integer_field(const Record& record, std::string_view field) {
    double value = number_field(record, field);
    if (value != std::floor(value) || std::abs(value) > 9.0e15) {
        throw Error("field '" + std::string(field) + "' is not an integer");
    }
    return static_cast<std::int64_t>(value);
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& part : parts) {
        out += (out.empty() ? "" : ",") + part;
    }
    return out;
}

std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        out.push_back(text.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

double d(std::int64_t value) {
    return static_cast<double>(value);
}

}  // namespace

Record to_record(const Job& job) {
    return Record{{"job_id", job.job_id},
                  {"cores", d(job.cores)},
                  {"memory_mb", d(job.memory_mb)},
                  {"max_walltime_s", d(job.max_walltime_s)},
                  {"site_whitelist", job.site_whitelist ? join(*job.site_whitelist) : std::string()},
                  {"state", std::string(to_string(job.state))}};
}

Job job_from_record(const Record& record) {
    Job job;
    job.job_id = string_field(record, "job_id");
    job.cores = integer_field(record, "cores");
    job.memory_mb = integer_field(record, "memory_mb");
    job.max_walltime_s = integer_field(record, "max_walltime_s");
    if (const auto& sites = string_field(record, "site_whitelist"); !sites.empty()) {
        job.site_whitelist = split(sites);
    }
    job.state = job_state_from_string(string_field(record, "state"));
    return job;
}

Table jobs_to_table(std::span<const Job> jobs) {
    Table table;
    table.reserve(jobs.size());
    for (const auto& job : jobs) {
        table.push_back(to_record(job));
    }
    return table;
}

std::vector<Job> jobs_from_table(const Table& table) {
    std::vector<Job> jobs;
    jobs.reserve(table.size());
    for (const auto& row : table) {
        jobs.push_back(job_from_record(row));
    }
    return jobs;
}

Record to_record(const ResourceEntry& entry) {
    return Record{{"entry_id", entry.entry_id},
                  {"provider", entry.provider},
                  {"provider_kind", std::string(to_string(entry.provider_kind))},
                  {"slot_cores", d(entry.slot_cores)},
                  {"slot_memory_mb", d(entry.slot_memory_mb)},
                  {"price_per_core_hour", entry.price_per_core_hour},
                  {"performance_score", entry.performance_score},
                  {"occupancy", entry.occupancy},
                  {"state", std::string(to_string(entry.state))},
                  {"max_slots", d(entry.max_slots)},
                  {"slots_in_use", d(entry.slots_in_use)},
                  {"allocation_core_hours_remaining", entry.allocation_core_hours_remaining}};
}

ResourceEntry entry_from_record(const Record& record) {
    ResourceEntry entry;
    entry.entry_id = string_field(record, "entry_id");
    entry.provider = string_field(record, "provider");
    entry.provider_kind = provider_kind_from_string(string_field(record, "provider_kind"));
    entry.slot_cores = integer_field(record, "slot_cores");
    entry.slot_memory_mb = integer_field(record, "slot_memory_mb");
    entry.price_per_core_hour = number_field(record, "price_per_core_hour");
    entry.performance_score = number_field(record, "performance_score");
    entry.occupancy = number_field(record, "occupancy");
    entry.state = entry_state_from_string(string_field(record, "state"));
    entry.max_slots = integer_field(record, "max_slots");
    entry.slots_in_use = integer_field(record, "slots_in_use");
    entry.allocation_core_hours_remaining = number_field(record, "allocation_core_hours_remaining");
    return entry;
}

Record to_record(const ResourceRequest& request) {
    return Record{{"entry_id", request.entry_id},
                  {"slots", d(request.slots)},
                  {"slot_cores", d(request.slot_cores)},
                  {"projected_cost", request.projected_cost},
                  {"fom_value", request.fom_value},
                  {"walltime_s", d(request.walltime_s)}};
}

ResourceRequest request_from_record(const Record& record) {
    ResourceRequest request;
    request.entry_id = string_field(record, "entry_id");
    request.slots = integer_field(record, "slots");
    request.slot_cores = integer_field(record, "slot_cores");
    request.projected_cost = number_field(record, "projected_cost");
    request.fom_value = number_field(record, "fom_value");
    request.walltime_s = integer_field(record, "walltime_s");
    return request;
}

}  // namespace de::provisioning
