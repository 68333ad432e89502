#include "de/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "de/errors.hpp"

namespace de::sim {

using provisioning::EntryState;
using provisioning::Job;
using provisioning::JobState;
using provisioning::ProviderKind;
using provisioning::ResourceEntry;

double PriceProcess::at(SimTime t, double noise) const noexcept {
    double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(period_s);
    double price = base_price * (1.0 + amplitude * std::sin(phase) + jitter * noise);
    return std::max(0.0, price);
}

double unit_noise(std::uint64_t seed, std::string_view stream, SimTime t) {
    std::vector<std::uint32_t> key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                   static_cast<std::uint32_t>(static_cast<std::uint64_t>(t)),
                                   static_cast<std::uint32_t>(static_cast<std::uint64_t>(t) >> 32)};
    for (unsigned char c : stream) {
        key.push_back(c);
    }
    std::seed_seq sequence(key.begin(), key.end());
    std::mt19937_64 engine(sequence);
    double unit = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    return 2.0 * unit - 1.0;
}

namespace {

using json = nlohmann::json;

[[noreturn]] void bad(const std::string& where, const std::string& message) {
    throw Error("scenario " + (where.empty() ? std::string("/") : where) + ": " + message);
}

void only_keys(const json& object, const std::string& where, std::initializer_list<std::string_view> allowed) {
    if (!object.is_object()) {
        bad(where, "expected an object");
    }
    for (const auto& [key, value] : object.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            bad(where + "/" + key, "unknown key '" + key + "'");
        }
    }
}

const json& need(const json& object, const std::string& where, const std::string& key) {
    if (!object.contains(key)) {
        bad(where + "/" + key, "missing required key");
    }
    return object.at(key);
}

std::int64_t integer(const json& value, const std::string& where, std::int64_t minimum) {
    if (!value.is_number_integer() || value.get<std::int64_t>() < minimum) {
        bad(where, "expected an integer >= " + std::to_string(minimum));
    }
    return value.get<std::int64_t>();
}

double number(const json& value, const std::string& where, double minimum, double maximum) {
    if (!value.is_number() || !std::isfinite(value.get<double>()) || value.get<double>() < minimum ||
        value.get<double>() > maximum) {
        bad(where, "expected a number in [" + std::to_string(minimum) + ", " + std::to_string(maximum) + "]");
    }
    return value.get<double>();
}

std::string text(const json& value, const std::string& where) {
    if (!value.is_string() || value.get<std::string>().empty()) {
        bad(where, "expected a non-empty string");
    }
    return value.get<std::string>();
}

Window window_from(const json& value, const std::string& where) {
    only_keys(value, where, {"start_s", "end_s"});
    Window window;
    window.start_s = integer(need(value, where, "start_s"), where + "/start_s", 0);
    if (value.contains("end_s")) {
        window.end_s = integer(value.at("end_s"), where + "/end_s", window.start_s + 1);
    }
    return window;
}

void add_job_group(const json& group, const std::string& where, std::vector<Job>& jobs) {
    only_keys(group, where, {"count", "prefix", "cores", "memory_mb", "max_walltime_s", "site_whitelist"});
    auto count = integer(need(group, where, "count"), where + "/count", 1);
    auto prefix = group.contains("prefix") ? text(group.at("prefix"), where + "/prefix") : std::string("job");
    Job job;
    job.cores = integer(need(group, where, "cores"), where + "/cores", 1);
    job.memory_mb = integer(need(group, where, "memory_mb"), where + "/memory_mb", 1);
    job.max_walltime_s = integer(need(group, where, "max_walltime_s"), where + "/max_walltime_s", 1);
    if (group.contains("site_whitelist")) {
        const auto& sites = group.at("site_whitelist");
        if (!sites.is_array()) {
            bad(where + "/site_whitelist", "expected a list of provider names");
        }
        job.site_whitelist.emplace();
        for (std::size_t i = 0; i < sites.size(); ++i) {
            auto site = text(sites[i], where + "/site_whitelist/" + std::to_string(i));
            if (site.find(',') != std::string::npos) {
                bad(where + "/site_whitelist", "provider names cannot contain ','");
            }
            job.site_whitelist->push_back(site);
        }
    }
    for (std::int64_t i = 1; i <= count; ++i) {
        std::ostringstream id;
        id << prefix << '-' << std::setw(4) << std::setfill('0') << i;
        job.job_id = id.str();
        jobs.push_back(job);
    }
}

ProviderScript provider_from(const json& value, const std::string& where) {
    only_keys(value, where, {"entry_id", "provider", "kind", "slot_cores", "slot_memory_mb", "max_slots",
                             "performance_score", "price", "allocation_core_hours", "downtime"});
    ProviderScript script;
    auto& entry = script.entry;
    entry.entry_id = text(need(value, where, "entry_id"), where + "/entry_id");
    entry.provider = text(need(value, where, "provider"), where + "/provider");
    try {
        entry.provider_kind = provisioning::provider_kind_from_string(text(need(value, where, "kind"), where + "/kind"));
    } catch (const Error& e) {
        bad(where + "/kind", e.what());
    }
    entry.slot_cores = integer(need(value, where, "slot_cores"), where + "/slot_cores", 1);
    entry.slot_memory_mb = integer(need(value, where, "slot_memory_mb"), where + "/slot_memory_mb", 1);
    entry.max_slots = integer(need(value, where, "max_slots"), where + "/max_slots", 1);
    entry.performance_score = number(need(value, where, "performance_score"), where + "/performance_score", 1e-9, 1e12);

    const auto& price = need(value, where, "price");
    auto at = where + "/price";
    only_keys(price, at, {"base", "amplitude", "period_s", "jitter"});
    script.price.base_price = number(need(price, at, "base"), at + "/base", 0.0, 1e9);
    script.price.amplitude = price.contains("amplitude") ? number(price.at("amplitude"), at + "/amplitude", 0.0, 0.999999) : 0.0;
    script.price.period_s = price.contains("period_s") ? integer(price.at("period_s"), at + "/period_s", 1) : 3600;
    script.price.jitter = price.contains("jitter") ? number(price.at("jitter"), at + "/jitter", 0.0, 0.2) : 0.0;

    if (entry.provider_kind == ProviderKind::Hpc) {
        script.allocation_core_hours =
            number(need(value, where, "allocation_core_hours"), where + "/allocation_core_hours", 0.0, 1e12);
    } else if (value.contains("allocation_core_hours")) {
        bad(where + "/allocation_core_hours", "only hpc providers carry an allocation");
    }
    if (value.contains("downtime")) {
        const auto& windows = value.at("downtime");
        if (!windows.is_array()) {
            bad(where + "/downtime", "expected a list of windows");
        }
        for (std::size_t i = 0; i < windows.size(); ++i) {
            script.downtime.push_back(window_from(windows[i], where + "/downtime/" + std::to_string(i)));
        }
    }
    return script;
}

}  // namespace

Scenario scenario_from_json(const json& document) {
    only_keys(document, "", {"seed", "jobs", "providers", "outages"});
    Scenario scenario;
    if (document.contains("seed")) {
        const auto& seed = document.at("seed");
        if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
            bad("/seed", "expected a non-negative integer");
        }
        scenario.seed = seed.get<std::uint64_t>();
    }
    const auto& groups = need(document, "", "jobs");
    if (!groups.is_array()) {
        bad("/jobs", "expected a list of job groups");
    }
    for (std::size_t i = 0; i < groups.size(); ++i) {
        add_job_group(groups[i], "/jobs/" + std::to_string(i), scenario.jobs);
    }
    const auto& providers = need(document, "", "providers");
    if (!providers.is_array()) {
        bad("/providers", "expected a list of providers");
    }
    for (std::size_t i = 0; i < providers.size(); ++i) {
        scenario.providers.push_back(provider_from(providers[i], "/providers/" + std::to_string(i)));
    }
    if (document.contains("outages")) {
        const auto& outages = document.at("outages");
        if (!outages.is_array()) {
            bad("/outages", "expected a list of outages");
        }
        for (std::size_t i = 0; i < outages.size(); ++i) {
            auto where = "/outages/" + std::to_string(i);
            only_keys(outages[i], where, {"target", "start_s", "end_s", "failures"});
            OutageScript outage;
            outage.target = text(need(outages[i], where, "target"), where + "/target");
            if (outage.target != "job_queue" && outage.target != "sink" && outage.target != "accounting") {
                bad(where + "/target", "unknown outage target '" + outage.target + "'");
            }
            json window{{"start_s", need(outages[i], where, "start_s")}};
            if (outages[i].contains("end_s")) {
                window["end_s"] = outages[i].at("end_s");
            }
            outage.window = window_from(window, where);
            if (outages[i].contains("failures")) {
                outage.failures = static_cast<int>(integer(outages[i].at("failures"), where + "/failures", 1));
            }
            scenario.outages.push_back(std::move(outage));
        }
    }
    return scenario;
}

Scenario parse_scenario(std::string_view text) {
    json document;
    try {
        document = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("scenario: ") + e.what());
    }
    return scenario_from_json(document);
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot read scenario '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

SimWorld::SimWorld(Scenario scenario, std::uint64_t seed)
    : seed_(seed),
      jobs_(std::move(scenario.jobs)),
      placements_(jobs_.size()),
      providers_(std::move(scenario.providers)),
      outages_(std::move(scenario.outages)),
      outage_failures_(outages_.size(), 0) {
    std::set<std::string> ids;
    for (const auto& job : jobs_) {
        if (!ids.insert(job.job_id).second) {
            throw Error("scenario: duplicate job id '" + job.job_id + "'");
        }
    }
    std::set<std::string> names;
    std::set<std::string> entries;
    for (const auto& script : providers_) {
        if (!names.insert(script.entry.provider).second) {
            throw Error("scenario: duplicate provider '" + script.entry.provider + "'");
        }
        if (!entries.insert(script.entry.entry_id).second) {
            throw Error("scenario: duplicate entry '" + script.entry.entry_id + "'");
        }
        fulfilled_[script.entry.entry_id] = 0;
        allocation_used_[script.entry.entry_id] = 0;
    }
}

void SimWorld::advance_to(SimTime now) {
    if (now < now_) {
        throw std::invalid_argument("simulated world cannot move backwards");
    }
    now_ = now;
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
        auto& placement = placements_[i];
        if (jobs_[i].state == JobState::Running && placement && placement->ends_at <= now) {
            jobs_[i].state = JobState::Done;
            --fulfilled_[placement->entry_id];
            placement.reset();
        }
    }
}

bool SimWorld::outage_hits(const std::string& target, SimTime now) {
    for (std::size_t i = 0; i < outages_.size(); ++i) {
        const auto& outage = outages_[i];
        if (outage.target != target || !outage.window.contains(now)) {
            continue;
        }
        if (!outage.failures) {
            return true;
        }
        if (outage_failures_[i] < *outage.failures) {
            ++outage_failures_[i];
            return true;
        }
    }
    return false;
}

Table SimWorld::fetch_jobs(SimTime now) {
    if (outage_hits("job_queue", now)) {
        throw ScriptedOutage("job queue unavailable at t=" + std::to_string(now));
    }
    return provisioning::jobs_to_table(jobs_);
}

const ProviderScript& SimWorld::provider_named(const std::string& provider) const {
    auto it = std::find_if(providers_.begin(), providers_.end(),
                           [&](const auto& p) { return p.entry.provider == provider; });
    if (it == providers_.end()) {
        throw Error("unknown provider '" + provider + "'");
    }
    return *it;
}

const ProviderScript& SimWorld::provider_for_entry(const std::string& entry_id) const {
    auto it = std::find_if(providers_.begin(), providers_.end(),
                           [&](const auto& p) { return p.entry.entry_id == entry_id; });
    if (it == providers_.end()) {
        throw Error("unknown entry '" + entry_id + "'");
    }
    return *it;
}

double SimWorld::price_at(const std::string& provider, SimTime t) const {
    const auto& script = provider_named(provider);
    return script.price.at(t, unit_noise(seed_, provider, t));
}

ResourceEntry SimWorld::current_entry(const ProviderScript& script, SimTime now) const {
    ResourceEntry entry = script.entry;
    entry.price_per_core_hour = script.price.at(now, unit_noise(seed_, entry.provider, now));
    entry.slots_in_use = fulfilled_.at(entry.entry_id);
    entry.occupancy = static_cast<double>(entry.slots_in_use) / static_cast<double>(entry.max_slots);
    bool down = std::any_of(script.downtime.begin(), script.downtime.end(),
                            [&](const Window& w) { return w.contains(now); });
    entry.state = down ? EntryState::Down : EntryState::Up;
    if (entry.provider_kind == ProviderKind::Hpc) {
        auto left = allocation_total_core_seconds(entry.entry_id) - allocation_used_.at(entry.entry_id);
        entry.allocation_core_hours_remaining = static_cast<double>(left) / 3600.0;
    } else {
        entry.allocation_core_hours_remaining = 0.0;
    }
    return entry;
}

Record SimWorld::fetch_provider(const std::string& provider, SimTime now) const {
    return provisioning::to_record(current_entry(provider_named(provider), now));
}

double SimWorld::spent() const noexcept {
    double total = 0.0;
    for (const auto& entry : ledger_) {
        total += entry.record.projected_cost;
    }
    return total;
}

Record SimWorld::fetch_accounting(SimTime now) {
    if (outage_hits("accounting", now)) {
        throw ScriptedOutage("accounting unavailable at t=" + std::to_string(now));
    }
    return Record{{"spent", spent()}, {"acknowledged_requests", static_cast<double>(ledger_.size())}};
}

std::vector<provisioning::SinkAck> SimWorld::accept(const std::string& channel_id, std::int64_t cycle_id,
                                                    std::span<const provisioning::ResourceRequest> requests,
                                                    const std::vector<std::string>& fired_rules, SimTime now) {
    if (outage_hits("sink", now)) {
        throw SinkUnavailable("provisioner sink unavailable at t=" + std::to_string(now));
    }
    std::vector<provisioning::SinkAck> acks;
    for (const auto& request : requests) {
        provisioning::SinkAck ack{request.entry_id, false, 0};
        if (!delivered_.emplace(channel_id, cycle_id, request.entry_id).second) {
            ack.duplicate = true;
            acks.push_back(ack);
            continue;
        }
        const auto& script = provider_for_entry(request.entry_id);
        ledger_.push_back(LedgerEntry{channel_id, provisioning::wire_record(request, cycle_id, fired_rules),
                                      request.core_seconds()});
        allocation_used_[request.entry_id] += request.core_seconds();

        auto entry = current_entry(script, now);
        auto& fulfilled = fulfilled_[request.entry_id];
        auto room = std::min(request.slots, entry.max_slots - fulfilled);
        for (std::size_t i = 0; i < jobs_.size() && ack.jobs_started < room; ++i) {
            auto& job = jobs_[i];
            if (job.state == JobState::Idle && provisioning::job_fits(job, entry)) {
                job.state = JobState::Running;
                placements_[i] = Placement{request.entry_id, now + job.max_walltime_s};
                ++ack.jobs_started;
            }
        }
        fulfilled += ack.jobs_started;
        acks.push_back(ack);
    }
    return acks;
}

std::string SimWorld::ledger_text() const {
    std::string out;
    for (const auto& entry : ledger_) {
        out += json(entry.record).dump() + "\n";
    }
    return out;
}

JobCounts SimWorld::job_counts() const noexcept {
    JobCounts counts;
    for (const auto& job : jobs_) {
        switch (job.state) {
            case JobState::Idle: ++counts.idle; break;
            case JobState::Running: ++counts.running; break;
            case JobState::Done: ++counts.done; break;
        }
    }
    return counts;
}

std::int64_t SimWorld::fulfilled_slots(const std::string& entry_id) const {
    return fulfilled_.at(entry_id);
}

std::int64_t SimWorld::allocation_used_core_seconds(const std::string& entry_id) const {
    return allocation_used_.at(entry_id);
}

std::int64_t SimWorld::allocation_total_core_seconds(const std::string& entry_id) const {
    return std::llround(provider_for_entry(entry_id).allocation_core_hours * 3600.0);
}

namespace {

std::string single_product(const ModuleSpec& spec) {
    if (spec.produces.size() != 1) {
        throw Error(spec.implementation + " produces exactly one product");
    }
    return spec.produces.front();
}

class JobQueueSource : public Source {
public:
    JobQueueSource(SimWorld& world, std::string product) : world_(world), product_(std::move(product)) {}
    ProductMap acquire(const CycleContext& context) override {
        return {{product_, world_.fetch_jobs(context.now)}};
    }

private:
    SimWorld& world_;
    std::string product_;
};

class ProviderSource : public Source {
public:
    ProviderSource(SimWorld& world, std::string provider, std::string product)
        : world_(world), provider_(std::move(provider)), product_(std::move(product)) {}
    ProductMap acquire(const CycleContext& context) override {
        return {{product_, world_.fetch_provider(provider_, context.now)}};
    }

private:
    SimWorld& world_;
    std::string provider_;
    std::string product_;
};

class AccountingSource : public Source {
public:
    AccountingSource(SimWorld& world, std::string product) : world_(world), product_(std::move(product)) {}
    ProductMap acquire(const CycleContext& context) override {
        return {{product_, world_.fetch_accounting(context.now)}};
    }

private:
    SimWorld& world_;
    std::string product_;
};

}  // namespace

void register_simulated_modules(ModuleRegistry& registry, SimWorld& world) {
    registry.add_source("sim_job_queue", [&world](const ModuleSpec& spec) {
        return std::make_unique<JobQueueSource>(world, single_product(spec));
    });
    registry.add_source("sim_provider", [&world](const ModuleSpec& spec) {
        if (!spec.params.contains("provider") || !spec.params.at("provider").is_string()) {
            throw Error("sim_provider needs params.provider (string)");
        }
        return std::make_unique<ProviderSource>(world, spec.params.at("provider").get<std::string>(),
                                                single_product(spec));
    });
    registry.add_source("sim_accounting", [&world](const ModuleSpec& spec) {
        return std::make_unique<AccountingSource>(world, single_product(spec));
    });
}

}  // namespace de::sim
