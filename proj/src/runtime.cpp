#include "de/runtime.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "de/errors.hpp"

namespace de {

std::string_view to_string(ChannelState state) noexcept {
    switch (state) {
        case ChannelState::Boot: return "boot";
        case ChannelState::Steady: return "steady";
        case ChannelState::Offline: return "offline";
        case ChannelState::Error: return "error";
    }
    return "error";
}

ChannelState channel_state_from_string(std::string_view text) {
    if (text == "boot") return ChannelState::Boot;
    if (text == "steady") return ChannelState::Steady;
    if (text == "offline") return ChannelState::Offline;
    if (text == "error") return ChannelState::Error;
    throw Error("invalid channel state '" + std::string(text) + "'");
}

std::string_view to_string(CycleOutcome outcome) noexcept {
    switch (outcome) {
        case CycleOutcome::Completed: return "completed";
        case CycleOutcome::Aborted: return "aborted";
        case CycleOutcome::Error: return "error";
    }
    return "error";
}

void Clock::advance_to(SimTime t) {
    if (t < now_) {
        throw std::invalid_argument("clock cannot move backwards");
    }
    now_ = t;
}

Channel::Channel(ChannelSpec spec, ChannelModules modules, ChannelOptions options)
    : spec_(std::move(spec)), modules_(std::move(modules)), options_(options) {
    if (auto violations = validate_channel(spec_); !violations.empty()) {
        throw Error("channel '" + spec_.channel_id + "' is invalid: " + to_string(violations.front()));
    }
    auto require = [&](const auto& specs, const auto& instances) {
        for (const auto& module : specs) {
            auto it = instances.find(module.name);
            if (it == instances.end() || !it->second) {
                throw Error("channel '" + spec_.channel_id + "' has no instance for module '" + module.name + "'");
            }
        }
    };
    require(spec_.sources, modules_.sources);
    require(spec_.transforms, modules_.transforms);
    require(spec_.publishers, modules_.publishers);
    if (options_.source_retry_cap < 0) {
        throw std::invalid_argument("source retry cap must not be negative");
    }
    order_ = transform_order(spec_);
    status_.channel_id = spec_.channel_id;
}

void Channel::stop() {
    status_.state = ChannelState::Offline;
}

std::vector<ConsumedProduct> CycleReport::consumed() const {
    std::vector<ConsumedProduct> out;
    for (const auto& [name, product] : final_snapshot.entries()) {
        out.push_back(ConsumedProduct{name, product.header.generation, product.digest});
    }
    return out;
}

nlohmann::json CycleReport::to_json() const {
    nlohmann::json written_json = nlohmann::json::array();
    for (const auto& w : written) {
        written_json.push_back({{"name", w.name},
                                {"generation", w.header.generation},
                                {"created_at", w.header.created_at},
                                {"expiration_at", w.header.expiration_at},
                                {"producer", w.header.producer},
                                {"digest", w.digest}});
    }
    nlohmann::json consumed_json = nlohmann::json::array();
    for (const auto& c : consumed()) {
        consumed_json.push_back({{"product", c.product}, {"generation", c.generation}, {"digest", c.digest}});
    }
    nlohmann::json facts = nlohmann::json::object();
    for (const auto& [name, value] : evaluation.fact_values) {
        facts[name] = std::string(de::to_string(value));
    }
    nlohmann::json publishers_json = nlohmann::json::array();
    for (const auto& p : publishers) {
        publishers_json.push_back({{"publisher", p.publisher},
                                   {"status", std::string(de::to_string(p.outcome.status))},
                                   {"detail", p.outcome.detail},
                                   {"requests", p.outcome.requests}});
    }
    nlohmann::json incidents_json = nlohmann::json::array();
    for (const auto& i : incidents) {
        incidents_json.push_back({{"subject", i.subject}, {"message", i.message}});
    }
    return {{"channel_id", channel_id},
            {"cycle_id", cycle_id},
            {"sim_time_s", sim_time_s},
            {"outcome", std::string(de::to_string(outcome))},
            {"state_after", std::string(de::to_string(state_after))},
            {"written", written_json},
            {"consumed", consumed_json},
            {"fact_values", facts},
            {"derived_facts", evaluation.derived_facts},
            {"fired_rules", evaluation.fired_rules},
            {"triggered_actions", evaluation.triggered_actions},
            {"suppressed_rules", evaluation.suppressed_rules},
            {"publishers", publishers_json},
            {"incidents", incidents_json}};
}

namespace {

SimTime validity_param(const ModuleSpec& module, SimTime fallback) {
    if (module.params.contains("validity_s")) {
        const auto& value = module.params.at("validity_s");
        if (value.is_number_integer() && value.get<SimTime>() > 0) {
            return value.get<SimTime>();
        }
        throw Error("module '" + module.name + "': validity_s must be a positive integer");
    }
    return fallback;
}

void check_declared(const ModuleSpec& module, const ProductMap& products) {
    for (const auto& [name, payload] : products) {
        check_payload(payload);
        if (std::find(module.produces.begin(), module.produces.end(), name) == module.produces.end()) {
            throw Error("module '" + module.name + "' returned undeclared product '" + name + "'");
        }
    }
    for (const auto& name : module.produces) {
        if (!products.contains(name)) {
            throw Error("module '" + module.name + "' did not return declared product '" + name + "'");
        }
    }
}

const ModuleSpec& find_spec(const std::vector<ModuleSpec>& group, const std::string& name) {
    auto it = std::find_if(group.begin(), group.end(), [&](const auto& m) { return m.name == name; });
    if (it == group.end()) {
        throw std::logic_error("unknown module '" + name + "'");
    }
    return *it;
}

std::optional<std::string> first_missing(const ModuleSpec& module, const DataBlockSnapshot& snapshot) {
    for (const auto& name : module.consumes) {
        if (!snapshot.contains(name)) {
            return name;
        }
    }
    return std::nullopt;
}

}  // namespace

struct CycleRunner {
    Channel& channel;
    DataBlock& datablock;
    CycleReport report;
    CycleContext context;

    CycleRunner(Channel& c, const Clock& clock, DataBlock& db) : channel(c), datablock(db) {
        report.channel_id = channel.spec_.channel_id;
        report.cycle_id = channel.status_.cycle_id;
        report.sim_time_s = clock.now();
        context = CycleContext{report.channel_id, report.cycle_id, report.sim_time_s};
    }

    void put_all(const ModuleSpec& module, ProductMap products, SimTime validity) {
        for (auto& [name, payload] : products) {
            auto digest = payload_digest(payload);
            auto header = datablock.put(report.channel_id, name, std::move(payload), validity, module.name,
                                        context.now);
            report.written.push_back(WrittenProduct{name, header, std::move(digest)});
        }
    }

    // Returns false when the source exhausted its retries.
    bool run_source(const ModuleSpec& module) {
        auto& instance = *channel.modules_.sources.at(module.name);
        const int attempts = channel.options_.source_retry_cap + 1;
        std::string last_message;
        for (int attempt = 1; attempt <= attempts; ++attempt) {
            try {
                auto products = instance.acquire(context);
                check_declared(module, products);
                put_all(module, std::move(products), validity_param(module, 2 * *module.period_s));
                channel.next_due_[module.name] = context.now + *module.period_s;
                return true;
            } catch (const std::exception& e) {
                last_message = e.what();
                report.incidents.push_back(
                    Incident{"source " + module.name, "attempt " + std::to_string(attempt) + " failed: " + last_message});
            }
        }
        channel.status_.last_error = "source '" + module.name + "' failed after " + std::to_string(attempts) +
                                     " attempts: " + last_message;
        return false;
    }

    CycleReport abort(std::string subject, std::string message) {
        report.incidents.push_back(Incident{std::move(subject), std::move(message)});
        report.outcome = CycleOutcome::Aborted;
        report.final_snapshot = datablock.snapshot(report.channel_id, report.cycle_id, context.now);
        ++channel.status_.cycle_id;
        report.state_after = channel.status_.state;
        return std::move(report);
    }

    CycleReport run() {
        auto& status = channel.status_;
        if (status.state != ChannelState::Boot && status.state != ChannelState::Steady) {
            throw std::logic_error("channel '" + report.channel_id + "' is " + std::string(to_string(status.state)));
        }
        const auto& spec = channel.spec_;

        for (const auto& source : spec.sources) {
            auto due = channel.next_due_.find(source.name);
            bool run_now = status.state == ChannelState::Boot || due == channel.next_due_.end() ||
                           due->second <= context.now;
            if (run_now && !run_source(source)) {
                status.state = ChannelState::Error;
                report.outcome = CycleOutcome::Error;
                report.state_after = status.state;
                report.final_snapshot = datablock.snapshot(report.channel_id, report.cycle_id, context.now);
                return std::move(report);
            }
        }

        auto snapshot = datablock.snapshot(report.channel_id, report.cycle_id, context.now);
        for (const auto& name : channel.order_) {
            const auto& module = find_spec(spec.transforms, name);
            if (auto missing = first_missing(module, snapshot)) {
                return abort("transform " + name, "MissingInput: '" + *missing + "' is absent or expired");
            }
            ProductMap products;
            try {
                products = channel.modules_.transforms.at(name)->transform(context, snapshot.restricted_to(module.consumes));
                check_declared(module, products);
                put_all(module, std::move(products), validity_param(module, spec.channel_period_s));
            } catch (const std::exception& e) {
                return abort("transform " + name, std::string("TransformFailure: ") + e.what());
            }
            snapshot = datablock.snapshot(report.channel_id, report.cycle_id, context.now);
        }
        report.final_snapshot = snapshot;

        auto facts = evaluate_facts(spec.facts, snapshot);
        report.incidents.insert(report.incidents.end(), facts.incidents.begin(), facts.incidents.end());
        report.evaluation = forward_chain(spec.rules, facts.values);

        for (const auto& action : report.evaluation.triggered_actions) {
            const auto& module = find_spec(spec.publishers, action);
            PublisherReport published{action, {}};
            if (auto missing = first_missing(module, snapshot)) {
                published.outcome.status = PublishStatus::Failed;
                published.outcome.detail = "MissingInput: '" + *missing + "' is absent or expired";
            } else {
                try {
                    published.outcome = channel.modules_.publishers.at(action)->publish(
                        context, snapshot.restricted_to(module.consumes), report.evaluation);
                } catch (const std::exception& e) {
                    published.outcome = PublishOutcome{PublishStatus::Failed, e.what(), {}};
                }
            }
            if (published.outcome.status == PublishStatus::Failed) {
                report.incidents.push_back(Incident{"publisher " + action, published.outcome.detail});
            }
            report.publishers.push_back(std::move(published));
        }

        ++status.cycle_id;
        if (status.state == ChannelState::Boot) {
            status.state = ChannelState::Steady;
        }
        report.outcome = CycleOutcome::Completed;
        report.state_after = status.state;
        return std::move(report);
    }
};

CycleReport run_cycle(Channel& channel, const Clock& clock, DataBlock& datablock) {
    return CycleRunner(channel, clock, datablock).run();
}

void schedule(std::span<Channel* const> channels, Clock& clock, DataBlock& datablock, std::int64_t n_cycles,
              const ScheduleHooks& hooks) {
    if (n_cycles < 1) {
        throw std::invalid_argument("schedule needs at least one cycle");
    }
    struct Plan {
        SimTime next_time;
        std::int64_t cycles_run = 0;
    };
    std::vector<Plan> plans(channels.size(), Plan{clock.now()});
    auto runnable = [&](std::size_t i) {
        auto state = channels[i]->status().state;
        return (state == ChannelState::Boot || state == ChannelState::Steady) && plans[i].cycles_run < n_cycles;
    };

    while (!(hooks.should_stop && hooks.should_stop())) {
        SimTime next = std::numeric_limits<SimTime>::max();
        for (std::size_t i = 0; i < channels.size(); ++i) {
            if (runnable(i)) {
                next = std::min(next, plans[i].next_time);
            }
        }
        if (next == std::numeric_limits<SimTime>::max()) {
            break;
        }
        clock.advance_to(next);
        if (hooks.on_advance) {
            hooks.on_advance(next);
        }
        for (std::size_t i = 0; i < channels.size(); ++i) {
            if (!runnable(i) || plans[i].next_time != next) {
                continue;
            }
            auto report = run_cycle(*channels[i], clock, datablock);
            ++plans[i].cycles_run;
            plans[i].next_time += channels[i]->spec().channel_period_s;
            if (hooks.on_report) {
                hooks.on_report(report);
            }
        }
    }
}

}  // namespace de
