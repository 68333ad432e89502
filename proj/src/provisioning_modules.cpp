#include "de/provisioning_modules.hpp"

#include <algorithm>
#include <set>

#include "de/errors.hpp"

namespace de::provisioning {

RequestRecord wire_record(const ResourceRequest& request, std::int64_t cycle_id,
                          const std::vector<std::string>& fired_rules) {
    return RequestRecord{cycle_id, request.entry_id, request.slots, request.projected_cost, request.fom_value,
                         fired_rules};
}

namespace {

const Table& table_of(const DataBlockSnapshot& inputs, const std::string& name) {
    const auto* product = inputs.find(name);
    if (!product || !std::holds_alternative<Table>(*product->payload)) {
        throw Error("input '" + name + "' is not a table");
    }
    return std::get<Table>(*product->payload);
}

const Record& record_of(const DataBlockSnapshot& inputs, const std::string& name) {
    const auto* product = inputs.find(name);
    if (!product || !std::holds_alternative<Record>(*product->payload)) {
        throw Error("input '" + name + "' is not a record");
    }
    return std::get<Record>(*product->payload);
}

void require_products(const ModuleSpec& spec, std::initializer_list<const char*> names) {
    for (const char* name : names) {
        if (std::find(spec.produces.begin(), spec.produces.end(), name) == spec.produces.end()) {
            throw Error(spec.implementation + " must produce '" + name + "'");
        }
    }
    if (spec.produces.size() != names.size()) {
        throw Error(spec.implementation + " produces exactly " + std::to_string(names.size()) + " product(s)");
    }
}

void require_consumes(const ModuleSpec& spec, std::initializer_list<const char*> names) {
    for (const char* name : names) {
        if (std::find(spec.consumes.begin(), spec.consumes.end(), name) == spec.consumes.end()) {
            throw Error(spec.implementation + " must consume '" + name + "'");
        }
    }
}

std::int64_t int_param(const ModuleSpec& spec, const char* key, std::int64_t minimum) {
    if (!spec.params.contains(key)) {
        throw Error(spec.implementation + " needs params." + key);
    }
    const auto& value = spec.params.at(key);
    if (!value.is_number_integer() || value.get<std::int64_t>() < minimum) {
        throw Error("params." + std::string(key) + " must be an integer >= " + std::to_string(minimum));
    }
    return value.get<std::int64_t>();
}

double number_param(const ModuleSpec& spec, const char* key) {
    if (!spec.params.contains(key)) {
        throw Error(spec.implementation + " needs params." + key);
    }
    const auto& value = spec.params.at(key);
    if (!value.is_number() || value.get<double>() < 0.0) {
        throw Error("params." + std::string(key) + " must be a non-negative number");
    }
    return value.get<double>();
}

// Every consumed product other than the job table is one resource entry.
class EligibilityTransform : public Transform {
public:
    explicit EligibilityTransform(const ModuleSpec& spec) {
        require_consumes(spec, {"jobs"});
        require_products(spec, {"eligibility", "candidates", "demand"});
        for (const auto& name : spec.consumes) {
            if (name != "jobs") {
                entry_products_.push_back(name);
            }
        }
        if (entry_products_.empty()) {
            throw Error("match_eligibility needs at least one entry product");
        }
    }

    ProductMap transform(const CycleContext&, const DataBlockSnapshot& inputs) override {
        auto jobs = jobs_from_table(table_of(inputs, "jobs"));
        std::vector<ResourceEntry> entries;
        for (const auto& name : entry_products_) {
            entries.push_back(entry_from_record(record_of(inputs, name)));
        }
        auto eligibility = match_eligibility(jobs, entries);

        Table pairs;
        Table candidates;
        std::set<std::string> eligible_jobs;
        for (const auto& entry : entries) {
            const auto& matched = eligibility.at(entry.entry_id);
            for (const auto& job_id : matched) {
                pairs.push_back(Record{{"entry_id", entry.entry_id}, {"job_id", job_id}});
                eligible_jobs.insert(job_id);
            }
            if (!matched.empty()) {
                candidates.push_back(to_record(entry));
            }
        }
        auto idle = std::count_if(jobs.begin(), jobs.end(), [](const Job& j) { return j.state == JobState::Idle; });
        Record demand{{"idle_jobs", static_cast<double>(idle)},
                      {"eligible_idle_jobs", static_cast<double>(eligible_jobs.size())}};
        return {{"eligibility", std::move(pairs)}, {"candidates", std::move(candidates)}, {"demand", std::move(demand)}};
    }

private:
    std::vector<std::string> entry_products_;
};

class RankTransform : public Transform {
public:
    explicit RankTransform(const ModuleSpec& spec) {
        require_consumes(spec, {"candidates"});
        require_products(spec, {"ranked"});
    }

    ProductMap transform(const CycleContext&, const DataBlockSnapshot& inputs) override {
        std::vector<ResourceEntry> entries;
        for (const auto& row : table_of(inputs, "candidates")) {
            entries.push_back(entry_from_record(row));
        }
        Table ranked;
        double rank = 0;
        for (const auto& fom : rank_by_fom(entries)) {
            ranked.push_back(Record{{"entry_id", fom.entry_id}, {"fom_value", fom.value}, {"rank", ++rank}});
        }
        return {{"ranked", std::move(ranked)}};
    }
};

class RequestTransform : public Transform {
public:
    explicit RequestTransform(const ModuleSpec& spec) {
        require_consumes(spec, {"ranked", "candidates", "eligibility", "jobs", "spend"});
        require_products(spec, {"requests"});
        policy_.budget_limit = number_param(spec, "budget_limit");
        policy_.per_entry_max_request = int_param(spec, "per_entry_max_request", 1);
        policy_.expected_job_walltime_s = int_param(spec, "expected_job_walltime_s", 1);
    }

    ProductMap transform(const CycleContext&, const DataBlockSnapshot& inputs) override {
        std::vector<FigureOfMerit> ranked;
        for (const auto& row : table_of(inputs, "ranked")) {
            ranked.push_back(FigureOfMerit{string_field(row, "entry_id"), number_field(row, "fom_value")});
        }
        std::vector<ResourceEntry> entries;
        for (const auto& row : table_of(inputs, "candidates")) {
            entries.push_back(entry_from_record(row));
        }
        Eligibility eligibility;
        for (const auto& entry : entries) {
            eligibility[entry.entry_id];
        }
        for (const auto& row : table_of(inputs, "eligibility")) {
            eligibility[string_field(row, "entry_id")].push_back(string_field(row, "job_id"));
        }
        auto jobs = jobs_from_table(table_of(inputs, "jobs"));
        auto policy = policy_;
        policy.budget_spent = number_field(record_of(inputs, "spend"), "spent");

        Table requests;
        for (const auto& request : generate_requests(ranked, eligibility, jobs, entries, policy)) {
            requests.push_back(to_record(request));
        }
        return {{"requests", std::move(requests)}};
    }

private:
    PolicyParams policy_;
};

class RequestPublisher : public Publisher {
public:
    RequestPublisher(const ModuleSpec& spec, RequestSink& sink) : sink_(sink) {
        require_consumes(spec, {"requests"});
    }

    PublishOutcome publish(const CycleContext& context, const DataBlockSnapshot& inputs,
                           const EvaluationResult& evaluation) override {
        std::vector<ResourceRequest> requests;
        for (const auto& row : table_of(inputs, "requests")) {
            requests.push_back(request_from_record(row));
        }
        PublishOutcome outcome;
        if (requests.empty()) {
            outcome.status = PublishStatus::None;
            return outcome;
        }
        try {
            auto acks = sink_.accept(context.channel_id, context.cycle_id, requests, evaluation.fired_rules,
                                     context.now);
            std::int64_t started = 0;
            std::int64_t duplicates = 0;
            for (const auto& ack : acks) {
                started += ack.jobs_started;
                duplicates += ack.duplicate ? 1 : 0;
            }
            for (const auto& request : requests) {
                outcome.requests.push_back(wire_record(request, context.cycle_id, evaluation.fired_rules));
            }
            outcome.detail = std::to_string(acks.size()) + " acknowledged, " + std::to_string(duplicates) +
                             " duplicate, " + std::to_string(started) + " jobs started";
        } catch (const SinkUnavailable& e) {
            outcome.status = PublishStatus::Failed;
            outcome.detail = std::string("SinkUnavailable: ") + e.what();
        }
        return outcome;
    }

private:
    RequestSink& sink_;
};

}  // namespace

void register_provisioning_modules(ModuleRegistry& registry, RequestSink& sink) {
    registry.add_transform("match_eligibility",
                           [](const ModuleSpec& spec) { return std::make_unique<EligibilityTransform>(spec); });
    registry.add_transform("rank_fom", [](const ModuleSpec& spec) { return std::make_unique<RankTransform>(spec); });
    registry.add_transform("generate_requests",
                           [](const ModuleSpec& spec) { return std::make_unique<RequestTransform>(spec); });
    registry.add_publisher("publish_requests", [&sink](const ModuleSpec& spec) {
        return std::make_unique<RequestPublisher>(spec, sink);
    });
}

}  // namespace de::provisioning
