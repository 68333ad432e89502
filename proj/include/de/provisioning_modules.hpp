#pragma once

#include <span>
#include <string>
#include <vector>

#include "de/config.hpp"
#include "de/provisioning.hpp"

namespace de::provisioning {

struct SinkAck {
    std::string entry_id;
    bool duplicate = false;
    std::int64_t jobs_started = 0;

    bool operator==(const SinkAck&) const = default;
};

/// The provisioner endpoint requests are published to. Delivery is
/// idempotent per (channel, cycle, entry); a repeated delivery is
/// acknowledged as a duplicate and changes nothing. Throws SinkUnavailable.
class RequestSink {
public:
    virtual ~RequestSink() = default;
    virtual std::vector<SinkAck> accept(const std::string& channel_id, std::int64_t cycle_id,
                                        std::span<const ResourceRequest> requests,
                                        const std::vector<std::string>& fired_rules, SimTime now) = 0;
};

/// Wire record for a request emitted in a cycle.
[[nodiscard]] RequestRecord wire_record(const ResourceRequest& request, std::int64_t cycle_id,
                                        const std::vector<std::string>& fired_rules);

/// Registers the three stage transforms and the request publisher:
///   match_eligibility   jobs + entries_* -> eligibility, candidates, demand
///   rank_fom            candidates -> ranked
///   generate_requests   ranked, candidates, eligibility, jobs, spend -> requests
///   publish_requests    requests -> sink
void register_provisioning_modules(ModuleRegistry& registry, RequestSink& sink);

}  // namespace de::provisioning
