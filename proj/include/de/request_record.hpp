#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace de {

/// A provisioning request as it travels on the wire to the sink and as it is
/// recorded in the decision log. Both sides use this one schema so the sink
/// ledger and the log can be diffed.
struct RequestRecord {
    std::int64_t cycle_id = 0;
    std::string entry_id;
    std::int64_t slots = 0;
    double projected_cost = 0.0;
    double fom_value = 0.0;
    std::vector<std::string> fired_rules;

    bool operator==(const RequestRecord&) const = default;
};

void to_json(nlohmann::json& out, const RequestRecord& record);
void from_json(const nlohmann::json& in, RequestRecord& record);

}  // namespace de
