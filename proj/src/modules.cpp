#include "de/modules.hpp"

namespace de {

std::string_view to_string(PublishStatus status) noexcept {
    switch (status) {
        case PublishStatus::Published: return "published";
        case PublishStatus::Failed: return "failed";
        case PublishStatus::None: return "none";
    }
    return "none";
}

PublishStatus publish_status_from_string(std::string_view text) {
    if (text == "published") return PublishStatus::Published;
    if (text == "failed") return PublishStatus::Failed;
    if (text == "none") return PublishStatus::None;
    throw Error("invalid publish status '" + std::string(text) + "'");
}

void to_json(nlohmann::json& out, const RequestRecord& record) {
    out = nlohmann::json{{"cycle_id", record.cycle_id},
                         {"entry_id", record.entry_id},
                         {"slots", record.slots},
                         {"projected_cost", record.projected_cost},
                         {"fom_value", record.fom_value},
                         {"fired_rules", record.fired_rules}};
}

void from_json(const nlohmann::json& in, RequestRecord& record) {
    in.at("cycle_id").get_to(record.cycle_id);
    in.at("entry_id").get_to(record.entry_id);
    in.at("slots").get_to(record.slots);
    in.at("projected_cost").get_to(record.projected_cost);
    in.at("fom_value").get_to(record.fom_value);
    in.at("fired_rules").get_to(record.fired_rules);
}

}  // namespace de
