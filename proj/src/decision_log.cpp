#include "de/decision_log.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>

namespace de {

using json = nlohmann::json;

namespace {

json incidents_json(const std::vector<Incident>& incidents) {
    json out = json::array();
    for (const auto& incident : incidents) {
        out.push_back({{"subject", incident.subject}, {"message", incident.message}});
    }
    return out;
}

json to_json_line(const ProductDocument& doc) {
    return {{"kind", "product"},
            {"channel", doc.channel},
            {"name", doc.name},
            {"generation", doc.generation},
            {"created_at", doc.created_at},
            {"expiration_at", doc.expiration_at},
            {"producer", doc.producer},
            {"payload", to_json(doc.payload)},
            {"digest", doc.digest}};
}

json to_json_line(const DecisionRecord& record) {
    json consumed = json::array();
    for (const auto& c : record.consumed) {
        consumed.push_back({{"product", c.product}, {"generation", c.generation}, {"digest", c.digest}});
    }
    return {{"kind", "decision"},
            {"cycle_id", record.cycle_id},
            {"channel_id", record.channel_id},
            {"sim_time_s", record.sim_time_s},
            {"outcome", record.outcome},
            {"consumed", consumed},
            {"fact_values", record.fact_values},
            {"fired_rules", record.fired_rules},
            {"requests", record.requests},
            {"publish_status", std::string(to_string(record.publish_status))},
            {"cumulative_spend", record.cumulative_spend},
            {"incidents", incidents_json(record.incidents)}};
}

json to_json_line(const StatusLine& status) {
    return {{"kind", "status"},
            {"channel_id", status.channel_id},
            {"state", std::string(to_string(status.state))},
            {"cycle_id", status.cycle_id},
            {"last_error", status.last_error ? json(*status.last_error) : json(nullptr)},
            {"sim_time_s", status.sim_time_s}};
}

}  // namespace

json to_json(const LogLine& line) {
    return std::visit([](const auto& value) { return to_json_line(value); }, line);
}

LogLine log_line_from_json(const json& doc) {
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "product") {
        ProductDocument out;
        out.channel = doc.at("channel").get<std::string>();
        out.name = doc.at("name").get<std::string>();
        out.generation = doc.at("generation").get<std::int64_t>();
        out.created_at = doc.at("created_at").get<SimTime>();
        out.expiration_at = doc.at("expiration_at").get<SimTime>();
        out.producer = doc.at("producer").get<std::string>();
        out.payload = payload_from_json(doc.at("payload"));
        out.digest = doc.at("digest").get<std::string>();
        return out;
    }
    if (kind == "decision") {
        DecisionRecord out;
        out.cycle_id = doc.at("cycle_id").get<std::int64_t>();
        out.channel_id = doc.at("channel_id").get<std::string>();
        out.sim_time_s = doc.at("sim_time_s").get<SimTime>();
        out.outcome = doc.at("outcome").get<std::string>();
        for (const auto& c : doc.at("consumed")) {
            out.consumed.push_back(ConsumedProduct{c.at("product").get<std::string>(),
                                                   c.at("generation").get<std::int64_t>(),
                                                   c.at("digest").get<std::string>()});
        }
        out.fact_values = doc.at("fact_values").get<std::map<std::string, std::string>>();
        out.fired_rules = doc.at("fired_rules").get<std::vector<std::string>>();
        out.requests = doc.at("requests").get<std::vector<RequestRecord>>();
        out.publish_status = publish_status_from_string(doc.at("publish_status").get<std::string>());
        out.cumulative_spend = doc.at("cumulative_spend").get<double>();
        for (const auto& i : doc.at("incidents")) {
            out.incidents.push_back(Incident{i.at("subject").get<std::string>(), i.at("message").get<std::string>()});
        }
        return out;
    }
    if (kind == "status") {
        StatusLine out;
        out.channel_id = doc.at("channel_id").get<std::string>();
        out.state = channel_state_from_string(doc.at("state").get<std::string>());
        out.cycle_id = doc.at("cycle_id").get<std::int64_t>();
        if (!doc.at("last_error").is_null()) {
            out.last_error = doc.at("last_error").get<std::string>();
        }
        out.sim_time_s = doc.at("sim_time_s").get<SimTime>();
        return out;
    }
    throw Error("unknown log line kind '" + kind + "'");
}

std::string log_line_text(const LogLine& line) {
    return to_json(line).dump() + "\n";
}

DecisionLogWriter::DecisionLogWriter(const std::filesystem::path& path, bool overwrite) : path_(path) {
    std::error_code ec;
    if (!overwrite && std::filesystem::exists(path, ec) && std::filesystem::file_size(path, ec) > 0) {
        throw LogIoError("log '" + path.string() + "' already has records (use --force to overwrite)");
    }
    file_ = std::fopen(path.c_str(), "wb");
    if (!file_) {
        throw LogIoError("cannot open log '" + path.string() + "': " + std::strerror(errno));
    }
}

DecisionLogWriter::~DecisionLogWriter() {
    if (file_) {
        std::fclose(file_);
    }
}

void DecisionLogWriter::append(const LogLine& line) {
    auto text = log_line_text(line);
    if (std::fwrite(text.data(), 1, text.size(), file_) != text.size() || std::fflush(file_) != 0) {
        throw LogIoError("cannot write log '" + path_.string() + "': " + std::strerror(errno));
    }
}

PublishStatus cycle_publish_status(const CycleReport& report) {
    auto status = PublishStatus::None;
    for (const auto& p : report.publishers) {
        if (p.outcome.status == PublishStatus::Failed) {
            return PublishStatus::Failed;
        }
        if (p.outcome.status == PublishStatus::Published) {
            status = PublishStatus::Published;
        }
    }
    return status;
}

std::vector<LogLine> DecisionRecorder::record(const CycleReport& report) {
    std::vector<LogLine> lines;
    if (report.outcome == CycleOutcome::Error) {
        return lines;
    }
    for (const auto& [name, product] : report.final_snapshot.entries()) {
        if (logged_.emplace(report.channel_id, name, product.header.generation).second) {
            lines.push_back(ProductDocument{report.channel_id, name, product.header.generation,
                                            product.header.created_at, product.header.expiration_at,
                                            product.header.producer, *product.payload, product.digest});
        }
    }

    DecisionRecord record;
    record.cycle_id = report.cycle_id;
    record.channel_id = report.channel_id;
    record.sim_time_s = report.sim_time_s;
    record.outcome = std::string(to_string(report.outcome));
    record.consumed = report.consumed();
    for (const auto& [name, value] : report.evaluation.fact_values) {
        record.fact_values[name] = std::string(to_string(value));
    }
    for (const auto& [name, derived] : report.evaluation.derived_facts) {
        record.fact_values[name] = derived ? "true" : "false";
    }
    record.fired_rules = report.evaluation.fired_rules;
    auto& spend = spend_[report.channel_id];
    for (const auto& p : report.publishers) {
        if (p.outcome.status != PublishStatus::Published) {
            continue;
        }
        for (const auto& request : p.outcome.requests) {
            spend += request.projected_cost;
            record.requests.push_back(request);
        }
    }
    record.publish_status = cycle_publish_status(report);
    record.cumulative_spend = spend;
    record.incidents = report.incidents;
    lines.push_back(std::move(record));
    return lines;
}

std::vector<LogLine> DecisionRecorder::status_changes(std::span<Channel* const> channels, SimTime now) {
    std::vector<LogLine> lines;
    for (const auto* channel : channels) {
        const auto& status = channel->status();
        auto it = last_status_.find(status.channel_id);
        if (it != last_status_.end() && it->second.state == status.state) {
            continue;
        }
        last_status_[status.channel_id] = status;
        lines.push_back(StatusLine{status.channel_id, status.state, status.cycle_id, status.last_error, now});
    }
    return lines;
}

std::vector<LogLine> DecisionRecorder::final_status(std::span<Channel* const> channels, SimTime now) {
    std::vector<LogLine> lines;
    for (const auto* channel : channels) {
        const auto& status = channel->status();
        last_status_[status.channel_id] = status;
        lines.push_back(StatusLine{status.channel_id, status.state, status.cycle_id, status.last_error, now});
    }
    return lines;
}

LogContents read_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LogIoError("cannot read log '" + path.string() + "'");
    }
    LogContents contents;
    std::string text;
    std::size_t number = 0;
    while (std::getline(in, text)) {
        ++number;
        try {
            contents.lines.push_back(log_line_from_json(json::parse(text)));
        } catch (const std::exception& e) {
            bool last = in.eof();
            contents.corrupt = CorruptRecord{number, std::string(last ? "truncated record: " : "unreadable record: ") + e.what()};
            break;
        }
    }
    return contents;
}

}  // namespace de
