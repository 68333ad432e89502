#include "de/engine.hpp"

#include <iomanip>
#include <limits>
#include <sstream>
#include <ostream>
#include <set>

#include "de/provisioning_modules.hpp"

namespace de {

ModuleRegistry builtin_registry(sim::SimWorld& world) {
    ModuleRegistry registry;
    sim::register_simulated_modules(registry, world);
    provisioning::register_provisioning_modules(registry, world);
    return registry;
}

Engine::Engine(std::vector<ConfigDocument> configs, sim::Scenario scenario, std::uint64_t seed)
    : world_(std::make_unique<sim::SimWorld>(std::move(scenario), seed)), registry_(builtin_registry(*world_)) {
    std::set<std::string> ids;
    for (const auto& doc : configs) {
        if (!ids.insert(doc.channel_id).second) {
            throw ConfigError(ConfigErrorKind::Contract, doc.channel_id,
                              "channel id '" + doc.channel_id + "' is used by more than one file");
        }
        channels_.push_back(assemble(doc, registry_));
    }
}

std::vector<Channel*> Engine::channels() const {
    std::vector<Channel*> out;
    for (const auto& channel : channels_) {
        out.push_back(channel.get());
    }
    return out;
}

void Engine::run(std::int64_t n_cycles, const std::function<void(const CycleReport&)>& on_report,
                 const std::function<bool()>& should_stop) {
    auto list = channels();
    ScheduleHooks hooks;
    hooks.on_advance = [this](SimTime now) { world_->advance_to(now); };
    hooks.on_report = on_report;
    hooks.should_stop = should_stop;
    schedule(list, clock_, datablock_, n_cycles, hooks);
}

std::vector<ConfigDocument> load_config_dir(const std::filesystem::path& dir) {
    std::vector<ConfigDocument> docs;
    for (const auto& file : channel_files(dir)) {
        try {
            docs.push_back(load_config(file));
        } catch (const ConfigError& e) {
            throw ConfigError(e.kind(), file.filename().string() + ": " + e.entity(), e.what(), e.violations());
        }
    }
    return docs;
}

namespace {

void report_config_error(const std::string& file, const ConfigError& e, std::ostream& out) {
    if (e.violations().empty()) {
        out << file << ": " << e.entity() << ": " << to_string(e.kind()) << ": " << e.what() << "\n";
        return;
    }
    for (const auto& v : e.violations()) {
        out << file << ": " << v.module << ": " << to_string(e.kind()) << ": "
            << (v.product.empty() ? "" : "[" + v.product + "] ") << v.contract << ": " << v.message << "\n";
    }
}

bool is_directory(const std::filesystem::path& dir, std::ostream& err) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) {
        err << "error: config directory '" << dir.string() << "' does not exist\n";
        return false;
    }
    return true;
}

}  // namespace

int cmd_validate(const std::filesystem::path& config_dir, std::ostream& out, std::ostream& err) {
    if (!is_directory(config_dir, err)) {
        return kExitIo;
    }
    auto files = channel_files(config_dir);
    if (files.empty()) {
        out << config_dir.string() << ": no channel files (*.json)\n";
        return kExitValidation;
    }
    // Assembly needs live factories; an empty world is enough to build them.
    sim::SimWorld world(sim::Scenario{}, 0);
    auto registry = builtin_registry(world);
    std::map<std::string, std::string> owners;
    bool ok = true;
    for (const auto& file : files) {
        auto name = file.filename().string();
        try {
            auto doc = load_config(file);
            if (auto [it, fresh] = owners.emplace(doc.channel_id, name); !fresh) {
                out << name << ": /channel/id: Contract: channel id '" << doc.channel_id << "' already used by "
                    << it->second << "\n";
                ok = false;
                continue;
            }
            (void)assemble(doc, registry);
        } catch (const ConfigError& e) {
            report_config_error(name, e, out);
            ok = false;
        } catch (const Error& e) {
            out << name << ": -: Error: " << e.what() << "\n";
            ok = false;
        }
    }
    return ok ? kExitOk : kExitValidation;
}

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    if (!is_directory(options.config_dir, err)) {
        return kExitIo;
    }
    if (options.cycles && *options.cycles < 1) {
        err << "error: --cycles must be at least 1\n";
        return kExitValidation;
    }
    std::vector<ConfigDocument> configs;
    try {
        configs = load_config_dir(options.config_dir);
    } catch (const ConfigError& e) {
        report_config_error("config", e, err);
        return kExitValidation;
    }
    if (configs.empty()) {
        err << "error: no channel files in '" << options.config_dir.string() << "'\n";
        return kExitValidation;
    }
    std::error_code ec;
    if (!std::filesystem::is_regular_file(options.scenario_path, ec)) {
        err << "error: cannot read scenario '" << options.scenario_path.string() << "'\n";
        return kExitIo;
    }
    std::unique_ptr<Engine> engine;
    try {
        auto scenario = sim::load_scenario(options.scenario_path);
        auto seed = options.seed ? *options.seed : scenario.seed.value_or(0);
        engine = std::make_unique<Engine>(std::move(configs), std::move(scenario), seed);
    } catch (const ConfigError& e) {
        report_config_error("config", e, err);
        return kExitValidation;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    auto channels = engine->channels();
    try {
        DecisionLogWriter writer(options.log_path, options.force);
        DecisionRecorder recorder;
        auto on_report = [&](const CycleReport& report) {
            for (const auto& line : recorder.record(report)) {
                writer.append(line);
            }
            for (const auto& line : recorder.status_changes(channels, report.sim_time_s)) {
                writer.append(line);
            }
        };
        auto cycles = options.cycles.value_or(std::numeric_limits<std::int64_t>::max());
        engine->run(cycles, on_report, options.should_stop);
        for (const auto& line : recorder.final_status(channels, engine->clock().now())) {
            writer.append(line);
        }
    } catch (const LogIoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }

    auto counts = engine->world().job_counts();
    std::vector<const ChannelStatus*> errored;
    for (const auto* channel : channels) {
        const auto& status = channel->status();
        out << "channel " << status.channel_id << ": " << to_string(status.state) << " after " << status.cycle_id
            << " cycles\n";
        if (status.state == ChannelState::Error) {
            errored.push_back(&status);
        }
    }
    out << "jobs: " << counts.idle << " idle, " << counts.running << " running, " << counts.done << " done\n";
    out << "spent: " << engine->world().spent() << " over " << engine->world().ledger().size() << " requests\n";
    for (const auto* status : errored) {
        err << "error: channel " << status->channel_id << " ended in error: " << status->last_error.value_or("")
            << "\n";
    }
    return errored.empty() ? kExitOk : kExitChannelError;
}

namespace {

std::string fixed(double value) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << value;
    return out.str();
}

std::string joined(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
        out += (out.empty() ? "" : ", ") + item;
    }
    return out.empty() ? "-" : out;
}

void print_trace(const DecisionRecord& record, std::ostream& out) {
    out << "channel " << record.channel_id << " cycle " << record.cycle_id << " t=" << record.sim_time_s << "s "
        << record.outcome << "\n";
    out << "  products:\n";
    for (const auto& c : record.consumed) {
        out << "    " << c.product << " gen " << c.generation << " " << c.digest.substr(0, 16) << "\n";
    }
    out << "  facts:\n";
    for (const auto& [name, value] : record.fact_values) {
        out << "    " << name << " = " << value << "\n";
    }
    out << "  fired rules: " << joined(record.fired_rules) << "\n";
    out << "  requests:\n";
    for (const auto& r : record.requests) {
        out << "    " << r.entry_id << " slots " << r.slots << " cost " << fixed(r.projected_cost) << " fom "
            << fixed(r.fom_value) << " by " << joined(r.fired_rules) << "\n";
    }
    out << "  publish: " << to_string(record.publish_status) << ", cumulative spend "
        << fixed(record.cumulative_spend) << "\n";
    for (const auto& incident : record.incidents) {
        out << "  incident: " << incident.subject << ": " << incident.message << "\n";
    }
}

}  // namespace

int cmd_show(const ShowOptions& options, std::ostream& out, std::ostream& err) {
    if (options.what != "products" && options.what != "decisions" && options.what != "status") {
        err << "error: show expects products, decisions or status\n";
        return kExitValidation;
    }
    LogContents contents;
    try {
        contents = read_log(options.log_path);
    } catch (const LogIoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
    auto channel_ok = [&](const std::string& id) { return !options.channel || *options.channel == id; };

    // Product generations consumed by the selected cycle, when one is given.
    std::set<std::tuple<std::string, std::string, std::int64_t>> wanted;
    bool cycle_found = false;
    for (const auto& line : contents.lines) {
        if (const auto* record = std::get_if<DecisionRecord>(&line);
            record && channel_ok(record->channel_id) && options.cycle && record->cycle_id == *options.cycle) {
            cycle_found = true;
            for (const auto& c : record->consumed) {
                wanted.emplace(record->channel_id, c.product, c.generation);
            }
        }
    }

    if (options.what == "products") {
        for (const auto& line : contents.lines) {
            const auto* doc = std::get_if<ProductDocument>(&line);
            if (!doc || !channel_ok(doc->channel) || (options.product && *options.product != doc->name) ||
                (options.cycle && !wanted.contains({doc->channel, doc->name, doc->generation}))) {
                continue;
            }
            auto text = to_json(line);
            text.erase("kind");
            out << text.dump() << "\n";
        }
    } else if (options.what == "decisions") {
        for (const auto& line : contents.lines) {
            const auto* record = std::get_if<DecisionRecord>(&line);
            if (!record || !channel_ok(record->channel_id)) {
                continue;
            }
            if (options.cycle) {
                if (record->cycle_id == *options.cycle) {
                    print_trace(*record, out);
                }
                continue;
            }
            out << record->channel_id << " cycle " << record->cycle_id << " t=" << record->sim_time_s << "s "
                << record->outcome << " fired [" << joined(record->fired_rules) << "] requests "
                << record->requests.size() << " " << to_string(record->publish_status) << " spend "
                << fixed(record->cumulative_spend) << "\n";
        }
    } else {
        std::map<std::string, StatusLine> latest;
        for (const auto& line : contents.lines) {
            if (const auto* status = std::get_if<StatusLine>(&line); status && channel_ok(status->channel_id)) {
                latest[status->channel_id] = *status;
            }
        }
        for (const auto& [id, status] : latest) {
            out << id << ": " << to_string(status.state) << " cycle " << status.cycle_id << " t=" << status.sim_time_s
                << "s";
            if (status.last_error) {
                out << " last error: " << *status.last_error;
            }
            out << "\n";
        }
    }

    if (contents.corrupt) {
        err << "CorruptRecord: line " << contents.corrupt->line << ": " << contents.corrupt->message << "\n";
        return kExitIo;
    }
    if (options.cycle && !cycle_found) {
        err << "UnknownCycle: no decision record for cycle " << *options.cycle << "\n";
        return kExitValidation;
    }
    return kExitOk;
}

}  // namespace de
