#include "de/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace de {

std::string_view to_string(ConfigErrorKind kind) noexcept {
    switch (kind) {
        case ConfigErrorKind::Parse: return "ParseError";
        case ConfigErrorKind::Schema: return "SchemaError";
        case ConfigErrorKind::UnknownImplementation: return "UnknownImplementation";
        case ConfigErrorKind::Expression: return "ExpressionError";
        case ConfigErrorKind::Contract: return "ContractViolation";
        case ConfigErrorKind::Params: return "ParamsError";
    }
    return "ConfigError";
}

ConfigError::ConfigError(ConfigErrorKind kind, std::string entity, const std::string& message,
                         std::vector<Violation> violations)
    : Error(std::string(to_string(kind)) + " at " + entity + ": " + message),
      kind_(kind),
      entity_(std::move(entity)),
      violations_(std::move(violations)) {}

namespace {

using json = nlohmann::json;

[[noreturn]] void schema_error(const std::string& where, const std::string& message) {
    throw ConfigError(ConfigErrorKind::Schema, where.empty() ? "/" : where, message);
}

void reject_unknown_keys(const json& object, const std::string& where, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : object.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            schema_error(where + "/" + key, "unknown key '" + key + "'");
        }
    }
}

const json& required(const json& object, const std::string& where, const std::string& key) {
    auto it = object.find(key);
    if (it == object.end()) {
        schema_error(where + "/" + key, "missing required key '" + key + "'");
    }
    return *it;
}

const json& as_object(const json& value, const std::string& where) {
    if (!value.is_object()) {
        schema_error(where, std::string("expected an object, got ") + value.type_name());
    }
    return value;
}

const json& as_array(const json& value, const std::string& where) {
    if (!value.is_array()) {
        schema_error(where, std::string("expected a list, got ") + value.type_name());
    }
    return value;
}

std::string as_string(const json& value, const std::string& where) {
    if (!value.is_string()) {
        schema_error(where, std::string("expected a string, got ") + value.type_name());
    }
    return value.get<std::string>();
}

SimTime as_integer(const json& value, const std::string& where) {
    if (!value.is_number_integer()) {
        schema_error(where, std::string("expected an integer, got ") + value.type_name());
    }
    return value.get<SimTime>();
}

std::vector<std::string> as_string_list(const json& value, const std::string& where) {
    std::vector<std::string> out;
    const auto& list = as_array(value, where);
    for (std::size_t i = 0; i < list.size(); ++i) {
        out.push_back(as_string(list[i], where + "/" + std::to_string(i)));
    }
    return out;
}

bool is_scalar(const json& value) {
    return value.is_string() || value.is_number() || value.is_boolean();
}

bool is_scalar_or_list(const json& value) {
    return is_scalar(value) || (value.is_array() && std::all_of(value.begin(), value.end(), is_scalar));
}

void check_params(const json& params, const std::string& where) {
    as_object(params, where);
    for (const auto& [key, value] : params.items()) {
        auto at = where + "/" + key;
        if (is_scalar_or_list(value)) {
            continue;
        }
        if (value.is_object()) {
            for (const auto& [inner_key, inner] : value.items()) {
                if (!is_scalar_or_list(inner)) {
                    schema_error(at + "/" + inner_key, "nested params take scalars or lists of scalars");
                }
            }
            continue;
        }
        schema_error(at, "params take scalars, lists of scalars, or one level of maps");
    }
}

ModuleEntry module_from_json(const json& value, const std::string& where, ModuleKind kind) {
    as_object(value, where);
    reject_unknown_keys(value, where, {"name", "implementation", "consumes", "produces", "period_s", "params"});
    ModuleEntry entry;
    entry.name = as_string(required(value, where, "name"), where + "/name");
    entry.implementation = as_string(required(value, where, "implementation"), where + "/implementation");

    bool needs_consumes = kind == ModuleKind::Transform || kind == ModuleKind::Publisher;
    bool needs_produces = kind == ModuleKind::Source || kind == ModuleKind::Transform;
    if (needs_consumes || value.contains("consumes")) {
        entry.consumes = as_string_list(required(value, where, "consumes"), where + "/consumes");
    }
    if (needs_produces || value.contains("produces")) {
        entry.produces = as_string_list(required(value, where, "produces"), where + "/produces");
    }
    if (kind == ModuleKind::Source) {
        entry.period_s = as_integer(required(value, where, "period_s"), where + "/period_s");
    } else if (value.contains("period_s")) {
        schema_error(where + "/period_s", "period_s applies to sources only");
    }
    if (value.contains("params")) {
        check_params(value.at("params"), where + "/params");
        entry.params = value.at("params");
    }
    return entry;
}

std::vector<ModuleEntry> modules_from_json(const json& document, const std::string& section, ModuleKind kind) {
    auto where = "/" + section;
    std::vector<ModuleEntry> out;
    const auto& list = as_array(required(document, "", section), where);
    for (std::size_t i = 0; i < list.size(); ++i) {
        out.push_back(module_from_json(list[i], where + "/" + std::to_string(i), kind));
    }
    return out;
}

std::string location_of(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return std::to_string(line) + ":" + std::to_string(column);
}

json module_to_json(const ModuleEntry& entry, ModuleKind kind) {
    json out{{"name", entry.name},
             {"implementation", entry.implementation},
             {"consumes", entry.consumes},
             {"produces", entry.produces},
             {"params", entry.params}};
    if (kind == ModuleKind::Source && entry.period_s) {
        out["period_s"] = *entry.period_s;
    }
    return out;
}

}  // namespace

ConfigDocument config_from_json(const json& document) {
    as_object(document, "");
    reject_unknown_keys(document, "", {"channel", "sources", "transforms", "publishers", "facts", "rules"});

    ConfigDocument doc;
    const auto& channel = as_object(required(document, "", "channel"), "/channel");
    reject_unknown_keys(channel, "/channel", {"id", "period_s"});
    doc.channel_id = as_string(required(channel, "/channel", "id"), "/channel/id");
    doc.period_s = as_integer(required(channel, "/channel", "period_s"), "/channel/period_s");

    doc.sources = modules_from_json(document, "sources", ModuleKind::Source);
    doc.transforms = modules_from_json(document, "transforms", ModuleKind::Transform);
    doc.publishers = modules_from_json(document, "publishers", ModuleKind::Publisher);

    const auto& facts = as_array(required(document, "", "facts"), "/facts");
    for (std::size_t i = 0; i < facts.size(); ++i) {
        auto where = "/facts/" + std::to_string(i);
        as_object(facts[i], where);
        reject_unknown_keys(facts[i], where, {"name", "expression"});
        doc.facts.push_back(FactEntry{as_string(required(facts[i], where, "name"), where + "/name"),
                                      as_string(required(facts[i], where, "expression"), where + "/expression")});
    }

    const auto& rules = as_array(required(document, "", "rules"), "/rules");
    for (std::size_t i = 0; i < rules.size(); ++i) {
        auto where = "/rules/" + std::to_string(i);
        as_object(rules[i], where);
        reject_unknown_keys(rules[i], where, {"name", "condition", "actions", "new_facts"});
        RuleEntry rule;
        rule.name = as_string(required(rules[i], where, "name"), where + "/name");
        rule.condition = as_string(required(rules[i], where, "condition"), where + "/condition");
        rule.actions = as_string_list(required(rules[i], where, "actions"), where + "/actions");
        if (rules[i].contains("new_facts")) {
            rule.new_facts = as_string_list(rules[i].at("new_facts"), where + "/new_facts");
        }
        doc.rules.push_back(std::move(rule));
    }
    return doc;
}

ConfigDocument parse_config(std::string_view text) {
    json document;
    try {
        document = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(ConfigErrorKind::Parse, location_of(text, e.byte), e.what());
    }
    return config_from_json(document);
}

ConfigDocument load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot read '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

json to_json(const ConfigDocument& doc) {
    auto modules = [](const std::vector<ModuleEntry>& entries, ModuleKind kind) {
        json out = json::array();
        for (const auto& entry : entries) {
            out.push_back(module_to_json(entry, kind));
        }
        return out;
    };
    json facts = json::array();
    for (const auto& fact : doc.facts) {
        facts.push_back({{"name", fact.name}, {"expression", fact.expression}});
    }
    json rules = json::array();
    for (const auto& rule : doc.rules) {
        rules.push_back({{"name", rule.name},
                         {"condition", rule.condition},
                         {"actions", rule.actions},
                         {"new_facts", rule.new_facts}});
    }
    return {{"channel", {{"id", doc.channel_id}, {"period_s", doc.period_s}}},
            {"sources", modules(doc.sources, ModuleKind::Source)},
            {"transforms", modules(doc.transforms, ModuleKind::Transform)},
            {"publishers", modules(doc.publishers, ModuleKind::Publisher)},
            {"facts", facts},
            {"rules", rules}};
}

std::string canonical_text(const ConfigDocument& doc) {
    return to_json(doc).dump(2) + "\n";
}

std::vector<std::filesystem::path> channel_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void ModuleRegistry::claim(const std::string& key, ModuleKind kind) {
    if (!kinds_.emplace(key, kind).second) {
        throw std::invalid_argument("implementation '" + key + "' registered twice");
    }
}

void ModuleRegistry::add_source(const std::string& key, SourceFactory factory) {
    claim(key, ModuleKind::Source);
    sources_.emplace(key, std::move(factory));
}

void ModuleRegistry::add_transform(const std::string& key, TransformFactory factory) {
    claim(key, ModuleKind::Transform);
    transforms_.emplace(key, std::move(factory));
}

void ModuleRegistry::add_publisher(const std::string& key, PublisherFactory factory) {
    claim(key, ModuleKind::Publisher);
    publishers_.emplace(key, std::move(factory));
}

std::optional<ModuleKind> ModuleRegistry::kind_of(const std::string& key) const {
    auto it = kinds_.find(key);
    if (it == kinds_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<std::string> ModuleRegistry::keys() const {
    std::vector<std::string> out;
    for (const auto& [key, kind] : kinds_) {
        out.push_back(key);
    }
    return out;
}

std::unique_ptr<Source> ModuleRegistry::make_source(const ModuleSpec& spec) const {
    return sources_.at(spec.implementation)(spec);
}

std::unique_ptr<Transform> ModuleRegistry::make_transform(const ModuleSpec& spec) const {
    return transforms_.at(spec.implementation)(spec);
}

std::unique_ptr<Publisher> ModuleRegistry::make_publisher(const ModuleSpec& spec) const {
    return publishers_.at(spec.implementation)(spec);
}

ChannelSpec build_channel_spec(const ConfigDocument& doc, const ModuleRegistry& registry) {
    ChannelSpec spec;
    spec.channel_id = doc.channel_id;
    spec.channel_period_s = doc.period_s;

    auto resolve = [&](const std::vector<ModuleEntry>& entries, ModuleKind kind) {
        std::vector<ModuleSpec> out;
        for (const auto& entry : entries) {
            auto registered = registry.kind_of(entry.implementation);
            if (!registered) {
                throw ConfigError(ConfigErrorKind::UnknownImplementation, entry.name,
                                  "no implementation registered as '" + entry.implementation + "'");
            }
            if (*registered != kind) {
                throw ConfigError(ConfigErrorKind::UnknownImplementation, entry.name,
                                  "'" + entry.implementation + "' is a " + std::string(to_string(*registered)) +
                                      ", declared as a " + std::string(to_string(kind)));
            }
            out.push_back(ModuleSpec{entry.name, kind, entry.implementation, entry.consumes, entry.produces,
                                     entry.params, entry.period_s});
        }
        return out;
    };
    spec.sources = resolve(doc.sources, ModuleKind::Source);
    spec.transforms = resolve(doc.transforms, ModuleKind::Transform);
    spec.publishers = resolve(doc.publishers, ModuleKind::Publisher);

    std::set<std::string, std::less<>> products;
    for (const auto* group : {&spec.sources, &spec.transforms}) {
        for (const auto& module : *group) {
            products.insert(module.produces.begin(), module.produces.end());
        }
    }

    // Syntax first, then the channel contracts, then what the expressions
    // reference: a missing module is reported as such, not as an unknown
    // product in some fact.
    for (const auto& entry : doc.facts) {
        try {
            spec.facts.push_back(Fact{entry.name, parse_expression(entry.expression), entry.expression});
        } catch (const SyntaxError& e) {
            throw ConfigError(ConfigErrorKind::Expression, "fact " + entry.name,
                              "'" + entry.expression + "' " + e.what());
        }
    }
    for (const auto& entry : doc.rules) {
        try {
            spec.rules.push_back(
                Rule{entry.name, parse_expression(entry.condition), entry.condition, entry.actions, entry.new_facts});
        } catch (const SyntaxError& e) {
            throw ConfigError(ConfigErrorKind::Expression, "rule " + entry.name,
                              "'" + entry.condition + "' " + e.what());
        }
    }

    if (auto violations = validate_channel(spec); !violations.empty()) {
        std::string summary = to_string(violations.front());
        if (violations.size() > 1) {
            summary += " (+" + std::to_string(violations.size() - 1) + " more)";
        }
        auto module = violations.front().module;
        throw ConfigError(ConfigErrorKind::Contract, std::move(module), summary, std::move(violations));
    }

    for (const auto& fact : spec.facts) {
        try {
            check_fact_expression(*fact.expression, products);
        } catch (const SyntaxError& e) {
            throw ConfigError(ConfigErrorKind::Expression, "fact " + fact.name, "'" + fact.text + "' " + e.what());
        }
    }
    for (const auto& rule : spec.rules) {
        try {
            check_rule_condition(*rule.condition);
        } catch (const SyntaxError& e) {
            throw ConfigError(ConfigErrorKind::Expression, "rule " + rule.name, "'" + rule.text + "' " + e.what());
        }
    }
    return spec;
}

std::unique_ptr<Channel> assemble(const ConfigDocument& doc, const ModuleRegistry& registry, ChannelOptions options) {
    auto spec = build_channel_spec(doc, registry);
    ChannelModules modules;
    auto instantiate = [&](const ModuleSpec& module, auto make, auto& into) {
        try {
            auto instance = make(module);
            if (!instance) {
                throw Error("factory returned nothing");
            }
            into.emplace(module.name, std::move(instance));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(ConfigErrorKind::Params, module.name, e.what());
        }
    };
    for (const auto& module : spec.sources) {
        instantiate(module, [&](const ModuleSpec& m) { return registry.make_source(m); }, modules.sources);
    }
    for (const auto& module : spec.transforms) {
        instantiate(module, [&](const ModuleSpec& m) { return registry.make_transform(m); }, modules.transforms);
    }
    for (const auto& module : spec.publishers) {
        instantiate(module, [&](const ModuleSpec& m) { return registry.make_publisher(m); }, modules.publishers);
    }
    return std::make_unique<Channel>(std::move(spec), std::move(modules), options);
}

}  // namespace de
