#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "de/channel.hpp"
#include "de/modules.hpp"
#include "de/runtime.hpp"

namespace de {

struct ModuleEntry {
    std::string name;
    std::string implementation;
    std::vector<std::string> consumes;
    std::vector<std::string> produces;
    std::optional<SimTime> period_s;
    nlohmann::json params = nlohmann::json::object();

    bool operator==(const ModuleEntry&) const = default;
};

struct FactEntry {
    std::string name;
    std::string expression;

    bool operator==(const FactEntry&) const = default;
};

struct RuleEntry {
    std::string name;
    std::string condition;
    std::vector<std::string> actions;
    std::vector<std::string> new_facts;

    bool operator==(const RuleEntry&) const = default;
};

/// One channel's configuration file. Expression texts are kept verbatim.
struct ConfigDocument {
    std::string channel_id;
    SimTime period_s = 0;
    std::vector<ModuleEntry> sources;
    std::vector<ModuleEntry> transforms;
    std::vector<ModuleEntry> publishers;
    std::vector<FactEntry> facts;
    std::vector<RuleEntry> rules;

    bool operator==(const ConfigDocument&) const = default;
};

enum class ConfigErrorKind { Parse, Schema, UnknownImplementation, Expression, Contract, Params };

[[nodiscard]] std::string_view to_string(ConfigErrorKind kind) noexcept;

/// Loading or assembly failure. `entity` locates the problem: a JSON pointer
/// for schema errors, a line:column for parse errors, a module/fact/rule name
/// otherwise. Contract errors carry every violation found.
class ConfigError : public Error {
public:
    ConfigError(ConfigErrorKind kind, std::string entity, const std::string& message,
                std::vector<Violation> violations = {});

    [[nodiscard]] ConfigErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::string& entity() const noexcept { return entity_; }
    [[nodiscard]] const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    ConfigErrorKind kind_;
    std::string entity_;
    std::vector<Violation> violations_;
};

/// Parse a channel document (JSON) under the strict schema.
[[nodiscard]] ConfigDocument parse_config(std::string_view text);
[[nodiscard]] ConfigDocument config_from_json(const nlohmann::json& document);
[[nodiscard]] ConfigDocument load_config(const std::filesystem::path& path);

/// Canonical form: the document's JSON with sorted keys and defaults spelled out.
[[nodiscard]] nlohmann::json to_json(const ConfigDocument& doc);
[[nodiscard]] std::string canonical_text(const ConfigDocument& doc);

/// Channel files of a config directory (*.json), sorted by name.
[[nodiscard]] std::vector<std::filesystem::path> channel_files(const std::filesystem::path& dir);

/// Implementation key -> factory. Factories read their params from the
/// ModuleSpec and throw to reject them.
class ModuleRegistry {
public:
    using SourceFactory = std::function<std::unique_ptr<Source>(const ModuleSpec&)>;
    using TransformFactory = std::function<std::unique_ptr<Transform>(const ModuleSpec&)>;
    using PublisherFactory = std::function<std::unique_ptr<Publisher>(const ModuleSpec&)>;

    void add_source(const std::string& key, SourceFactory factory);
    void add_transform(const std::string& key, TransformFactory factory);
    void add_publisher(const std::string& key, PublisherFactory factory);

    [[nodiscard]] std::optional<ModuleKind> kind_of(const std::string& key) const;
    [[nodiscard]] std::vector<std::string> keys() const;

    [[nodiscard]] std::unique_ptr<Source> make_source(const ModuleSpec& spec) const;
    [[nodiscard]] std::unique_ptr<Transform> make_transform(const ModuleSpec& spec) const;
    [[nodiscard]] std::unique_ptr<Publisher> make_publisher(const ModuleSpec& spec) const;

private:
    void claim(const std::string& key, ModuleKind kind);

    std::map<std::string, ModuleKind> kinds_;
    std::map<std::string, SourceFactory> sources_;
    std::map<std::string, TransformFactory> transforms_;
    std::map<std::string, PublisherFactory> publishers_;
};

/// Spec without instances: resolves implementation keys, parses and checks
/// every expression, and runs validate_channel. Throws ConfigError.
[[nodiscard]] ChannelSpec build_channel_spec(const ConfigDocument& doc, const ModuleRegistry& registry);

/// Full assembly into a runnable channel. Throws ConfigError; nothing is
/// returned or retained on failure.
[[nodiscard]] std::unique_ptr<Channel> assemble(const ConfigDocument& doc, const ModuleRegistry& registry,
                                                ChannelOptions options = {});

}  // namespace de
