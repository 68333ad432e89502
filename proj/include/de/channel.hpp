#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "de/logic_engine.hpp"
#include "de/value.hpp"

namespace de {

enum class ModuleKind { Source, Transform, LogicEngine, Publisher };

[[nodiscard]] std::string_view to_string(ModuleKind kind) noexcept;

struct ModuleSpec {
    std::string name;
    ModuleKind kind = ModuleKind::Source;
    std::string implementation;
    std::vector<std::string> consumes;
    std::vector<std::string> produces;
    nlohmann::json params = nlohmann::json::object();
    std::optional<SimTime> period_s;  // sources only

    bool operator==(const ModuleSpec&) const = default;
};

struct ChannelSpec {
    std::string channel_id;
    SimTime channel_period_s = 0;
    std::vector<ModuleSpec> sources;
    std::vector<ModuleSpec> transforms;
    std::vector<ModuleSpec> publishers;
    std::vector<Fact> facts;
    std::vector<Rule> rules;

    [[nodiscard]] const ModuleSpec* find_module(const std::string& name) const;
};

/// One broken contract. `module` is the offending entity (module, fact or
/// rule name, or the channel id), `product` the product or name involved.
struct Violation {
    std::string module;
    std::string product;
    std::string contract;
    std::string message;

    bool operator==(const Violation&) const = default;
};

[[nodiscard]] std::string to_string(const Violation& violation);

namespace contract {
inline constexpr const char* kMinimumComplement = "minimum module complement";
inline constexpr const char* kInvalidName = "invalid name";
inline constexpr const char* kDuplicateName = "duplicate name";
inline constexpr const char* kSourceConsumes = "sources consume nothing";
inline constexpr const char* kSourceProduces = "sources produce at least one product";
inline constexpr const char* kSourcePeriod = "sources have a positive period";
inline constexpr const char* kTransformConsumes = "transforms consume at least one product";
inline constexpr const char* kTransformProduces = "transforms produce at least one product";
inline constexpr const char* kNoProduces = "publishers and the logic engine produce nothing";
inline constexpr const char* kDuplicateProducer = "product names are produced once";
inline constexpr const char* kDanglingInput = "consumed products are produced in the channel";
inline constexpr const char* kTransformCycle = "transform graph is acyclic";
inline constexpr const char* kChannelPeriod = "channel period is positive";
inline constexpr const char* kUnknownFact = "rule conditions reference known facts";
inline constexpr const char* kDerivedCollision = "derived fact names are unique";
inline constexpr const char* kUnknownAction = "rule actions name declared publishers";
}  // namespace contract

/// Empty iff every channel contract holds.
[[nodiscard]] std::vector<Violation> validate_channel(const ChannelSpec& spec);

/// Groups of transforms lying on a dependency cycle, each in declaration order.
[[nodiscard]] std::vector<std::vector<std::string>> transform_cycles(const ChannelSpec& spec);

/// Topological order of the transforms, ties broken by declaration order.
/// Throws CycleDetected.
[[nodiscard]] std::vector<std::string> transform_order(const ChannelSpec& spec);

}  // namespace de
