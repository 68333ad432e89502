#pragma once

#include <map>
#include <string>
#include <vector>

#include "de/datablock.hpp"
#include "de/logic_engine.hpp"
#include "de/request_record.hpp"

namespace de {

struct CycleContext {
    std::string channel_id;
    std::int64_t cycle_id = 0;
    SimTime now = 0;
};

/// Products returned by a module, keyed by product name.
using ProductMap = std::map<std::string, Payload>;

/// Gathers data from an external system. Called when due; may throw to
/// signal a failed fetch, which the framework retries.
class Source {
public:
    virtual ~Source() = default;
    virtual ProductMap acquire(const CycleContext& context) = 0;
};

/// Converts consumed products into new ones. `inputs` holds exactly the
/// declared consumes.
class Transform {
public:
    virtual ~Transform() = default;
    virtual ProductMap transform(const CycleContext& context, const DataBlockSnapshot& inputs) = 0;
};

enum class PublishStatus { Published, Failed, None };

[[nodiscard]] std::string_view to_string(PublishStatus status) noexcept;
[[nodiscard]] PublishStatus publish_status_from_string(std::string_view text);

struct PublishOutcome {
    PublishStatus status = PublishStatus::Published;
    std::string detail;
    /// Requests acknowledged by the external system.
    std::vector<RequestRecord> requests;
};

/// Delivers data to an external system when a fired rule names it.
class Publisher {
public:
    virtual ~Publisher() = default;
    virtual PublishOutcome publish(const CycleContext& context, const DataBlockSnapshot& inputs,
                                   const EvaluationResult& evaluation) = 0;
};

}  // namespace de
