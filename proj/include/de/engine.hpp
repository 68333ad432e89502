#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "de/config.hpp"
#include "de/datablock.hpp"
#include "de/decision_log.hpp"
#include "de/runtime.hpp"
#include "de/sim.hpp"

namespace de {

/// Registry with every built-in implementation: the simulated sources plus
/// the provisioning transforms and publisher bound to `world`.
[[nodiscard]] ModuleRegistry builtin_registry(sim::SimWorld& world);

/// Channels assembled from config documents and run against one simulated
/// world on one clock.
class Engine {
public:
    Engine(std::vector<ConfigDocument> configs, sim::Scenario scenario, std::uint64_t seed);

    /// Runs up to `n_cycles` cycles per channel; `on_report` sees every cycle.
    void run(std::int64_t n_cycles, const std::function<void(const CycleReport&)>& on_report = {},
             const std::function<bool()>& should_stop = {});

    [[nodiscard]] sim::SimWorld& world() noexcept { return *world_; }
    [[nodiscard]] DataBlock& datablock() noexcept { return datablock_; }
    [[nodiscard]] const Clock& clock() const noexcept { return clock_; }
    [[nodiscard]] std::vector<Channel*> channels() const;

private:
    std::unique_ptr<sim::SimWorld> world_;
    ModuleRegistry registry_;
    std::vector<std::unique_ptr<Channel>> channels_;
    DataBlock datablock_;
    Clock clock_;
};

/// Config documents from every channel file of a directory. Throws
/// ConfigError for a bad file; the message names the file.
[[nodiscard]] std::vector<ConfigDocument> load_config_dir(const std::filesystem::path& dir);

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitChannelError = 2, kExitIo = 3 };

/// Loads, assembles and validates every channel file; prints one line per
/// problem as "<file>: <entity>: <kind>: <message>".
int cmd_validate(const std::filesystem::path& config_dir, std::ostream& out, std::ostream& err);

struct RunOptions {
    std::filesystem::path config_dir;
    std::filesystem::path scenario_path;
    /// Absent means run until `should_stop` says so.
    std::optional<std::int64_t> cycles;
    /// Overrides the scenario seed; both absent means 0.
    std::optional<std::uint64_t> seed;
    std::filesystem::path log_path;
    bool force = false;
    std::function<bool()> should_stop;
};

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct ShowOptions {
    std::filesystem::path log_path;
    /// "products", "decisions" or "status".
    std::string what;
    std::optional<std::int64_t> cycle;
    std::optional<std::string> channel;
    std::optional<std::string> product;
};

/// UnknownCycle exits 1, CorruptRecord exits 3 after printing the records
/// before it.
int cmd_show(const ShowOptions& options, std::ostream& out, std::ostream& err);

}  // namespace de
