#include <doctest.h>

#include <fstream>
#include <sstream>

#include "de/engine.hpp"

using namespace de;

namespace {

const std::filesystem::path kConfigs = DE_SOURCE_DIR "/configs/reference";
const std::filesystem::path kScenario = DE_SOURCE_DIR "/scenarios/reference.json";

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "de_engine_test";
    std::filesystem::create_directories(dir);
    auto path = dir / name;
    std::filesystem::remove_all(path);
    return path;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(RunOptions options) {
    std::ostringstream out;
    std::ostringstream err;
    int code = cmd_run(options, out, err);
    return {code, out.str(), err.str()};
}

Result show(ShowOptions options) {
    std::ostringstream out;
    std::ostringstream err;
    int code = cmd_show(options, out, err);
    return {code, out.str(), err.str()};
}

RunOptions reference_run(const std::filesystem::path& log, std::int64_t cycles) {
    RunOptions options;
    options.config_dir = kConfigs;
    options.scenario_path = kScenario;
    options.cycles = cycles;
    options.log_path = log;
    return options;
}

}  // namespace

TEST_CASE("validate accepts the reference configs") {
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_validate(kConfigs, out, err) == kExitOk);
    CHECK(err.str().empty());
}

TEST_CASE("validate reports a broken file and a missing directory") {
    auto dir = scratch("broken_configs");
    std::filesystem::create_directories(dir);
    auto doc = nlohmann::json::parse(slurp(kConfigs / "provisioning.json"));
    doc["transforms"][1]["consumes"] = {"ghost"};
    std::ofstream(dir / "bad.json") << doc.dump();
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_validate(dir, out, err) == kExitValidation);
    CHECK(out.str().find("bad.json: ranking: ContractViolation:") != std::string::npos);
    CHECK(out.str().find("ghost") != std::string::npos);

    std::ostringstream out2;
    std::ostringstream err2;
    CHECK(cmd_validate(dir / "absent", out2, err2) == kExitIo);
}

TEST_CASE("two channels with one id are refused") {
    auto dir = scratch("dup_configs");
    std::filesystem::create_directories(dir);
    std::filesystem::copy_file(kConfigs / "provisioning.json", dir / "a.json");
    std::filesystem::copy_file(kConfigs / "provisioning.json", dir / "b.json");
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_validate(dir, out, err) == kExitValidation);
}

TEST_CASE("a reference run drains the queue and logs every cycle") {
    auto log = scratch("run.jsonl");
    auto result = run(reference_run(log, 20));
    CHECK(result.code == kExitOk);
    CHECK(result.out.find("channel provisioning: steady after 20 cycles") != std::string::npos);
    CHECK(result.out.find("0 idle, 0 running, 100 done") != std::string::npos);

    auto contents = read_log(log);
    CHECK_FALSE(contents.corrupt.has_value());
    int decisions = 0;
    for (const auto& line : contents.lines) decisions += std::holds_alternative<DecisionRecord>(line) ? 1 : 0;
    CHECK(decisions == 20);

    SUBCASE("refuses to overwrite without force") {
        CHECK(run(reference_run(log, 1)).code == kExitIo);
        auto forced = reference_run(log, 1);
        forced.force = true;
        CHECK(run(forced).code == kExitOk);
    }
    SUBCASE("show decisions for one cycle") {
        auto shown = show(ShowOptions{log, "decisions", 3, std::nullopt, std::nullopt});
        CHECK(shown.code == kExitOk);
        CHECK(shown.out.find("cycle 3") != std::string::npos);
        CHECK(shown.out.find("provision_needed") != std::string::npos);
    }
    SUBCASE("show an unknown cycle") {
        auto shown = show(ShowOptions{log, "decisions", 999, std::nullopt, std::nullopt});
        CHECK(shown.code == kExitValidation);
        CHECK(shown.err.find("UnknownCycle") != std::string::npos);
    }
    SUBCASE("show products filtered by name") {
        auto shown = show(ShowOptions{log, "products", std::nullopt, std::nullopt, std::string("ranked")});
        CHECK(shown.code == kExitOk);
        std::istringstream lines(shown.out);
        std::string line;
        int n = 0;
        while (std::getline(lines, line)) {
            auto doc = nlohmann::json::parse(line);
            CHECK(doc.at("name") == "ranked");
            ++n;
        }
        CHECK(n > 0);
    }
    SUBCASE("show status") {
        auto shown = show(ShowOptions{log, "status", std::nullopt, std::nullopt, std::nullopt});
        CHECK(shown.code == kExitOk);
        CHECK(shown.out.find("provisioning") != std::string::npos);
        CHECK(shown.out.find("steady") != std::string::npos);
    }
    SUBCASE("a truncated log shows the good records and exits with an I/O code") {
        auto text = slurp(log);
        text.resize(text.size() - 7);
        std::ofstream(log, std::ios::binary | std::ios::trunc) << text;
        auto shown = show(ShowOptions{log, "decisions", std::nullopt, std::nullopt, std::nullopt});
        CHECK(shown.code == kExitIo);
        CHECK(shown.err.find("CorruptRecord") != std::string::npos);
        CHECK_FALSE(shown.out.empty());
    }
}

TEST_CASE("runs with one seed are byte-identical") {
    auto a = scratch("a.jsonl");
    auto b = scratch("b.jsonl");
    CHECK(run(reference_run(a, 12)).code == kExitOk);
    CHECK(run(reference_run(b, 12)).code == kExitOk);
    CHECK(slurp(a) == slurp(b));
    auto c = scratch("c.jsonl");
    auto other = reference_run(c, 12);
    other.seed = 8;
    CHECK(run(other).code == kExitOk);
    CHECK(slurp(a) != slurp(c));
}

TEST_CASE("run argument and input errors map to exit codes") {
    auto log = scratch("errors.jsonl");
    auto options = reference_run(log, 0);
    CHECK(run(options).code == kExitValidation);
    options = reference_run(log, 1);
    options.scenario_path = "/nonexistent/scenario.json";
    CHECK(run(options).code == kExitIo);
    options = reference_run(log, 1);
    options.config_dir = "/nonexistent";
    CHECK(run(options).code == kExitIo);

    auto bad = scratch("bad_scenario.json");
    std::ofstream(bad) << R"({"jobs": [], "providers": [], "surprise": true})";
    options = reference_run(log, 1);
    options.scenario_path = bad;
    auto result = run(options);
    CHECK(result.code == kExitValidation);
    CHECK(result.err.find("surprise") != std::string::npos);
}

TEST_CASE("a channel whose source stays down ends the run with a channel error") {
    auto scenario = nlohmann::json::parse(slurp(kScenario));
    scenario["outages"] = {{{"target", "job_queue"}, {"start_s", 600}}};
    auto path = scratch("outage.json");
    std::ofstream(path) << scenario.dump();
    auto log = scratch("outage.jsonl");
    auto options = reference_run(log, 5);
    options.scenario_path = path;
    auto result = run(options);
    CHECK(result.code == kExitChannelError);
    CHECK(result.err.find("provisioning") != std::string::npos);
    auto contents = read_log(log);
    bool saw_error = false;
    for (const auto& line : contents.lines) {
        if (const auto* s = std::get_if<StatusLine>(&line)) saw_error |= s->state == ChannelState::Error;
    }
    CHECK(saw_error);
}

TEST_CASE("a sink outage records a failed publish and the next cycle retries") {
    auto scenario = nlohmann::json::parse(slurp(kScenario));
    scenario["outages"] = {{{"target", "sink"}, {"start_s", 0}, {"end_s", 600}}};
    auto path = scratch("sink.json");
    std::ofstream(path) << scenario.dump();
    auto log = scratch("sink.jsonl");
    auto options = reference_run(log, 3);
    options.scenario_path = path;
    CHECK(run(options).code == kExitOk);
    std::vector<DecisionRecord> decisions;
    for (const auto& line : read_log(log).lines) {
        if (const auto* d = std::get_if<DecisionRecord>(&line)) decisions.push_back(*d);
    }
    REQUIRE(decisions.size() == 3);
    CHECK(decisions[0].publish_status == PublishStatus::Failed);
    CHECK(decisions[0].requests.empty());
    CHECK(decisions[0].cumulative_spend == 0.0);
    CHECK(decisions[1].publish_status == PublishStatus::Published);
    CHECK_FALSE(decisions[1].requests.empty());
}
