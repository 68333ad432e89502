#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "de/runtime.hpp"

namespace fixture {

struct FnSource : de::Source {
    std::function<de::ProductMap(const de::CycleContext&)> fn;
    explicit FnSource(decltype(fn) f) : fn(std::move(f)) {}
    de::ProductMap acquire(const de::CycleContext& c) override { return fn(c); }
};

struct FnTransform : de::Transform {
    std::function<de::ProductMap(const de::CycleContext&, const de::DataBlockSnapshot&)> fn;
    explicit FnTransform(decltype(fn) f) : fn(std::move(f)) {}
    de::ProductMap transform(const de::CycleContext& c, const de::DataBlockSnapshot& s) override { return fn(c, s); }
};

struct CountingPublisher : de::Publisher {
    std::shared_ptr<int> calls = std::make_shared<int>(0);
    std::shared_ptr<std::vector<de::DataBlockSnapshot>> seen = std::make_shared<std::vector<de::DataBlockSnapshot>>();
    de::PublishOutcome publish(const de::CycleContext&, const de::DataBlockSnapshot& s,
                               const de::EvaluationResult&) override {
        ++*calls;
        seen->push_back(s);
        return {};
    }
};

inline de::ModuleSpec source(const std::string& name, std::vector<std::string> produces, de::SimTime period) {
    de::ModuleSpec m;
    m.name = name;
    m.kind = de::ModuleKind::Source;
    m.implementation = "test";
    m.produces = std::move(produces);
    m.period_s = period;
    return m;
}

inline de::ModuleSpec transform(const std::string& name, std::vector<std::string> consumes,
                                std::vector<std::string> produces) {
    de::ModuleSpec m;
    m.name = name;
    m.kind = de::ModuleKind::Transform;
    m.implementation = "test";
    m.consumes = std::move(consumes);
    m.produces = std::move(produces);
    return m;
}

inline de::ModuleSpec publisher(const std::string& name, std::vector<std::string> consumes) {
    de::ModuleSpec m;
    m.name = name;
    m.kind = de::ModuleKind::Publisher;
    m.implementation = "test";
    m.consumes = std::move(consumes);
    return m;
}

inline de::Fact fact(const std::string& name, const std::string& text) {
    return de::Fact{name, de::parse_expression(text), text};
}

inline de::Rule rule(const std::string& name, const std::string& condition, std::vector<std::string> actions,
                     std::vector<std::string> new_facts = {}) {
    return de::Rule{name, de::parse_expression(condition), condition, std::move(actions), std::move(new_facts)};
}

/// src -> raw, copy: raw -> out, fact ok = "<fact_text>", rule fire -> pub.
struct Minimal {
    de::ChannelSpec spec;
    std::shared_ptr<int> source_calls = std::make_shared<int>(0);
    std::shared_ptr<int> source_failures_left = std::make_shared<int>(0);
    std::shared_ptr<bool> transform_throws = std::make_shared<bool>(false);
    CountingPublisher* pub = nullptr;

    explicit Minimal(const std::string& id = "ch", const std::string& fact_text = "raw.v >= 0",
                     de::SimTime period = 60, de::SimTime source_period = 60) {
        spec.channel_id = id;
        spec.channel_period_s = period;
        spec.sources = {source("src", {"raw"}, source_period)};
        spec.transforms = {transform("copy", {"raw"}, {"out"})};
        spec.publishers = {publisher("pub", {"out"})};
        spec.facts = {fact("ok", fact_text)};
        spec.rules = {rule("fire", "ok", {"pub"})};
    }

    std::unique_ptr<de::Channel> build(de::ChannelOptions options = {}) {
        de::ChannelModules modules;
        auto calls = source_calls;
        auto failures = source_failures_left;
        modules.sources["src"] = std::make_unique<FnSource>([calls, failures](const de::CycleContext& c) {
            ++*calls;
            if (*failures > 0) {
                --*failures;
                throw de::ScriptedOutage("down");
            }
            return de::ProductMap{{"raw", de::Record{{"v", double(c.now)}}}};
        });
        auto throws = transform_throws;
        modules.transforms["copy"] =
            std::make_unique<FnTransform>([throws](const de::CycleContext&, const de::DataBlockSnapshot& s) {
                if (*throws) throw std::runtime_error("boom");
                return de::ProductMap{{"out", s.find("raw")->value()}};
            });
        auto p = std::make_unique<CountingPublisher>();
        pub = p.get();
        modules.publishers["pub"] = std::move(p);
        return std::make_unique<de::Channel>(spec, std::move(modules), options);
    }
};

}  // namespace fixture
