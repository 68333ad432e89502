#include "de/channel.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "de/errors.hpp"

namespace de {

std::string_view to_string(ModuleKind kind) noexcept {
    switch (kind) {
        case ModuleKind::Source: return "source";
        case ModuleKind::Transform: return "transform";
        case ModuleKind::LogicEngine: return "logic_engine";
        case ModuleKind::Publisher: return "publisher";
    }
    return "module";
}

const ModuleSpec* ChannelSpec::find_module(const std::string& name) const {
    for (const auto* group : {&sources, &transforms, &publishers}) {
        for (const auto& module : *group) {
            if (module.name == name) {
                return &module;
            }
        }
    }
    return nullptr;
}

std::string to_string(const Violation& violation) {
    std::string out = violation.module;
    if (!violation.product.empty()) {
        out += " [" + violation.product + "]";
    }
    return out + ": " + violation.contract + ": " + violation.message;
}

namespace {

// Edge a -> b when transform b consumes something transform a produces.
std::vector<std::vector<std::size_t>> transform_edges(const ChannelSpec& spec) {
    std::map<std::string, std::size_t> producer;
    for (std::size_t i = 0; i < spec.transforms.size(); ++i) {
        for (const auto& product : spec.transforms[i].produces) {
            producer.emplace(product, i);
        }
    }
    std::vector<std::vector<std::size_t>> edges(spec.transforms.size());
    for (std::size_t b = 0; b < spec.transforms.size(); ++b) {
        for (const auto& product : spec.transforms[b].consumes) {
            if (auto it = producer.find(product); it != producer.end()) {
                auto& out = edges[it->second];
                if (std::find(out.begin(), out.end(), b) == out.end()) {
                    out.push_back(b);
                }
            }
        }
    }
    return edges;
}

// Tarjan's strongly connected components.
class SccFinder {
public:
    explicit SccFinder(const std::vector<std::vector<std::size_t>>& edges)
        : edges_(edges), index_(edges.size(), -1), low_(edges.size(), 0), on_stack_(edges.size(), false) {
        for (std::size_t v = 0; v < edges_.size(); ++v) {
            if (index_[v] < 0) {
                visit(v);
            }
        }
    }

    std::vector<std::vector<std::size_t>> components;

private:
    void visit(std::size_t v) {
        index_[v] = low_[v] = counter_++;
        stack_.push_back(v);
        on_stack_[v] = true;
        for (auto w : edges_[v]) {
            if (index_[w] < 0) {
                visit(w);
                low_[v] = std::min(low_[v], low_[w]);
            } else if (on_stack_[w]) {
                low_[v] = std::min(low_[v], index_[w]);
            }
        }
        if (low_[v] == index_[v]) {
            std::vector<std::size_t> component;
            std::size_t w = 0;
            do {
                w = stack_.back();
                stack_.pop_back();
                on_stack_[w] = false;
                component.push_back(w);
            } while (w != v);
            std::sort(component.begin(), component.end());
            components.push_back(std::move(component));
        }
    }

    const std::vector<std::vector<std::size_t>>& edges_;
    std::vector<int> index_;
    std::vector<int> low_;
    std::vector<bool> on_stack_;
    std::vector<std::size_t> stack_;
    int counter_ = 0;
};

}  // namespace

std::vector<std::vector<std::string>> transform_cycles(const ChannelSpec& spec) {
    auto edges = transform_edges(spec);
    SccFinder finder(edges);
    std::vector<std::vector<std::string>> cycles;
    for (const auto& component : finder.components) {
        bool self_loop = component.size() == 1 &&
                         std::find(edges[component[0]].begin(), edges[component[0]].end(), component[0]) !=
                             edges[component[0]].end();
        if (component.size() > 1 || self_loop) {
            std::vector<std::string> names;
            for (auto i : component) {
                names.push_back(spec.transforms[i].name);
            }
            cycles.push_back(std::move(names));
        }
    }
    std::sort(cycles.begin(), cycles.end(), [&](const auto& a, const auto& b) {
        auto position = [&](const std::string& name) {
            return std::find_if(spec.transforms.begin(), spec.transforms.end(),
                                [&](const auto& t) { return t.name == name; }) -
                   spec.transforms.begin();
        };
        return position(a.front()) < position(b.front());
    });
    return cycles;
}

std::vector<std::string> transform_order(const ChannelSpec& spec) {
    auto edges = transform_edges(spec);
    std::vector<int> pending(edges.size(), 0);
    for (const auto& out : edges) {
        for (auto b : out) {
            ++pending[b];
        }
    }
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (pending[i] == 0) {
            ready.insert(i);
        }
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto next = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(spec.transforms[next].name);
        for (auto b : edges[next]) {
            if (--pending[b] == 0) {
                ready.insert(b);
            }
        }
    }
    if (order.size() != spec.transforms.size()) {
        throw CycleDetected("transforms of channel '" + spec.channel_id + "' form a cycle");
    }
    return order;
}

std::vector<Violation> validate_channel(const ChannelSpec& spec) {
    std::vector<Violation> out;
    auto flag = [&](std::string module, std::string product, const char* contract, std::string message) {
        out.push_back(Violation{std::move(module), std::move(product), contract, std::move(message)});
    };
    const auto& channel = spec.channel_id;

    if (!is_identifier(channel)) {
        flag(channel, "", contract::kInvalidName, "channel id is not an identifier");
    }
    if (spec.channel_period_s <= 0) {
        flag(channel, "", contract::kChannelPeriod, "channel period must be positive");
    }
    if (spec.sources.empty()) {
        flag(channel, "", contract::kMinimumComplement, "channel has no source");
    }
    if (spec.transforms.empty()) {
        flag(channel, "", contract::kMinimumComplement, "channel has no transform");
    }
    if (spec.publishers.empty()) {
        flag(channel, "", contract::kMinimumComplement, "channel has no publisher");
    }
    if (spec.facts.empty()) {
        flag(channel, "", contract::kMinimumComplement, "logic engine has no facts");
    }

    std::set<std::string> module_names;
    std::map<std::string, std::string> producer_of;
    for (const auto* group : {&spec.sources, &spec.transforms, &spec.publishers}) {
        for (const auto& module : *group) {
            if (!is_identifier(module.name)) {
                flag(module.name, "", contract::kInvalidName, "module name is not an identifier");
            } else if (!module_names.insert(module.name).second) {
                flag(module.name, "", contract::kDuplicateName, "module name declared twice");
            }
            for (const auto& product : module.produces) {
                if (!is_identifier(product)) {
                    flag(module.name, product, contract::kInvalidName, "product name is not an identifier");
                }
                auto [it, inserted] = producer_of.emplace(product, module.name);
                if (!inserted) {
                    flag(module.name, product, contract::kDuplicateProducer,
                         "also produced by '" + it->second + "'");
                }
            }
        }
    }

    for (const auto& source : spec.sources) {
        for (const auto& product : source.consumes) {
            flag(source.name, product, contract::kSourceConsumes, "source declares an input");
        }
        if (source.produces.empty()) {
            flag(source.name, "", contract::kSourceProduces, "source produces nothing");
        }
        if (!source.period_s || *source.period_s <= 0) {
            flag(source.name, "", contract::kSourcePeriod, "source period must be positive");
        }
    }
    for (const auto& transform : spec.transforms) {
        if (transform.consumes.empty()) {
            flag(transform.name, "", contract::kTransformConsumes, "transform consumes nothing");
        }
        if (transform.produces.empty()) {
            flag(transform.name, "", contract::kTransformProduces, "transform produces nothing");
        }
    }
    for (const auto& publisher : spec.publishers) {
        for (const auto& product : publisher.produces) {
            flag(publisher.name, product, contract::kNoProduces, "publisher declares an output");
        }
    }
    for (const auto* group : {&spec.transforms, &spec.publishers}) {
        for (const auto& module : *group) {
            for (const auto& product : module.consumes) {
                if (!producer_of.contains(product)) {
                    flag(module.name, product, contract::kDanglingInput,
                         "consumes '" + product + "' which nothing produces");
                }
            }
        }
    }
    for (const auto& cycle : transform_cycles(spec)) {
        std::string members;
        for (const auto& name : cycle) {
            members += (members.empty() ? "" : ", ") + name;
        }
        flag(cycle.front(), "", contract::kTransformCycle, "transforms form a cycle: " + members);
    }

    std::set<std::string> fact_names;
    for (const auto& fact : spec.facts) {
        if (!is_identifier(fact.name)) {
            flag(fact.name, "", contract::kInvalidName, "fact name is not an identifier");
        } else if (!fact_names.insert(fact.name).second) {
            flag(fact.name, "", contract::kDuplicateName, "fact declared twice");
        }
    }

    std::set<std::string> rule_names;
    std::set<std::string> derived;
    for (const auto& rule : spec.rules) {
        if (!is_identifier(rule.name)) {
            flag(rule.name, "", contract::kInvalidName, "rule name is not an identifier");
        } else if (!rule_names.insert(rule.name).second) {
            flag(rule.name, "", contract::kDuplicateName, "rule declared twice");
        }
        for (const auto& name : rule.new_facts) {
            if (!is_identifier(name)) {
                flag(rule.name, name, contract::kInvalidName, "derived fact name is not an identifier");
            } else if (fact_names.contains(name)) {
                flag(rule.name, name, contract::kDerivedCollision, "derived fact collides with a declared fact");
            } else if (!derived.insert(name).second) {
                flag(rule.name, name, contract::kDerivedCollision, "derived fact produced by two rules");
            }
        }
    }
    for (const auto& rule : spec.rules) {
        if (rule.condition) {
            for (const auto& name : fact_references(*rule.condition)) {
                if (!fact_names.contains(name) && !derived.contains(name)) {
                    flag(rule.name, name, contract::kUnknownFact, "condition references unknown fact '" + name + "'");
                }
            }
        }
        for (const auto& action : rule.actions) {
            bool declared = std::any_of(spec.publishers.begin(), spec.publishers.end(),
                                        [&](const auto& p) { return p.name == action; });
            if (!declared) {
                flag(rule.name, action, contract::kUnknownAction, "action '" + action + "' is not a publisher");
            }
        }
    }
    return out;
}

}  // namespace de
