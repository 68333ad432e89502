#include "de/datablock.hpp"

#include <stdexcept>

#include "de/errors.hpp"

namespace de {

const Record& DataProduct::record() const {
    if (const auto* r = std::get_if<Record>(payload.get())) {
        return *r;
    }
    throw Error("product '" + key.name + "' is a table, expected a record");
}

const Table& DataProduct::table() const {
    if (const auto* t = std::get_if<Table>(payload.get())) {
        return *t;
    }
    throw Error("product '" + key.name + "' is a record, expected a table");
}

DataBlockSnapshot::DataBlockSnapshot(std::string channel_id, std::int64_t cycle_id, SimTime taken_at,
                                     std::map<std::string, DataProduct> entries)
    : channel_id_(std::move(channel_id)),
      cycle_id_(cycle_id),
      taken_at_(taken_at),
      entries_(std::move(entries)) {}

const DataProduct* DataBlockSnapshot::find(const std::string& name) const {
    auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
}

DataBlockSnapshot DataBlockSnapshot::restricted_to(const std::vector<std::string>& names) const {
    std::map<std::string, DataProduct> subset;
    for (const auto& name : names) {
        if (const auto* product = find(name)) {
            subset.emplace(name, *product);
        }
    }
    return DataBlockSnapshot(channel_id_, cycle_id_, taken_at_, std::move(subset));
}

bool operator==(const DataBlockSnapshot& a, const DataBlockSnapshot& b) {
    if (a.channel_id_ != b.channel_id_ || a.cycle_id_ != b.cycle_id_ || a.taken_at_ != b.taken_at_ ||
        a.entries_.size() != b.entries_.size()) {
        return false;
    }
    for (auto x = a.entries_.begin(), y = b.entries_.begin(); x != a.entries_.end(); ++x, ++y) {
        if (x->first != y->first || x->second.header != y->second.header ||
            x->second.digest != y->second.digest) {
            return false;
        }
    }
    return true;
}

DataBlock::DataBlock(std::size_t retention) : retention_(retention) {
    if (retention_ == 0) {
        throw std::invalid_argument("datablock retention must be at least 1");
    }
}

ProductHeader DataBlock::put(const std::string& channel_id, const std::string& name, Payload payload,
                             SimTime validity_s, const std::string& producer, SimTime now) {
    if (!is_identifier(name)) {
        throw MalformedPayload("invalid product name '" + name + "'");
    }
    if (validity_s <= 0) {
        throw std::invalid_argument("validity of '" + name + "' must be positive");
    }
    check_payload(payload);

    DataProduct product;
    product.key = ProductKey{channel_id, name};
    product.digest = payload_digest(payload);
    product.payload = std::make_shared<const Payload>(std::move(payload));
    product.header.created_at = now;
    product.header.expiration_at = now + validity_s;
    product.header.producer = producer;

    std::lock_guard lock(mutex_);
    auto& slot = store_[product.key];
    product.header.generation = ++slot.last_generation;
    slot.generations.push_back(product);
    while (slot.generations.size() > retention_) {
        slot.generations.pop_front();
    }
    return product.header;
}

DataBlockSnapshot DataBlock::snapshot(const std::string& channel_id, std::int64_t cycle_id,
                                      SimTime now) const {
    std::map<std::string, DataProduct> entries;
    {
        std::lock_guard lock(mutex_);
        for (auto it = store_.lower_bound(ProductKey{channel_id, ""});
             it != store_.end() && it->first.channel_id == channel_id; ++it) {
            const auto& latest = it->second.generations.back();
            if (latest.header.expiration_at >= now) {
                entries.emplace(it->first.name, latest);
            }
        }
    }
    return DataBlockSnapshot(channel_id, cycle_id, now, std::move(entries));
}

std::vector<HistoryEntry> DataBlock::history(const std::string& channel_id, const std::string& name) const {
    std::lock_guard lock(mutex_);
    auto it = store_.find(ProductKey{channel_id, name});
    if (it == store_.end()) {
        throw UnknownKey("unknown product '" + name + "' in channel '" + channel_id + "'");
    }
    std::vector<HistoryEntry> out;
    out.reserve(it->second.generations.size());
    for (const auto& product : it->second.generations) {
        out.push_back(HistoryEntry{product.header, product.digest});
    }
    return out;
}

std::optional<DataProduct> DataBlock::find(const std::string& channel_id, const std::string& name,
                                           std::int64_t generation) const {
    std::lock_guard lock(mutex_);
    auto it = store_.find(ProductKey{channel_id, name});
    if (it == store_.end()) {
        return std::nullopt;
    }
    for (const auto& product : it->second.generations) {
        if (product.header.generation == generation) {
            return product;
        }
    }
    return std::nullopt;
}

}  // namespace de
