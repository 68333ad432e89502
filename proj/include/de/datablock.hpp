#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "de/value.hpp"

namespace de {

struct ProductKey {
    std::string channel_id;
    std::string name;

    auto operator<=>(const ProductKey&) const = default;
};

struct ProductHeader {
    std::int64_t generation = 0;
    SimTime created_at = 0;
    SimTime expiration_at = 0;
    std::string producer;

    bool operator==(const ProductHeader&) const = default;
};

/// One immutable generation of a named product. The payload is shared
/// between the store and every snapshot that sees it.
struct DataProduct {
    ProductKey key;
    ProductHeader header;
    std::shared_ptr<const Payload> payload;
    std::string digest;

    [[nodiscard]] const Payload& value() const { return *payload; }
    [[nodiscard]] const Record& record() const;  // throws de::Error if not a record
    [[nodiscard]] const Table& table() const;    // throws de::Error if not a table
};

/// The products of one channel visible at a given instant.
class DataBlockSnapshot {
public:
    DataBlockSnapshot() = default;
    DataBlockSnapshot(std::string channel_id, std::int64_t cycle_id, SimTime taken_at,
                      std::map<std::string, DataProduct> entries);

    [[nodiscard]] const std::string& channel_id() const noexcept { return channel_id_; }
    [[nodiscard]] std::int64_t cycle_id() const noexcept { return cycle_id_; }
    [[nodiscard]] SimTime taken_at() const noexcept { return taken_at_; }
    [[nodiscard]] const std::map<std::string, DataProduct>& entries() const noexcept { return entries_; }

    [[nodiscard]] const DataProduct* find(const std::string& name) const;
    [[nodiscard]] bool contains(const std::string& name) const { return find(name) != nullptr; }

    /// Same snapshot restricted to the given names; absent names are skipped.
    [[nodiscard]] DataBlockSnapshot restricted_to(const std::vector<std::string>& names) const;

    /// Equal when channel, cycle, instant, headers and digests all match.
    friend bool operator==(const DataBlockSnapshot& a, const DataBlockSnapshot& b);

private:
    std::string channel_id_;
    std::int64_t cycle_id_ = 0;
    SimTime taken_at_ = 0;
    std::map<std::string, DataProduct> entries_;
};

struct HistoryEntry {
    ProductHeader header;
    std::string digest;

    bool operator==(const HistoryEntry&) const = default;
};

/// Generation-versioned product store shared by all channels. Thread-safe.
class DataBlock {
public:
    static constexpr std::size_t kDefaultRetention = 100;

    explicit DataBlock(std::size_t retention = kDefaultRetention);

    DataBlock(const DataBlock&) = delete;
    DataBlock& operator=(const DataBlock&) = delete;

    ProductHeader put(const std::string& channel_id, const std::string& name, Payload payload,
                      SimTime validity_s, const std::string& producer, SimTime now);

    /// Latest unexpired generation of every key of the channel.
    [[nodiscard]] DataBlockSnapshot snapshot(const std::string& channel_id, std::int64_t cycle_id,
                                             SimTime now) const;

    /// Retained generations for the key, oldest first. Throws UnknownKey.
    [[nodiscard]] std::vector<HistoryEntry> history(const std::string& channel_id,
                                                    const std::string& name) const;

    /// A retained generation, or nullopt when unknown or evicted.
    [[nodiscard]] std::optional<DataProduct> find(const std::string& channel_id, const std::string& name,
                                                  std::int64_t generation) const;

    [[nodiscard]] std::size_t retention() const noexcept { return retention_; }

private:
    struct Slot {
        std::int64_t last_generation = 0;
        std::deque<DataProduct> generations;
    };

    std::size_t retention_;
    mutable std::mutex mutex_;
    std::map<ProductKey, Slot> store_;
};

}  // namespace de
