#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace de {

/// Simulated time, in whole seconds.
using SimTime = std::int64_t;

/// A single field value inside a data product.
using Scalar = std::variant<double, std::string, bool>;

/// Field name -> value. std::map keeps field order sorted, which is the
/// canonical order used for digests.
using Record = std::map<std::string, Scalar, std::less<>>;

/// A list of records sharing one field set.
using Table = std::vector<Record>;

using Payload = std::variant<Record, Table>;

[[nodiscard]] bool is_identifier(std::string_view text) noexcept;

[[nodiscard]] std::string_view type_name(const Scalar& value) noexcept;

/// Throws MalformedPayload when table rows do not share an identical field set
/// or a field name is not an identifier.
void check_payload(const Payload& payload);

[[nodiscard]] nlohmann::json to_json(const Scalar& value);
[[nodiscard]] nlohmann::json to_json(const Payload& payload);
[[nodiscard]] Scalar scalar_from_json(const nlohmann::json& value);
[[nodiscard]] Payload payload_from_json(const nlohmann::json& value);

/// Canonical text of a payload: compact JSON with sorted field names.
[[nodiscard]] std::string canonical_text(const Payload& payload);

/// Hex SHA-256 of canonical_text(payload).
[[nodiscard]] std::string payload_digest(const Payload& payload);

/// Hex SHA-256 of arbitrary bytes.
[[nodiscard]] std::string sha256_hex(std::string_view bytes);

// Typed field access helpers; they throw de::Error naming the field on a
// missing field or a type mismatch.
[[nodiscard]] double number_field(const Record& record, std::string_view field);
[[nodiscard]] const std::string& string_field(const Record& record, std::string_view field);
[[nodiscard]] bool bool_field(const Record& record, std::string_view field);

}  // namespace de
