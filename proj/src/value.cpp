#include "de/value.hpp"

#include <array>
#include <cctype>
#include <cmath>

#include <openssl/evp.h>

#include "de/errors.hpp"

namespace de {

bool is_identifier(std::string_view text) noexcept {
    if (text.empty()) {
        return false;
    }
    auto head = text.front();
    if (!(std::isalpha(static_cast<unsigned char>(head)) || head == '_')) {
        return false;
    }
    for (char c : text.substr(1)) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) {
            return false;
        }
    }
    return true;
}

std::string_view type_name(const Scalar& value) noexcept {
    switch (value.index()) {
        case 0:
            return "number";
        case 1:
            return "string";
        default:
            return "boolean";
    }
}

namespace {

void check_record(const Record& record) {
    for (const auto& [field, value] : record) {
        if (!is_identifier(field)) {
            throw MalformedPayload("invalid field name '" + field + "'");
        }
        if (const auto* number = std::get_if<double>(&value); number && !std::isfinite(*number)) {
            throw MalformedPayload("field '" + field + "' is not a finite number");
        }
    }
}

}  // namespace

void check_payload(const Payload& payload) {
    if (const auto* record = std::get_if<Record>(&payload)) {
        check_record(*record);
        return;
    }
    const auto& table = std::get<Table>(payload);
    for (std::size_t row = 0; row < table.size(); ++row) {
        check_record(table[row]);
        if (row == 0) {
            continue;
        }
        const auto& first = table.front();
        const auto& current = table[row];
        bool same = first.size() == current.size();
        for (auto a = first.begin(), b = current.begin(); same && a != first.end(); ++a, ++b) {
            same = a->first == b->first;
        }
        if (!same) {
            throw MalformedPayload("ragged table: row " + std::to_string(row) +
                                   " field set differs from row 0");
        }
    }
}

nlohmann::json to_json(const Scalar& value) {
    return std::visit([](const auto& v) { return nlohmann::json(v); }, value);
}

nlohmann::json to_json(const Payload& payload) {
    auto record_json = [](const Record& record) {
        auto object = nlohmann::json::object();
        for (const auto& [field, value] : record) {
            object[field] = to_json(value);
        }
        return object;
    };
    if (const auto* record = std::get_if<Record>(&payload)) {
        return record_json(*record);
    }
    auto rows = nlohmann::json::array();
    for (const auto& row : std::get<Table>(payload)) {
        rows.push_back(record_json(row));
    }
    return rows;
}

Scalar scalar_from_json(const nlohmann::json& value) {
    if (value.is_boolean()) {
        return value.get<bool>();
    }
    if (value.is_number()) {
        return value.get<double>();
    }
    if (value.is_string()) {
        return value.get<std::string>();
    }
    throw MalformedPayload("unsupported field value " + value.dump());
}

Payload payload_from_json(const nlohmann::json& value) {
    auto record_from = [](const nlohmann::json& object) {
        if (!object.is_object()) {
            throw MalformedPayload("expected an object, got " + std::string(object.type_name()));
        }
        Record record;
        for (const auto& [field, v] : object.items()) {
            record.emplace(field, scalar_from_json(v));
        }
        return record;
    };
    Payload payload;
    if (value.is_array()) {
        Table table;
        for (const auto& row : value) {
            table.push_back(record_from(row));
        }
        payload = std::move(table);
    } else {
        payload = record_from(value);
    }
    check_payload(payload);
    return payload;
}

std::string canonical_text(const Payload& payload) {
    return to_json(payload).dump();
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0f]);
    }
    return out;
}

std::string payload_digest(const Payload& payload) {
    return sha256_hex(canonical_text(payload));
}

namespace {

const Scalar& field_of(const Record& record, std::string_view field) {
    auto it = record.find(field);
    if (it == record.end()) {
        throw Error("missing field '" + std::string(field) + "'");
    }
    return it->second;
}

template <typename T>
const T& typed_field(const Record& record, std::string_view field, std::string_view expected) {
    const auto& value = field_of(record, field);
    if (const auto* typed = std::get_if<T>(&value)) {
        return *typed;
    }
    throw Error("field '" + std::string(field) + "' is a " + std::string(type_name(value)) +
                ", expected a " + std::string(expected));
}

}  // namespace

double number_field(const Record& record, std::string_view field) {
    return typed_field<double>(record, field, "number");
}

const std::string& string_field(const Record& record, std::string_view field) {
    return typed_field<std::string>(record, field, "string");
}

bool bool_field(const Record& record, std::string_view field) {
    return typed_field<bool>(record, field, "boolean");
}

}  // namespace de
