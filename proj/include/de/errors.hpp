#pragma once

#include <stdexcept>
#include <string>

namespace de {

/// Base class for every error raised by the decision engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A payload violates the data product invariants (ragged table, bad name).
class MalformedPayload : public Error {
public:
    using Error::Error;
};

/// A product key has never been written to the datablock.
class UnknownKey : public Error {
public:
    using Error::Error;
};

/// The transform consumption graph contains a cycle.
class CycleDetected : public Error {
public:
    using Error::Error;
};

/// A simulated external system is down according to the scenario script.
class ScriptedOutage : public Error {
public:
    using Error::Error;
};

/// The provisioner sink refused delivery.
class SinkUnavailable : public ScriptedOutage {
public:
    using ScriptedOutage::ScriptedOutage;
};

}  // namespace de
