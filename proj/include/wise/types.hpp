#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace wise {

/// Dense device index in [0, n).
using DeviceId = std::uint32_t;

/// Simulated wall-clock minutes (knowledge base timestamps).
using Minutes = double;

/// Simulated milliseconds (event loop clock).
using Millis = double;

/// A cluster is addressed by its category and its index within that category.
struct ClusterId {
    std::uint8_t category = 0;
    std::uint16_t index = 0;

    friend auto operator<=>(const ClusterId&, const ClusterId&) = default;
};

/// One attestation outcome as recorded in a device history.
enum class Outcome : std::uint8_t {
    Compromised = 0,
    Healthy = 1,
    NotAttested = 2,
};

inline char to_char(Outcome o) {
    switch (o) {
    case Outcome::Compromised: return '0';
    case Outcome::Healthy: return '1';
    case Outcome::NotAttested: return 'x';
    }
    return '?';
}

class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class unknown_device : public error {
public:
    explicit unknown_device(DeviceId id)
        : error("unknown device " + std::to_string(id)), id_(id) {}
    DeviceId id() const noexcept { return id_; }

private:
    DeviceId id_;
};

class unreachable_device : public error {
public:
    explicit unreachable_device(DeviceId id)
        : error("device " + std::to_string(id) + " is unreachable from the verifier"), id_(id) {}
    DeviceId id() const noexcept { return id_; }

private:
    DeviceId id_;
};

class config_error : public error {
public:
    using error::error;
};

} // namespace wise
