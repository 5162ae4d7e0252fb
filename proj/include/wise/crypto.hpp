#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "wise/types.hpp"

namespace wise::crypto {

using Bytes = std::vector<std::uint8_t>;
using Key = std::array<std::uint8_t, 32>;

struct Mac {
    std::array<std::uint8_t, 32> bytes{};
    friend bool operator==(const Mac&, const Mac&) = default;

    Mac& operator^=(const Mac& o) {
        for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] ^= o.bytes[i];
        return *this;
    }
};

struct Nonce {
    std::array<std::uint8_t, 16> bytes{};
    friend bool operator==(const Nonce&, const Nonce&) = default;
};

struct MemoryImage {
    Bytes bytes;
};

/// HMAC-SHA256 over the concatenation of `parts`.
inline Mac hmac(const Key& key, std::initializer_list<std::span<const std::uint8_t>> parts) {
    Bytes msg;
    for (auto p : parts) msg.insert(msg.end(), p.begin(), p.end());
    Mac out;
    unsigned int len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), msg.data(), msg.size(), out.bytes.data(), &len);
    return out;
}

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

/// Per-device keys: dk for mutual authentication, ak for attestation.
struct DeviceKeys {
    Key dk{};
    Key ak{};
};

/// Everything the verifier holds; a device holds only keys[d] and km.
struct KeyMaterial {
    Key km{};
    std::vector<DeviceKeys> devices;

    /// Deterministic key derivation from a seed, labelled so dk != ak.
    static KeyMaterial derive(std::uint64_t seed, std::size_t n) {
        Key root{};
        for (int i = 0; i < 8; ++i) root[i] = static_cast<std::uint8_t>(seed >> (56 - 8 * i));
        auto derive_key = [&](std::string_view label, std::uint32_t id) {
            std::array<std::uint8_t, 4> idb{static_cast<std::uint8_t>(id >> 24), static_cast<std::uint8_t>(id >> 16),
                                            static_cast<std::uint8_t>(id >> 8), static_cast<std::uint8_t>(id)};
            return hmac(root, {as_bytes(label), idb}).bytes;
        };
        KeyMaterial km;
        km.km = derive_key("km", 0);
        km.devices.resize(n);
        for (std::size_t d = 0; d < n; ++d) {
            km.devices[d].dk = derive_key("dk", static_cast<std::uint32_t>(d));
            km.devices[d].ak = derive_key("ak", static_cast<std::uint32_t>(d));
        }
        return km;
    }
};

/// Keyed measurement of a memory image.
inline Mac measure(const MemoryImage& mem, const Key& ak) {
    if (mem.bytes.empty()) throw error("memory image must not be empty");
    return hmac(ak, {mem.bytes});
}

struct Report {
    DeviceId device = 0;
    bool healthy = false;
    Mac tag;
};

inline std::array<std::uint8_t, 2> encode_id(DeviceId d) {
    if (d > 0xFFFF) throw error("device id does not fit the 2-byte wire encoding");
    return {static_cast<std::uint8_t>(d >> 8), static_cast<std::uint8_t>(d)};
}

/// Tag input: nonce || id || status || bound measurement.
inline Mac report_tag(const Nonce& nonce, DeviceId d, bool healthy, const Mac& bound, const Key& ak) {
    auto id = encode_id(d);
    std::array<std::uint8_t, 1> status{static_cast<std::uint8_t>(healthy ? 1 : 0)};
    return hmac(ak, {nonce.bytes, id, status, bound.bytes});
}

/// A healthy report binds the fresh measurement (equal to the reference);
/// a compromised one binds the stored reference so the verifier can still
/// recompute it.
inline Report make_report(DeviceId d, const Nonce& nonce, const MemoryImage& mem, const Key& ak,
                          const Mac& expected) {
    Mac fresh = measure(mem, ak);
    bool healthy = fresh == expected;
    return {d, healthy, report_tag(nonce, d, healthy, healthy ? fresh : expected, ak)};
}

struct Aggregate {
    std::vector<std::pair<DeviceId, bool>> members; // sorted by id
    Mac combined_tag;

    static Aggregate of(const Report& r) { return {{{r.device, r.healthy}}, r.tag}; }
    bool empty() const noexcept { return members.empty(); }
    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

class duplicate_member : public error {
public:
    explicit duplicate_member(DeviceId id)
        : error("device " + std::to_string(id) + " appears in more than one aggregate part"), id_(id) {}
    DeviceId id() const noexcept { return id_; }

private:
    DeviceId id_;
};

/// Merges disjoint parts: sorted member union, XOR-folded tag.
inline Aggregate aggregate(std::span<const Aggregate> parts) {
    Aggregate out;
    std::size_t total = 0;
    for (const auto& p : parts) total += p.members.size();
    out.members.reserve(total);
    for (const auto& p : parts) {
        out.members.insert(out.members.end(), p.members.begin(), p.members.end());
        out.combined_tag ^= p.combined_tag;
    }
    std::sort(out.members.begin(), out.members.end());
    for (std::size_t i = 1; i < out.members.size(); ++i)
        if (out.members[i].first == out.members[i - 1].first) throw duplicate_member(out.members[i].first);
    return out;
}

inline Aggregate aggregate(std::initializer_list<Aggregate> parts) {
    return aggregate(std::span<const Aggregate>(parts.begin(), parts.size()));
}

enum class Verdict : std::uint8_t { Healthy, Compromised, Invalid };

/// Recomputes every member's tag from the reference state and checks the
/// XOR fold.  Any mismatch (tampering, forged health claim, stale nonce,
/// unknown member) marks the whole aggregate Invalid.
inline std::vector<std::pair<DeviceId, Verdict>> verify_aggregate(const Aggregate& agg, const Nonce& nonce,
                                                                  const KeyMaterial& keys,
                                                                  std::span<const Mac> expected) {
    std::vector<std::pair<DeviceId, Verdict>> out;
    out.reserve(agg.members.size());
    Mac fold;
    bool ok = true;
    for (auto [d, healthy] : agg.members) {
        if (d >= keys.devices.size() || d >= expected.size()) {
            ok = false;
            continue;
        }
        fold ^= report_tag(nonce, d, healthy, expected[d], keys.devices[d].ak);
    }
    ok = ok && fold == agg.combined_tag;
    for (auto [d, healthy] : agg.members)
        out.emplace_back(d, !ok ? Verdict::Invalid : healthy ? Verdict::Healthy : Verdict::Compromised);
    return out;
}

// Wire encodings, big-endian.

inline constexpr std::size_t kReportWireSize = 2 + 1 + 32;

inline std::size_t aggregate_wire_size(std::size_t members) { return 2 + 3 * members + 32; }

inline Bytes encode_report(const Report& r) {
    Bytes out;
    auto id = encode_id(r.device);
    out.insert(out.end(), id.begin(), id.end());
    out.push_back(r.healthy ? 1 : 0);
    out.insert(out.end(), r.tag.bytes.begin(), r.tag.bytes.end());
    return out;
}

inline Bytes encode_aggregate(const Aggregate& a) {
    if (a.members.size() > 0xFFFF) throw error("aggregate too large for the wire encoding");
    Bytes out;
    out.reserve(aggregate_wire_size(a.members.size()));
    out.push_back(static_cast<std::uint8_t>(a.members.size() >> 8));
    out.push_back(static_cast<std::uint8_t>(a.members.size()));
    for (auto [d, healthy] : a.members) {
        auto id = encode_id(d);
        out.insert(out.end(), id.begin(), id.end());
        out.push_back(healthy ? 1 : 0);
    }
    out.insert(out.end(), a.combined_tag.bytes.begin(), a.combined_tag.bytes.end());
    return out;
}

inline std::optional<Aggregate> decode_aggregate(std::span<const std::uint8_t> in) {
    if (in.size() < 34) return std::nullopt;
    std::size_t count = (std::size_t{in[0]} << 8) | in[1];
    if (in.size() != aggregate_wire_size(count)) return std::nullopt;
    Aggregate a;
    for (std::size_t i = 0; i < count; ++i) {
        const auto* p = in.data() + 2 + 3 * i;
        if (p[2] > 1) return std::nullopt;
        a.members.emplace_back(static_cast<DeviceId>((p[0] << 8) | p[1]), p[2] == 1);
    }
    std::copy_n(in.end() - 32, 32, a.combined_tag.bytes.begin());
    return a;
}

/// payload || HMAC_km(payload)
inline Bytes authenticate_request(std::span<const std::uint8_t> payload, const Key& km) {
    Bytes out(payload.begin(), payload.end());
    Mac tag = hmac(km, {payload});
    out.insert(out.end(), tag.bytes.begin(), tag.bytes.end());
    return out;
}

/// Returns the payload when the trailing tag verifies under km.
inline std::optional<Bytes> verify_request(std::span<const std::uint8_t> tagged, const Key& km) {
    if (tagged.size() < 32) return std::nullopt;
    auto payload = tagged.first(tagged.size() - 32);
    Mac tag = hmac(km, {payload});
    if (CRYPTO_memcmp(tag.bytes.data(), tagged.data() + payload.size(), 32) != 0) return std::nullopt;
    return Bytes(payload.begin(), payload.end());
}

} // namespace wise::crypto
