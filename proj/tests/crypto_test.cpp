#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "wise/crypto.hpp"

using namespace wise;
using namespace wise::crypto;

namespace {

struct Fixture {
    KeyMaterial keys = KeyMaterial::derive(42, 64);
    std::vector<MemoryImage> mem;
    std::vector<Mac> expected;
    Nonce nonce;

    Fixture() {
        for (std::size_t d = 0; d < 64; ++d) {
            MemoryImage m;
            for (std::size_t i = 0; i < 64; ++i) m.bytes.push_back(static_cast<std::uint8_t>(d * 7 + i));
            expected.push_back(measure(m, keys.devices[d].ak));
            mem.push_back(std::move(m));
        }
        nonce.bytes.fill(0x5a);
    }

    Report report(DeviceId d) const { return make_report(d, nonce, mem[d], keys.devices[d].ak, expected[d]); }
};

} // namespace

TEST(Measure, DeterministicAndSensitive) {
    Key ak{};
    ak[0] = 1;
    MemoryImage m{{1, 2, 3, 4}};
    EXPECT_EQ(measure(m, ak), measure(m, ak));
    MemoryImage flipped = m;
    flipped.bytes[2] ^= 0x01;
    EXPECT_NE(measure(m, ak), measure(flipped, ak));
    Key other = ak;
    other[1] = 9;
    EXPECT_NE(measure(m, ak), measure(m, other));
    EXPECT_THROW(measure(MemoryImage{}, ak), error);
}

TEST(Measure, KnownHmacVector) {
    // RFC 4231 test case 2 ("Jefe"), with the key zero-padded to 32 bytes,
    // which HMAC treats identically.
    Key key{};
    std::string k = "Jefe";
    std::copy(k.begin(), k.end(), key.begin());
    auto mac = hmac(key, {as_bytes("what do ya want for nothing?")});
    const std::uint8_t want[4] = {0x5b, 0xdc, 0xc1, 0x46};
    EXPECT_TRUE(std::equal(want, want + 4, mac.bytes.begin()));
}

TEST(Keys, DeviceKeysAreSeparated) {
    auto km = KeyMaterial::derive(1, 16);
    for (const auto& d : km.devices) EXPECT_NE(d.dk, d.ak);
    EXPECT_NE(km.devices[0].ak, km.devices[1].ak);
    EXPECT_EQ(KeyMaterial::derive(1, 16).km, km.km);
}

TEST(Report, HealthyAndCompromised) {
    Fixture f;
    auto healthy = f.report(3);
    EXPECT_TRUE(healthy.healthy);
    auto v = verify_aggregate(Aggregate::of(healthy), f.nonce, f.keys, f.expected);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].second, Verdict::Healthy);

    f.mem[3].bytes[0] ^= 0xff;
    auto bad = f.report(3);
    EXPECT_FALSE(bad.healthy);
    v = verify_aggregate(Aggregate::of(bad), f.nonce, f.keys, f.expected);
    EXPECT_EQ(v[0].second, Verdict::Compromised);
}

TEST(Report, StaleNonceRejected) {
    Fixture f;
    auto r = f.report(1);
    Nonce next = f.nonce;
    next.bytes[15] ^= 1;
    auto v = verify_aggregate(Aggregate::of(r), next, f.keys, f.expected);
    EXPECT_EQ(v[0].second, Verdict::Invalid);
}

TEST(Report, CompromisedCannotClaimHealth) {
    Fixture f;
    f.mem[5].bytes[10] ^= 0x42;
    // the device lies about its status but can only bind its real memory
    Mac fresh = measure(f.mem[5], f.keys.devices[5].ak);
    Report forged{5, true, report_tag(f.nonce, 5, true, fresh, f.keys.devices[5].ak)};
    auto v = verify_aggregate(Aggregate::of(forged), f.nonce, f.keys, f.expected);
    EXPECT_EQ(v[0].second, Verdict::Invalid);

    // flipping the status bit of an honest compromised report in transit
    auto honest = f.report(5);
    Aggregate flipped = Aggregate::of(honest);
    flipped.members[0].second = true;
    EXPECT_EQ(verify_aggregate(flipped, f.nonce, f.keys, f.expected)[0].second, Verdict::Invalid);
}

TEST(Aggregate, AssociativeAndIdentity) {
    Fixture f;
    auto a = Aggregate::of(f.report(1)), b = Aggregate::of(f.report(2)), c = Aggregate::of(f.report(9));
    EXPECT_EQ(aggregate({aggregate({a}), b}), aggregate({a, b}));
    EXPECT_EQ(aggregate({aggregate({a, b}), c}), aggregate({a, aggregate({b, c})}));
    EXPECT_EQ(aggregate({c, a, b}), aggregate({a, b, c}));
    auto empty = aggregate(std::span<const Aggregate>{});
    EXPECT_TRUE(empty.members.empty());
    EXPECT_EQ(empty.combined_tag, Mac{});
}

TEST(Aggregate, DuplicateMemberRejected) {
    Fixture f;
    auto a = aggregate({Aggregate::of(f.report(5)), Aggregate::of(f.report(6))});
    try {
        aggregate({a, Aggregate::of(f.report(5))});
        FAIL() << "expected duplicate_member";
    } catch (const duplicate_member& e) {
        EXPECT_EQ(e.id(), 5u);
    }
}

TEST(Aggregate, ThreeHonestAndOneCorrupted) {
    Fixture f;
    auto agg = aggregate({Aggregate::of(f.report(0)), Aggregate::of(f.report(1)), Aggregate::of(f.report(2))});
    auto v = verify_aggregate(agg, f.nonce, f.keys, f.expected);
    ASSERT_EQ(v.size(), 3u);
    for (auto [d, verdict] : v) EXPECT_EQ(verdict, Verdict::Healthy);

    auto r1 = f.report(1);
    r1.tag.bytes[7] ^= 0x80;
    auto tampered = aggregate({Aggregate::of(f.report(0)), Aggregate::of(r1), Aggregate::of(f.report(2))});
    for (auto [d, verdict] : verify_aggregate(tampered, f.nonce, f.keys, f.expected))
        EXPECT_EQ(verdict, Verdict::Invalid);
}

TEST(Aggregate, RandomBracketingsAndRecovery) {
    Fixture f;
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<DeviceId> ids(64);
        std::iota(ids.begin(), ids.end(), 0);
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(1 + rng() % 64);
        Fixture g = f;
        std::vector<bool> bad(64, false);
        for (DeviceId d : ids)
            if (rng() % 4 == 0) {
                g.mem[d].bytes[0] ^= 1;
                bad[d] = true;
            }
        std::vector<Aggregate> parts;
        for (DeviceId d : ids) parts.push_back(Aggregate::of(g.report(d)));
        auto flat = aggregate(std::span<const Aggregate>(parts));
        // random binary bracketing
        while (parts.size() > 1) {
            std::size_t i = rng() % (parts.size() - 1);
            parts[i] = aggregate({parts[i], parts[i + 1]});
            parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        }
        ASSERT_EQ(parts[0], flat);
        ASSERT_TRUE(std::is_sorted(flat.members.begin(), flat.members.end()));
        for (auto [d, verdict] : verify_aggregate(flat, g.nonce, g.keys, g.expected))
            EXPECT_EQ(verdict, bad[d] ? Verdict::Compromised : Verdict::Healthy);
    }
}

TEST(Wire, SizesAndRoundTrip) {
    Fixture f;
    auto r = f.report(300 % 64);
    EXPECT_EQ(encode_report(r).size(), kReportWireSize);
    EXPECT_EQ(kReportWireSize, 35u);
    auto agg = aggregate({Aggregate::of(f.report(1)), Aggregate::of(f.report(2))});
    auto bytes = encode_aggregate(agg);
    EXPECT_EQ(bytes.size(), 2u + 3u * 2u + 32u);
    auto back = decode_aggregate(bytes);
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, agg);
    bytes.pop_back();
    EXPECT_FALSE(decode_aggregate(bytes));
    EXPECT_THROW(encode_id(70000), error);
}

TEST(Request, AuthenticateAndVerify) {
    Key km{};
    km[3] = 7;
    Bytes payload{1, 2, 3, 4, 5};
    auto tagged = authenticate_request(payload, km);
    auto ok = verify_request(tagged, km);
    ASSERT_TRUE(ok);
    EXPECT_EQ(*ok, payload);
    auto flipped = tagged;
    flipped[2] ^= 1;
    EXPECT_FALSE(verify_request(flipped, km));
    Key other = km;
    other[0] = 1;
    EXPECT_FALSE(verify_request(tagged, other));
}
