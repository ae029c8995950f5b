#include "doctest.h"
#include "scauth/contract.hpp"
#include "support.hpp"

using namespace scauth;

namespace {

Address addr_of(uint8_t tag) {
    Address a;
    a.bytes.fill(tag);
    return a;
}

Digest32 digest_of(uint8_t tag) {
    Digest32 d;
    d.bytes.fill(tag);
    return d;
}

const Address kOwner = addr_of(0xaa);

SmartCoAuthContract owner_only() {
    return SmartCoAuthContract(ContractConfig{kOwner, false});
}

BlockContext at(uint64_t index, int64_t ts) {
    return BlockContext{index, ts};
}

}  // namespace

TEST_CASE("owner creates a token, state and event line up") {
    auto c = owner_only();
    CHECK(c.state().owner == kOwner);
    CHECK(c.event_count() == 0);

    ExecResult res = c.apply(kOwner, make_create_call(addr_of(1), digest_of(0x5a)), at(1, 1000));
    CHECK(res.slots_written == 2);  // mapping entry plus history append
    CHECK(res.events_emitted == 1);

    auto tok = c.get_user_query_token(addr_of(1));
    REQUIRE(tok.has_value());
    CHECK(tok->user == addr_of(1));
    CHECK(tok->secret_hash == digest_of(0x5a));
    CHECK(tok->created_at == 1000);

    REQUIRE(c.event_count() == 1);
    auto evs = c.read_events(0);
    REQUIRE(evs.size() == 1);
    CHECK(evs[0].event_name == "TokenCreated");
    CHECK(evs[0].user == addr_of(1));
    CHECK(evs[0].secret_hash == digest_of(0x5a));
    CHECK(evs[0].block_timestamp == 1000);
    CHECK(evs[0].block_index == 1);
    CHECK(evs[0].log_index == 0);

    CHECK(c.state().token_history.size() == 1);
}

TEST_CASE("token rotation replaces the mapping and keeps history") {
    auto c = owner_only();
    c.apply(kOwner, make_create_call(addr_of(1), digest_of(1)), at(1, 100));
    c.apply(kOwner, make_create_call(addr_of(1), digest_of(2)), at(2, 200));

    auto tok = c.get_user_query_token(addr_of(1));
    REQUIRE(tok.has_value());
    CHECK(tok->secret_hash == digest_of(2));
    CHECK(tok->created_at == 200);

    CHECK(c.state().token_by_user.size() == 1);
    CHECK(c.state().token_history.size() == 2);
    CHECK(c.state().token_history[0].secret_hash == digest_of(1));
    CHECK(c.event_count() == 2);
}

TEST_CASE("reverts carry the right reason and leave no trace") {
    auto c = owner_only();

    CHECK_THROWS_AS(c.apply(addr_of(1), make_create_call(addr_of(1), digest_of(1)), at(1, 1)),
                    ContractRevert);
    try {
        c.apply(addr_of(1), make_create_call(addr_of(1), digest_of(1)), at(1, 1));
    } catch (const ContractRevert& e) {
        CHECK(e.reason == RevertReason::NotOwner);
    }

    try {
        c.apply(kOwner, make_create_call(Address{}, digest_of(1)), at(1, 1));
        FAIL_CHECK("zero address accepted");
    } catch (const ContractRevert& e) {
        CHECK(e.reason == RevertReason::ZeroAddress);
    }

    try {
        CallDescriptor call{"mintUnicorns", {}};
        c.apply(kOwner, call, at(1, 1));
        FAIL_CHECK("unknown function accepted");
    } catch (const ContractRevert& e) {
        CHECK(e.reason == RevertReason::UnknownFunction);
    }

    try {
        CallDescriptor call{"createQueryToken", {Bytes(20, 1)}};  // missing hash param
        c.apply(kOwner, call, at(1, 1));
        FAIL_CHECK("missing parameter accepted");
    } catch (const ContractRevert& e) {
        CHECK(e.reason == RevertReason::BadArguments);
    }

    try {
        CallDescriptor call{"createQueryToken", {Bytes(19, 1), Bytes(32, 2)}};  // short address
        c.apply(kOwner, call, at(1, 1));
        FAIL_CHECK("short address accepted");
    } catch (const ContractRevert& e) {
        CHECK(e.reason == RevertReason::BadArguments);
    }

    // nothing written, nothing emitted, by any of the failed calls
    CHECK(c.state().token_by_user.empty());
    CHECK(c.state().token_history.empty());
    CHECK(c.event_count() == 0);
}

TEST_CASE("open_create lets any caller register their token") {
    SmartCoAuthContract c(ContractConfig{kOwner, true});
    ExecResult res = c.apply(addr_of(7), make_create_call(addr_of(7), digest_of(7)), at(1, 10));
    CHECK(res.slots_written == 2);
    CHECK(c.get_user_query_token(addr_of(7)).has_value());
}

TEST_CASE("read_events supports offsets and address filter") {
    auto c = owner_only();
    c.apply(kOwner, make_create_call(addr_of(1), digest_of(1)), at(1, 10));
    c.apply(kOwner, make_create_call(addr_of(2), digest_of(2)), at(2, 20));
    c.apply(kOwner, make_create_call(addr_of(1), digest_of(3)), at(3, 30));

    CHECK(c.read_events(0).size() == 3);
    CHECK(c.read_events(1).size() == 2);
    CHECK(c.read_events(3).size() == 0);
    CHECK(c.read_events(99).size() == 0);

    auto only1 = c.read_events(0, addr_of(1));
    REQUIRE(only1.size() == 2);
    CHECK(only1[0].log_index == 0);
    CHECK(only1[1].log_index == 2);
    CHECK(only1[1].secret_hash == digest_of(3));

    auto later1 = c.read_events(1, addr_of(1));
    REQUIRE(later1.size() == 1);
    CHECK(later1[0].log_index == 2);
}

TEST_CASE("unknown user has no token") {
    auto c = owner_only();
    CHECK_FALSE(c.get_user_query_token(addr_of(42)).has_value());
}

TEST_CASE("call descriptor serialization is injective and total") {
    CallDescriptor a{"createQueryToken", {Bytes(20, 1), Bytes(32, 2)}};
    Bytes ser = a.serialize();
    auto parsed = CallDescriptor::parse(ByteView{ser.data(), ser.size()});
    REQUIRE(parsed.has_value());
    CHECK(*parsed == a);

    // name/params boundary must not be ambiguous
    auto param = [](std::string_view s) { return Bytes(s.begin(), s.end()); };
    CallDescriptor b{"create", {param("QueryToken")}};
    CHECK(a.serialize() != b.serialize());
    CallDescriptor c{"create", {param("Query"), param("Token")}};
    CHECK(b.serialize() != c.serialize());

    // trailing garbage and truncation both fail
    Bytes padded = ser;
    padded.push_back(0);
    CHECK_FALSE(CallDescriptor::parse(ByteView{padded.data(), padded.size()}).has_value());
    Bytes cut(ser.begin(), ser.end() - 3);
    CHECK_FALSE(CallDescriptor::parse(ByteView{cut.data(), cut.size()}).has_value());
    CHECK_FALSE(CallDescriptor::parse(ByteView{}).has_value());
}

TEST_CASE("canonical state captures history, not just the mapping") {
    auto c1 = owner_only();
    auto c2 = owner_only();

    // same final mapping, different history
    c1.apply(kOwner, make_create_call(addr_of(1), digest_of(1)), at(1, 10));
    c1.apply(kOwner, make_create_call(addr_of(1), digest_of(2)), at(2, 20));
    c2.apply(kOwner, make_create_call(addr_of(1), digest_of(2)), at(2, 20));

    CHECK(c1.get_user_query_token(addr_of(1)) == c2.get_user_query_token(addr_of(1)));
    CHECK(c1.canonical_state() != c2.canonical_state());

    // identical call sequences give identical bytes
    auto c3 = owner_only();
    c3.apply(kOwner, make_create_call(addr_of(1), digest_of(1)), at(1, 10));
    c3.apply(kOwner, make_create_call(addr_of(1), digest_of(2)), at(2, 20));
    CHECK(c1.canonical_state() == c3.canonical_state());
}
