#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <memory>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "scauth/client.hpp"
#include "scauth/gateway.hpp"
#include "support.hpp"

using namespace scauth;
using testsupport::TempDir;

namespace {

// in-process gateway with one provisioned user, for client-side tests
struct LiveGateway {
    std::unique_ptr<Gateway> gw;
    int port{0};
    std::string url;
    std::array<uint8_t, 32> alice_key{};
    Address alice_addr;
    std::string alice_secret = "bench-secret";
    Digest32 alice_hash;

    explicit LiveGateway(uint32_t injected_latency_ms = 0, size_t rows = 6000) {
        GatewayConfig cfg;
        cfg.chain.difficulty_bits = 2;
        cfg.chain.injected_latency_ms = injected_latency_ms;
        cfg.owner_key_hex = std::string(63, '0') + "1";
        cfg.anonymous_mode = "aggregate";
        cfg.debug_direct = true;
        gw = std::make_unique<Gateway>(cfg, RecordStore::from_rows(synthetic_rows(rows, 3)));

        alice_key[31] = 0x51;
        alice_addr = derive_address(generate_keypair(ByteView{alice_key.data(), 32}).public_view());
        Signature sig = sign_message(ByteView{alice_key.data(), 32}, as_bytes(alice_secret));
        auto ser = sig.serialize();
        alice_hash = hash_bytes(ByteView{ser.data(), ser.size()});

        gw->add_user({"alice", "pw", true, Role::User, alice_addr.hex(), {}});
        gw->add_user({"root", "pw", true, Role::Admin, {}, {}});

        port = gw->start(0);
        url = "http://127.0.0.1:" + std::to_string(port);

        GatewayClient boot(url);
        std::string s = boot.login("alice", "pw");
        boot.token_request(s, alice_hash);
    }

    ~LiveGateway() { gw->stop(); }

    std::string key_hex() const { return to_hex({alice_key.data(), alice_key.size()}); }
};

}  // namespace

TEST_CASE("trimmed_mean drops five percent from each side") {
    // 4 samples: floor(4/20) = 0 dropped, plain mean
    CHECK(trimmed_mean({1, 2, 3, 4}) == doctest::Approx(2.5));
    CHECK(trimmed_mean({7}) == doctest::Approx(7));

    // 20 samples: one dropped per side; outliers vanish
    std::vector<double> v;
    for (int i = 0; i < 18; ++i) v.push_back(10.0);
    v.push_back(1000.0);  // spike
    v.push_back(0.001);   // dip
    CHECK(trimmed_mean(v) == doctest::Approx(10.0));

    // 40 samples: two per side
    std::vector<double> w;
    for (int i = 1; i <= 40; ++i) w.push_back(static_cast<double>(i));
    // drops {1,2} and {39,40}: mean of 3..38 = 20.5
    CHECK(trimmed_mean(w) == doctest::Approx(20.5));
}

TEST_CASE("client maps failure kinds to the right exceptions") {
    CHECK_THROWS_AS(GatewayClient("http://127.0.0.1:1").login("a", "b"), NetworkError);

    LiveGateway live;
    GatewayClient client(live.url);
    CHECK_THROWS_AS(client.login("alice", "wrong"), ApiError);
    std::string s = client.login("alice", "pw");
    CHECK_FALSE(s.empty());
    Json resp = client.query(s, Json{{"limit", 1}});
    CHECK(resp.at("rows").size() == 1);
}

TEST_CASE("watch prints new events once and persists its cursor") {
    LiveGateway live;
    TempDir tmp;
    std::string cursor = tmp.file("cursor");

    std::ostringstream out1;
    size_t n1 = watch_events(live.url, std::nullopt, cursor, true, out1);
    CHECK(n1 == 1);  // the provisioning token event
    std::string line = out1.str();
    CHECK(line.find(live.alice_addr.hex()) != std::string::npos);
    CHECK(line.find(live.alice_hash.hex()) != std::string::npos);
    CHECK(testsupport::read_file(cursor) == "1\n");

    // nothing new: nothing printed, cursor stays
    std::ostringstream out2;
    CHECK(watch_events(live.url, std::nullopt, cursor, true, out2) == 0);
    CHECK(out2.str().empty());

    // a second token lands; resuming from the cursor prints only that one
    GatewayClient client(live.url);
    std::string s = client.login("alice", "pw");
    client.token_request(s, live.alice_hash);
    std::ostringstream out3;
    CHECK(watch_events(live.url, std::nullopt, cursor, true, out3) == 1);
    CHECK(out3.str().substr(0, 2) == "1 ");  // log_index 1
    CHECK(testsupport::read_file(cursor) == "2\n");

    // address filter drops foreign events
    std::string cursor2 = tmp.file("cursor2");
    Address other;
    other.bytes.fill(0x99);
    std::ostringstream out4;
    CHECK(watch_events(live.url, other, cursor2, true, out4) == 0);
}

TEST_CASE("continuous watch stops on request") {
    LiveGateway live;
    TempDir tmp;
    std::atomic<bool> stop{false};
    std::ostringstream out;
    std::thread watcher([&] {
        watch_events(live.url, std::nullopt, tmp.file("c"), false, out, &stop, 50);
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    stop.store(true);
    watcher.join();
    CHECK(out.str().find(live.alice_addr.hex()) != std::string::npos);
}

TEST_CASE("benchmark reports positive verification overhead") {
    LiveGateway live(0);
    BenchParams params;
    params.user = "alice";
    params.password = "pw";
    params.key_hex = live.key_hex();
    params.secret = live.alice_secret;
    params.sizes = {100, 1000};
    params.trials = 15;

    BenchReport report = run_benchmark(live.url, params);
    REQUIRE(report.rows_returned.size() == 2);
    CHECK(report.rows_returned[0] == 100);
    CHECK(report.rows_returned[1] == 1000);
    CHECK(report.trials == 15);

    for (size_t i = 0; i < 2; ++i) {
        // with zero injected latency the gap is just signature recovery plus
        // the chain lookup: small but structurally positive
        CHECK(report.mean_ms_direct[i] > 0);
        CHECK(report.mean_ms_smartcoauth[i] > report.mean_ms_direct[i]);
        CHECK(report.overhead_ms[i] > 0);
        CHECK(report.overhead_ms[i] < 5.0);
    }

    TempDir tmp;
    std::string csv_path = tmp.file("bench.csv");
    write_bench_csv(report, csv_path);
    std::string csv = testsupport::read_file(csv_path);
    CHECK(csv.substr(0, 42) == "rows,direct_ms,smartcoauth_ms,overhead_ms\n");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    std::string table = format_bench_table(report);
    CHECK(table.find("100") != std::string::npos);
    CHECK(table.find("overhead_ms") != std::string::npos);
}

TEST_CASE("benchmark refuses to run when the key does not match the address") {
    LiveGateway live;
    BenchParams params;
    params.user = "alice";
    params.password = "pw";
    // a valid key, but not the one behind alice's registered address: the
    // sanity warmup sees SignatureMismatch and aborts instead of measuring
    std::array<uint8_t, 32> wrong{};
    wrong[31] = 0x52;
    params.key_hex = to_hex({wrong.data(), wrong.size()});
    params.secret = live.alice_secret;
    params.sizes = {10};
    params.trials = 2;
    CHECK_THROWS_AS(run_benchmark(live.url, params), std::runtime_error);
}

// ---- the installed binaries, driven for real ----

namespace {

struct ChildProc {
    pid_t pid{-1};
    int out_fd{-1};

    ~ChildProc() {
        if (pid > 0) {
            kill(pid, SIGTERM);
            int status = 0;
            waitpid(pid, &status, 0);
        }
        if (out_fd >= 0) close(out_fd);
    }
};

// spawn argv[0] with args, capturing stdout
ChildProc spawn(const std::vector<std::string>& argv) {
    int fds[2];
    REQUIRE(pipe(fds) == 0);
    pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        dup2(fds[1], STDOUT_FILENO);
        close(fds[0]);
        close(fds[1]);
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execv(args[0], args.data());
        _exit(127);
    }
    close(fds[1]);
    ChildProc child;
    child.pid = pid;
    child.out_fd = fds[0];
    return child;
}

// run to completion, return {exit_code, stdout}
std::pair<int, std::string> run_cli(const std::vector<std::string>& argv) {
    ChildProc child = spawn(argv);
    std::string out;
    char buf[4096];
    ssize_t n;
    while ((n = read(child.out_fd, buf, sizeof(buf))) > 0) out.append(buf, size_t(n));
    int status = 0;
    waitpid(child.pid, &status, 0);
    child.pid = -1;
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string wait_for_port_line(int fd) {
    // scauthd prints "scauthd listening on 127.0.0.1:PORT\n" once ready
    std::string acc;
    char c;
    while (read(fd, &c, 1) == 1) {
        acc.push_back(c);
        if (c == '\n') break;
    }
    return acc;
}

}  // namespace

TEST_CASE("scauth cli subcommands work end to end against scauthd") {
    TempDir tmp;

    // dataset + keys via the cli itself
    auto [gc, gout] = run_cli({SCAUTH_BIN, "gen-dataset", "--rows", "120", "--seed", "9", "--out",
                               tmp.file("data.csv")});
    REQUIRE(gc == 0);
    CHECK(gout.find("120") != std::string::npos);

    auto [kc, kout] = run_cli({SCAUTH_BIN, "keygen", "--out", tmp.file("alice.key")});
    REQUIRE(kc == 0);
    REQUIRE(kout.find("address 0x") != std::string::npos);
    std::string addr = kout.substr(kout.find("address ") + 8);
    addr = addr.substr(0, addr.find('\n'));

    auto [sc, sout] = run_cli(
        {SCAUTH_BIN, "sign-secret", "--key", tmp.file("alice.key"), "--message", "cli-secret"});
    REQUIRE(sc == 0);
    auto grab = [&](const std::string& text, const std::string& label) {
        size_t pos = text.find(label + " ");
        REQUIRE(pos != std::string::npos);
        std::string v = text.substr(pos + label.size() + 1);
        return v.substr(0, v.find('\n'));
    };
    std::string signature = grab(sout, "signature");
    std::string secret_hash = grab(sout, "secret_hash");
    CHECK(grab(sout, "address") == addr);

    // bad key file: usage error
    testsupport::write_file(tmp.file("junk.key"), "not-hex\n");
    auto [bc, bout] = run_cli(
        {SCAUTH_BIN, "sign-secret", "--key", tmp.file("junk.key"), "--message", "x"});
    CHECK(bc == 1);

    // gateway config for the daemon
    testsupport::write_file(
        tmp.file("gw.json"),
        Json{{"port", 0},
             {"difficulty_bits", 2},
             {"owner_key", std::string(63, '0') + "1"},
             {"anonymous_mode", "aggregate"},
             {"debug_direct", true},
             {"users", tmp.file("users.json")}}
            .dump());
    testsupport::write_file(tmp.file("users.json"),
                            Json::array({Json{{"user_id", "alice"},
                                              {"password", "pw"},
                                              {"authorized", true},
                                              {"address", addr}},
                                         Json{{"user_id", "root"},
                                              {"password", "pw"},
                                              {"role", "admin"}}})
                                .dump());

    ChildProc daemon = spawn(
        {SCAUTHD_BIN, "--config", tmp.file("gw.json"), "--dataset", tmp.file("data.csv")});
    std::string banner = wait_for_port_line(daemon.out_fd);
    REQUIRE(banner.find("listening on 127.0.0.1:") != std::string::npos);
    std::string gw = "http://127.0.0.1:" +
                     banner.substr(banner.rfind(':') + 1,
                                   banner.find('\n') - banner.rfind(':') - 1);

    // register the token on chain
    auto [tc, tout] = run_cli({SCAUTH_BIN, "--gateway", gw, "token", "--user", "alice",
                               "--password", "pw", "--secret-hash", secret_hash});
    REQUIRE(tc == 0);
    CHECK(tout.find("\"status\": \"success\"") != std::string::npos);

    // query with the signed secret: full view, exit 0
    auto [qc, qout] = run_cli({SCAUTH_BIN, "--gateway", gw, "query", "--user", "alice",
                               "--password", "pw", "--secret", "cli-secret", "--signature",
                               signature, "--filter", "age>=30", "--limit", "5"});
    CHECK(qc == 0);
    CHECK(qout.find("\"mode\": \"Full\"") != std::string::npos);

    // tampered signature: masked view, exit 3
    std::string bad_sig = signature;
    bad_sig[0] = bad_sig[0] == 'a' ? 'b' : 'a';
    auto [xc, xout] = run_cli({SCAUTH_BIN, "--gateway", gw, "query", "--user", "alice",
                               "--password", "pw", "--secret", "cli-secret", "--signature",
                               bad_sig});
    CHECK(xc == 3);
    CHECK(xout.find("\"mode\": \"Masked\"") != std::string::npos);

    // anonymous aggregate: no token supplied, exit 0
    auto [ac, aout] = run_cli({SCAUTH_BIN, "--gateway", gw, "query"});
    CHECK(ac == 0);
    CHECK(aout.find("\"mode\": \"Aggregate\"") != std::string::npos);

    // watch --once sees the single token event and records the cursor
    auto [wc, wout] = run_cli({SCAUTH_BIN, "--gateway", gw, "watch", "--once", "--cursor",
                               tmp.file("cursor")});
    CHECK(wc == 0);
    CHECK(wout.find(secret_hash) != std::string::npos);
    CHECK(testsupport::read_file(tmp.file("cursor")) == "1\n");

    // bench touches both arms over the wire
    auto [nc, nout] = run_cli({SCAUTH_BIN, "--gateway", gw, "--out", tmp.file("bench.csv"),
                               "bench", "--user", "alice", "--password", "pw", "--key",
                               tmp.file("alice.key"), "--secret", "cli-secret", "--sizes",
                               "20,40", "--trials", "5"});
    CHECK(nc == 0);
    CHECK(testsupport::read_file(tmp.file("bench.csv")).find("rows,direct_ms") == 0);

    // network failure maps to exit 2
    auto [ec, eout] = run_cli({SCAUTH_BIN, "--gateway", "http://127.0.0.1:1", "query"});
    CHECK(ec == 2);

    // usage failure maps to exit 1
    auto [uc, uout] = run_cli({SCAUTH_BIN, "query", "--filter", "???"});
    CHECK(uc == 1);
    auto [uc2, uout2] = run_cli({SCAUTH_BIN, "no-such-subcommand"});
    CHECK(uc2 == 1);
}
