// Command-line client: key handling, offline secret signing, token
// registration, queries, event watching, dataset generation, and the
// latency benchmark.
//
// Exit codes: 0 success, 1 usage error, 2 network failure, 3 verification
// failure (rejected credentials, rejected request, or invalid token).

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scauth/client.hpp"
#include "scauth/crypto.hpp"
#include "scauth/gateway.hpp"
#include "scauth/records.hpp"

using namespace scauth;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNetwork = 2;
constexpr int kExitVerify = 3;

std::atomic<bool> g_stop{false};

void handle_signal(int) {
    g_stop.store(true);
}

std::optional<std::array<uint8_t, 32>> read_key_file(const std::string& path) {
    std::ifstream in(path);
    std::string hex;
    if (!in || !(in >> hex)) return std::nullopt;
    auto raw = from_hex(hex);
    if (!raw || raw->size() != 32) return std::nullopt;
    std::array<uint8_t, 32> key{};
    std::copy(raw->begin(), raw->end(), key.begin());
    return key;
}

// "age>=30", "id=P00001", "name~kora" (~ is contains)
std::optional<Predicate> parse_filter_expr(const std::string& expr) {
    static const std::pair<const char*, FilterOp> ops[] = {
        {"<=", FilterOp::Le}, {">=", FilterOp::Ge}, {"!=", FilterOp::Ne}, {"==", FilterOp::Eq},
        {"<", FilterOp::Lt},  {">", FilterOp::Gt},  {"=", FilterOp::Eq},  {"~", FilterOp::Contains},
    };
    for (const auto& [text, op] : ops) {
        size_t pos = expr.find(text);
        if (pos != std::string::npos && pos > 0) {
            Predicate p;
            p.field = expr.substr(0, pos);
            p.op = op;
            p.value = expr.substr(pos + std::strlen(text));
            return p;
        }
    }
    return std::nullopt;
}

int cmd_keygen(const std::string& out_path) {
    KeyPair kp = generate_keypair();
    std::string priv = to_hex({kp.private_key.data(), kp.private_key.size()});
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) {
            std::fprintf(stderr, "cannot write key file: %s\n", out_path.c_str());
            return kExitUsage;
        }
        out << priv << "\n";
        std::printf("key_file %s\n", out_path.c_str());
    } else {
        std::printf("private_key %s\n", priv.c_str());
    }
    std::printf("public_key %s\n", to_hex(kp.public_view()).c_str());
    std::printf("address %s\n", derive_address(kp.public_view()).hex().c_str());
    return kExitOk;
}

int cmd_sign_secret(const std::string& key_path, const std::string& message) {
    auto key = read_key_file(key_path);
    if (!key) {
        std::fprintf(stderr, "bad key file: %s\n", key_path.c_str());
        return kExitUsage;
    }
    KeyPair kp = generate_keypair({key->data(), key->size()});
    Signature sig = sign_message({key->data(), key->size()}, as_bytes(message));
    auto sig_bytes = sig.serialize();
    Digest32 secret_hash = hash_bytes(ByteView{sig_bytes.data(), sig_bytes.size()});
    std::printf("address %s\n", derive_address(kp.public_view()).hex().c_str());
    std::printf("signature %s\n", sig.hex().c_str());
    std::printf("secret_hash %s\n", secret_hash.hex().c_str());
    return kExitOk;
}

int cmd_token(const std::string& gateway, const std::string& user, const std::string& password,
              const std::string& secret_hash_hex) {
    auto hash = Digest32::from_hex(secret_hash_hex);
    if (!hash) {
        std::fprintf(stderr, "secret-hash must be 64 hex characters\n");
        return kExitUsage;
    }
    GatewayClient client(gateway);
    std::string session = client.login(user, password);
    Json receipt = client.token_request(session, *hash);
    std::printf("%s\n", receipt.dump(2).c_str());
    return receipt.value("status", "") == "success" ? kExitOk : kExitVerify;
}

struct QueryArgs {
    std::string gateway;
    std::string user, password;
    std::string secret;
    std::string signature_hex;
    std::string key_path;
    std::vector<std::string> filters;
    uint64_t limit = 0;
    bool direct = false;
};

int cmd_query(const QueryArgs& args) {
    Json body = Json::object();
    Json filter = Json::array();
    for (const std::string& expr : args.filters) {
        auto p = parse_filter_expr(expr);
        if (!p) {
            std::fprintf(stderr, "bad filter: %s\n", expr.c_str());
            return kExitUsage;
        }
        filter.push_back(
            Json{{"field", p->field}, {"op", to_string(p->op)}, {"value", p->value}});
    }
    if (!filter.empty()) body["filter"] = std::move(filter);
    if (args.limit > 0) body["limit"] = args.limit;
    if (args.direct) body["direct"] = true;

    bool token_supplied = false;
    if (!args.signature_hex.empty()) {
        body["secret_message"] = args.secret;
        body["signature"] = args.signature_hex;
        token_supplied = true;
    } else if (!args.key_path.empty()) {
        auto key = read_key_file(args.key_path);
        if (!key) {
            std::fprintf(stderr, "bad key file: %s\n", args.key_path.c_str());
            return kExitUsage;
        }
        Signature sig = sign_message({key->data(), key->size()}, as_bytes(args.secret));
        body["secret_message"] = args.secret;
        body["signature"] = sig.hex();
        token_supplied = true;
    }

    GatewayClient client(args.gateway);
    std::string session;
    if (!args.user.empty()) session = client.login(args.user, args.password);
    Json resp = client.query(session, body);
    std::printf("%s\n", resp.dump(2).c_str());
    if (token_supplied && resp.value("reason", "") != "OK") return kExitVerify;
    return kExitOk;
}

int cmd_watch(const std::string& gateway, const std::string& address_hex,
              const std::string& cursor_path, bool once, int interval_ms) {
    std::optional<Address> filter;
    if (!address_hex.empty()) {
        filter = Address::from_hex(address_hex);
        if (!filter) {
            std::fprintf(stderr, "bad address: %s\n", address_hex.c_str());
            return kExitUsage;
        }
    }
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    watch_events(gateway, filter, cursor_path, once, std::cout, &g_stop, interval_ms);
    return kExitOk;
}

int cmd_bench(const std::string& gateway, BenchParams params, const std::string& key_path,
              const std::string& sizes_csv, const std::string& out_path) {
    auto key = read_key_file(key_path);
    if (!key) {
        std::fprintf(stderr, "bad key file: %s\n", key_path.c_str());
        return kExitUsage;
    }
    params.key_hex = to_hex({key->data(), key->size()});
    if (!sizes_csv.empty()) {
        params.sizes.clear();
        std::stringstream ss(sizes_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                params.sizes.push_back(std::stoul(item));
            } catch (...) {
                std::fprintf(stderr, "bad sizes list: %s\n", sizes_csv.c_str());
                return kExitUsage;
            }
        }
    }
    BenchReport report = run_benchmark(gateway, params);
    std::printf("%s", format_bench_table(report).c_str());
    if (!out_path.empty()) {
        write_bench_csv(report, out_path);
        std::printf("csv %s\n", out_path.c_str());
    }
    return kExitOk;
}

int cmd_gen_dataset(const std::string& out_path, size_t rows, uint64_t seed) {
    if (out_path.empty()) {
        std::fprintf(stderr, "gen-dataset requires --out\n");
        return kExitUsage;
    }
    write_synthetic_csv(out_path, rows, seed);
    std::printf("wrote %zu rows to %s\n", rows, out_path.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SmartCoAuth client"};
    app.require_subcommand(1);

    std::string gateway = "http://127.0.0.1:8080";
    std::string out_path;
    app.add_option("--gateway", gateway, "gateway base URL");
    app.add_option("--out", out_path, "output file path");

    auto* keygen = app.add_subcommand("keygen", "generate a key pair");
    keygen->fallthrough();

    auto* sign = app.add_subcommand("sign-secret", "sign a secret message offline");
    sign->fallthrough();
    std::string key_path, message;
    sign->add_option("--key", key_path, "private key file")->required();
    sign->add_option("--message", message, "secret message")->required();

    auto* token = app.add_subcommand("token", "register a query token");
    token->fallthrough();
    std::string user, password, secret_hash_hex;
    token->add_option("--user", user, "user id")->required();
    token->add_option("--password", password, "password")->required();
    token->add_option("--secret-hash", secret_hash_hex, "hash from sign-secret")->required();

    auto* query = app.add_subcommand("query", "run a record query");
    query->fallthrough();
    QueryArgs qargs;
    query->add_option("--user", qargs.user, "user id (omit for anonymous)");
    query->add_option("--password", qargs.password, "password");
    query->add_option("--secret", qargs.secret, "secret message");
    query->add_option("--signature", qargs.signature_hex, "signature from sign-secret");
    query->add_option("--key", qargs.key_path, "private key file (signs --secret locally)");
    query->add_option("--filter", qargs.filters, "predicate, e.g. age>=30 or name~kora");
    query->add_option("--limit", qargs.limit, "max rows");
    query->add_flag("--direct", qargs.direct, "skip token verification (debug gateways only)");

    auto* watch = app.add_subcommand("watch", "follow the token event feed");
    watch->fallthrough();
    std::string address_hex, cursor_path = ".scauth-cursor";
    bool once = false;
    int interval_ms = 1000;
    watch->add_option("--address", address_hex, "only events for this address");
    watch->add_option("--cursor", cursor_path, "cursor file");
    watch->add_flag("--once", once, "poll once and exit");
    watch->add_option("--interval-ms", interval_ms, "poll interval");

    auto* bench = app.add_subcommand("bench", "measure query latency overhead");
    bench->fallthrough();
    BenchParams bparams;
    std::string bench_key_path, sizes_csv;
    bench->add_option("--user", bparams.user, "user id")->required();
    bench->add_option("--password", bparams.password, "password")->required();
    bench->add_option("--key", bench_key_path, "private key file")->required();
    bench->add_option("--secret", bparams.secret, "secret message");
    bench->add_option("--sizes", sizes_csv, "result sizes, comma separated");
    bench->add_option("--trials", bparams.trials, "timed queries per size and arm");

    auto* gen = app.add_subcommand("gen-dataset", "write the synthetic records CSV");
    gen->fallthrough();
    size_t rows = 12500;
    uint64_t seed = 42;
    gen->add_option("--rows", rows, "row count");
    gen->add_option("--seed", seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (keygen->parsed()) return cmd_keygen(out_path);
        if (sign->parsed()) return cmd_sign_secret(key_path, message);
        if (token->parsed()) return cmd_token(gateway, user, password, secret_hash_hex);
        if (query->parsed()) {
            qargs.gateway = gateway;
            return cmd_query(qargs);
        }
        if (watch->parsed()) return cmd_watch(gateway, address_hex, cursor_path, once, interval_ms);
        if (bench->parsed()) return cmd_bench(gateway, bparams, bench_key_path, sizes_csv, out_path);
        if (gen->parsed()) return cmd_gen_dataset(out_path, rows, seed);
    } catch (const NetworkError& e) {
        std::fprintf(stderr, "network error: %s\n", e.what());
        return kExitNetwork;
    } catch (const ApiError& e) {
        std::fprintf(stderr, "rejected: %s\n", e.what());
        return kExitVerify;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitVerify;
    }
    return kExitUsage;
}
