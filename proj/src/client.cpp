#include "scauth/client.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "httplib.h"

namespace scauth {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

ApiError::ApiError(int status_, Json body_)
    : std::runtime_error("gateway returned " + std::to_string(status_) + ": " + body_.dump()),
      status(status_),
      body(std::move(body_)) {}

GatewayClient::GatewayClient(const std::string& base_url)
    : http_(std::make_unique<httplib::Client>(base_url)) {
    http_->set_connection_timeout(5, 0);
    http_->set_read_timeout(60, 0);
    http_->set_keep_alive(true);
    // Nagle + delayed ACK adds ~40ms per request, which would swamp the
    // latency measurements the whole benchmark exists for.
    http_->set_tcp_nodelay(true);
}

GatewayClient::~GatewayClient() = default;

ApiResponse GatewayClient::post(const std::string& path, const Json& body,
                                const std::string& session) {
    httplib::Headers headers;
    if (!session.empty()) headers.emplace("X-Session", session);
    auto res = http_->Post(path, headers, body.dump(), "application/json");
    if (!res) throw NetworkError("cannot reach gateway: " + path);
    Json parsed = Json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) parsed = Json(nullptr);
    return {res->status, std::move(parsed)};
}

ApiResponse GatewayClient::get(const std::string& path) {
    auto res = http_->Get(path);
    if (!res) throw NetworkError("cannot reach gateway: " + path);
    Json parsed = Json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) parsed = Json(nullptr);
    return {res->status, std::move(parsed)};
}

std::string GatewayClient::login(const std::string& user, const std::string& password) {
    auto r = post("/login", Json{{"user_id", user}, {"password", password}});
    if (r.status != 200) throw ApiError(r.status, r.body);
    return r.body.at("session_id").get<std::string>();
}

Json GatewayClient::token_request(const std::string& session, const Digest32& secret_hash) {
    auto r = post("/token/request", Json{{"secret_hash", secret_hash.hex()}}, session);
    if (r.status != 200) throw ApiError(r.status, r.body);
    return r.body;
}

Json GatewayClient::query(const std::string& session, const Json& body) {
    auto r = post("/query", body, session);
    if (r.status != 200) throw ApiError(r.status, r.body);
    return r.body;
}

size_t GatewayClient::query_raw(const std::string& session, const std::string& body_json) {
    httplib::Headers headers;
    if (!session.empty()) headers.emplace("X-Session", session);
    auto res = http_->Post("/query", headers, body_json, "application/json");
    if (!res) throw NetworkError("cannot reach gateway: /query");
    if (res->status != 200) {
        Json parsed = Json::parse(res->body, nullptr, false);
        throw ApiError(res->status, parsed.is_discarded() ? Json(nullptr) : std::move(parsed));
    }
    return res->body.size();
}

Json GatewayClient::events(uint64_t from, const std::optional<Address>& filter) {
    std::string path = "/events?from=" + std::to_string(from);
    if (filter) path += "&address=" + filter->hex();
    auto r = get(path);
    if (r.status != 200) throw ApiError(r.status, r.body);
    return r.body;
}

double trimmed_mean(std::vector<double> samples) {
    if (samples.empty()) return 0;
    std::sort(samples.begin(), samples.end());
    size_t drop = samples.size() / 20;  // floor(5%)
    double sum = std::accumulate(samples.begin() + drop, samples.end() - drop, 0.0);
    return sum / static_cast<double>(samples.size() - 2 * drop);
}

namespace {

// Harder 10%-per-side trim for the paired differences: scheduler spikes land
// in whichever arm happens to be running and show up as fat two-sided tails.
double paired_mean(std::vector<double> diffs) {
    std::sort(diffs.begin(), diffs.end());
    size_t drop = diffs.size() / 10;
    if (diffs.size() <= 2 * drop) drop = 0;
    double sum = std::accumulate(diffs.begin() + drop, diffs.end() - drop, 0.0);
    return sum / static_cast<double>(diffs.size() - 2 * drop);
}

}  // namespace

BenchReport run_benchmark(const std::string& gateway_url, const BenchParams& params) {
    if (params.trials < 1) throw std::invalid_argument("trials must be >= 1");
    GatewayClient client(gateway_url);

    std::string session = client.login(params.user, params.password);

    auto key_raw = from_hex(params.key_hex);
    if (!key_raw || key_raw->size() != 32)
        throw std::invalid_argument("key must be 64 hex characters");
    Signature sig = sign_message(ByteView{key_raw->data(), key_raw->size()},
                                 as_bytes(params.secret));
    auto sig_bytes = sig.serialize();
    Digest32 secret_hash = hash_bytes(ByteView{sig_bytes.data(), sig_bytes.size()});
    client.token_request(session, secret_hash);

    auto query_body = [&](size_t size, bool direct) {
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "P%05zu", size);
        Json body{{"filter", Json::array({Json{{"field", "id"}, {"op", "<="}, {"value", idbuf}}})}};
        if (direct) {
            body["direct"] = true;
        } else {
            body["secret_message"] = params.secret;
            body["signature"] = sig.hex();
        }
        return body;
    };

    BenchReport report;
    report.trials = params.trials;
    for (size_t size : params.sizes) {
        // one untimed warmup per arm
        Json direct_resp = client.query(session, query_body(size, true));
        Json full_resp = client.query(session, query_body(size, false));
        if (full_resp.value("reason", "") != "OK")
            throw std::runtime_error("benchmark token rejected: " + full_resp.dump());
        size_t got = full_resp.at("rows").size();
        if (direct_resp.at("rows").size() != got)
            throw std::runtime_error("benchmark arms disagree on result size");

        // Paired design: run both arms in each trial and difference within the
        // pair, so drift across the run (page cache, CPU frequency) cancels
        // instead of landing in the gap we are trying to measure. The order
        // inside a pair flips every trial to debias that too. The timed path
        // skips response parsing: it is identical client-side work in both
        // arms and would only add noise exposure.
        std::string direct_raw = query_body(size, true).dump();
        std::string full_raw = query_body(size, false).dump();
        std::vector<double> direct_ms, full_ms, diff_ms;
        direct_ms.reserve(params.trials);
        full_ms.reserve(params.trials);
        diff_ms.reserve(params.trials);
        for (int t = 0; t < params.trials; ++t) {
            bool direct_first = (t % 2) == 0;
            double t0 = now_ms();
            client.query_raw(session, direct_first ? direct_raw : full_raw);
            double t1 = now_ms();
            client.query_raw(session, direct_first ? full_raw : direct_raw);
            double t2 = now_ms();
            double d = direct_first ? t1 - t0 : t2 - t1;
            double f = direct_first ? t2 - t1 : t1 - t0;
            direct_ms.push_back(d);
            full_ms.push_back(f);
            diff_ms.push_back(f - d);
        }

        report.rows_returned.push_back(got);
        report.mean_ms_direct.push_back(trimmed_mean(std::move(direct_ms)));
        report.mean_ms_smartcoauth.push_back(trimmed_mean(std::move(full_ms)));
        report.overhead_ms.push_back(paired_mean(std::move(diff_ms)));
    }
    return report;
}

void write_bench_csv(const BenchReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "rows,direct_ms,smartcoauth_ms,overhead_ms\n";
    for (size_t i = 0; i < report.rows_returned.size(); ++i) {
        char line[128];
        std::snprintf(line, sizeof(line), "%zu,%.3f,%.3f,%.3f\n", report.rows_returned[i],
                      report.mean_ms_direct[i], report.mean_ms_smartcoauth[i],
                      report.overhead_ms[i]);
        out << line;
    }
    out.flush();
    if (!out) throw std::runtime_error("short write: " + path);
}

std::string format_bench_table(const BenchReport& report) {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof(line), "%8s %12s %16s %12s\n", "rows", "direct_ms",
                  "smartcoauth_ms", "overhead_ms");
    out << line;
    for (size_t i = 0; i < report.rows_returned.size(); ++i) {
        std::snprintf(line, sizeof(line), "%8zu %12.3f %16.3f %12.3f\n", report.rows_returned[i],
                      report.mean_ms_direct[i], report.mean_ms_smartcoauth[i],
                      report.overhead_ms[i]);
        out << line;
    }
    return out.str();
}

namespace {

uint64_t read_cursor(const std::string& path) {
    std::ifstream in(path);
    uint64_t v = 0;
    if (in && (in >> v)) return v;
    return 0;
}

void write_cursor(const std::string& path, uint64_t v) {
    std::ofstream out(path, std::ios::trunc);
    out << v << "\n";
}

Json events_with_retry(GatewayClient& client, uint64_t from,
                       const std::optional<Address>& filter) {
    int backoff_ms = 500;
    for (int attempt = 0;; ++attempt) {
        try {
            return client.events(from, filter);
        } catch (const NetworkError&) {
            if (attempt >= 3) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
    }
}

}  // namespace

size_t watch_events(const std::string& gateway_url, const std::optional<Address>& filter,
                    const std::string& cursor_path, bool once, std::ostream& out,
                    const std::atomic<bool>* stop, int poll_interval_ms) {
    GatewayClient client(gateway_url);
    uint64_t cursor = read_cursor(cursor_path);
    size_t printed = 0;

    for (;;) {
        Json resp = events_with_retry(client, cursor, filter);
        for (const Json& e : resp.at("events")) {
            uint64_t idx = e.at("log_index").get<uint64_t>();
            if (idx < cursor) continue;  // the cursor guarantees no reprints
            out << idx << " " << e.at("user").get<std::string>() << " "
                << e.at("secret_hash").get<std::string>() << " "
                << e.at("block_timestamp").get<int64_t>() << "\n";
            cursor = idx + 1;
            ++printed;
        }
        out.flush();
        write_cursor(cursor_path, cursor);
        if (once || (stop && stop->load())) return printed;
        for (int waited = 0; waited < poll_interval_ms; waited += 50) {
            if (stop && stop->load()) return printed;
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    }
}

}  // namespace scauth
