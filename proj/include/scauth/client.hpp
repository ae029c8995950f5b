#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "scauth/crypto.hpp"

namespace httplib {
class Client;
}

namespace scauth {

using Json = nlohmann::json;

struct NetworkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-2xx response from the gateway.
struct ApiError : std::runtime_error {
    int status;
    Json body;
    ApiError(int status_, Json body_);
};

struct ApiResponse {
    int status{0};
    Json body;
};

class GatewayClient {
public:
    explicit GatewayClient(const std::string& base_url);
    ~GatewayClient();

    ApiResponse post(const std::string& path, const Json& body, const std::string& session = {});
    ApiResponse get(const std::string& path);

    // Throws ApiError on rejection, NetworkError when unreachable.
    std::string login(const std::string& user, const std::string& password);
    Json token_request(const std::string& session, const Digest32& secret_hash);
    Json query(const std::string& session, const Json& body);
    Json events(uint64_t from, const std::optional<Address>& filter);

    // Timed-path variant for the benchmark: takes the request body already
    // serialized and leaves the response unparsed, so the measurement covers
    // the gateway round trip rather than client-side JSON work. Returns the
    // response body size in bytes; throws like query() on failure.
    size_t query_raw(const std::string& session, const std::string& body_json);

private:
    std::unique_ptr<httplib::Client> http_;
};

struct BenchParams {
    std::string user;
    std::string password;
    std::string key_hex;  // signer private key, 64 hex chars
    std::string secret{"bench-secret"};
    std::vector<size_t> sizes{100, 1000, 5000};
    int trials{30};
};

struct BenchReport {
    std::vector<size_t> rows_returned;
    std::vector<double> mean_ms_direct;
    std::vector<double> mean_ms_smartcoauth;
    std::vector<double> overhead_ms;
    int trials{0};
};

// Drops the top and bottom floor(5%) samples, then averages the rest.
double trimmed_mean(std::vector<double> samples);

// Times the direct (verification-skipping) arm and the full token-verified
// arm over the same queries, alternating the arms each trial; overhead_ms is
// the trimmed mean of the per-trial differences, which cancels drift over the
// run. Requires an account whose registered address matches key_hex and a
// gateway with debug_direct enabled.
BenchReport run_benchmark(const std::string& gateway_url, const BenchParams& params);

void write_bench_csv(const BenchReport& report, const std::string& path);
std::string format_bench_table(const BenchReport& report);

// Polls /events starting from the cursor stored at cursor_path (missing file
// means 0), prints one line per event, then advances and persists the
// cursor. With once=true a single poll is made. Returns the number of lines
// printed. Retries transient connection failures with backoff before giving
// up with NetworkError.
size_t watch_events(const std::string& gateway_url, const std::optional<Address>& filter,
                    const std::string& cursor_path, bool once, std::ostream& out,
                    const std::atomic<bool>* stop = nullptr, int poll_interval_ms = 1000);

}  // namespace scauth
