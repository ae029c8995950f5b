#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

#include "json.hpp"
#include "scauth/ledger.hpp"
#include "scauth/middleware.hpp"
#include "scauth/records.hpp"

namespace httplib {
class Server;
}

namespace scauth {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GatewayConfig {
    int port{8080};
    int64_t session_ttl{1800};
    int64_t token_ttl{3600};
    ChainConfig chain;
    bool open_create{false};
    std::string anonymous_mode{"deny"};  // "deny" | "aggregate"
    std::string dataset_path;
    std::string owner_key_hex;  // contract owner private key, 64 hex chars
    std::string users_path;
    bool debug_direct{false};
    int64_t poll_timeout_ms{0};
    std::string chain_file;
    ViewPolicy policy;

    static GatewayConfig from_json(const Json& j);
    static GatewayConfig from_file(const std::string& path);
};

enum class Role { User, Admin };

struct UserAccount {
    std::string user_id;
    Digest32 password_hash;  // hash_bytes(salt || password)
    std::array<uint8_t, 16> salt{};
    std::optional<Address> registered_address;
    std::optional<Address> pending_address;
    bool authorized{false};
    Role role{Role::User};
    std::optional<std::string> secret_pattern;
};

struct Session {
    std::string session_id;
    std::string user_id;
    int64_t created_at{0};
    int64_t expires_at{0};
};

// Seed entry for creating accounts (from the users file or tests).
struct UserSeed {
    std::string user_id;
    std::string password;
    bool authorized{false};
    Role role{Role::User};
    std::optional<std::string> address_hex;  // pre-registered address
    std::optional<std::string> secret_pattern;
};

struct ApiResult {
    int status{200};
    Json body;
};

// Response serialization. For Masked rows the policy is consulted again so
// a sensitive numeric field still renders as the mask token.
Json record_to_json(const PatientRecord& r, ViewMode mode, const ViewPolicy& policy);
Json record_set_to_json(const RecordSet& rs, const ViewPolicy& policy);
Json event_to_json(const EventLogEntry& e);

class Gateway {
public:
    using Clock = std::function<int64_t()>;

    Gateway(GatewayConfig cfg, RecordStore store, Clock clock = {});
    ~Gateway();

    void add_user(const UserSeed& seed);
    void load_users_file(const std::string& path);

    ApiResult post_login(const Json& body);
    ApiResult post_logout(const std::string& session_id);
    ApiResult post_address_request(const std::string& session_id, const Json& body);
    ApiResult post_address_approve(const std::string& session_id, const Json& body);
    ApiResult post_token_request(const std::string& session_id, const Json& body);
    ApiResult post_query(const std::string& session_id, const Json& body);
    ApiResult get_events(uint64_t from_log_index, const std::optional<Address>& filter);
    ApiResult get_healthz() const;

    // Starts the HTTP server on 127.0.0.1. port 0 binds an ephemeral port;
    // returns the bound port.
    int start(int port);
    void wait();
    void stop();

    Ledger& ledger() { return ledger_; }
    Authorizer& authorizer() { return *auth_; }
    const GatewayConfig& config() const { return cfg_; }
    Address owner_address() const;
    std::optional<Address> registered_address(const std::string& user_id) const;
    size_t data_responses() const { return data_responses_.load(); }
    void save_chain_file() const;

private:
    SessionContext context_for(const std::string& session_id);
    std::string new_session_locked(const std::string& user_id);
    bool address_taken_locked(const Address& a) const;

    GatewayConfig cfg_;
    RecordStore store_;
    Clock clock_;
    KeyPair owner_key_;
    Ledger ledger_;
    std::unique_ptr<Authorizer> auth_;

    mutable std::mutex mu_;  // accounts_ + sessions_
    std::map<std::string, UserAccount> accounts_;
    std::map<std::string, Session> sessions_;

    std::atomic<size_t> data_responses_{0};
    std::unique_ptr<httplib::Server> http_;
    std::thread http_thread_;
};

}  // namespace scauth
