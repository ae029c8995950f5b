#include "scauth/gateway.hpp"

#include <openssl/crypto.h>
#include <openssl/rand.h>

#include <chrono>
#include <fstream>
#include <thread>

#include "httplib.h"

namespace scauth {

namespace {

int64_t wall_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

int64_t steady_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Json error_body(const std::string& name, const std::string& detail = "") {
    Json j{{"error", name}};
    if (!detail.empty()) j["detail"] = detail;
    return j;
}

Digest32 password_digest(const std::array<uint8_t, 16>& salt, const std::string& password) {
    Bytes buf(salt.begin(), salt.end());
    buf.insert(buf.end(), password.begin(), password.end());
    return hash_bytes(ByteView{buf.data(), buf.size()});
}

std::string random_hex(size_t nbytes) {
    Bytes buf(nbytes);
    if (RAND_bytes(buf.data(), static_cast<int>(nbytes)) != 1)
        throw std::runtime_error("RAND_bytes failure");
    return to_hex(buf);
}

}  // namespace

GatewayConfig GatewayConfig::from_json(const Json& j) {
    GatewayConfig cfg;
    cfg.port = j.value("port", cfg.port);
    cfg.session_ttl = j.value("session_ttl", cfg.session_ttl);
    cfg.token_ttl = j.value("token_ttl", cfg.token_ttl);
    cfg.chain.difficulty_bits = j.value("difficulty_bits", cfg.chain.difficulty_bits);
    cfg.chain.gas_base = j.value("gas_base", cfg.chain.gas_base);
    cfg.chain.gas_per_write = j.value("gas_per_write", cfg.chain.gas_per_write);
    cfg.chain.injected_latency_ms = j.value("injected_latency_ms", cfg.chain.injected_latency_ms);
    cfg.open_create = j.value("open_create", cfg.open_create);
    cfg.anonymous_mode = j.value("anonymous_mode", cfg.anonymous_mode);
    cfg.dataset_path = j.value("dataset", cfg.dataset_path);
    cfg.owner_key_hex = j.value("owner_key", cfg.owner_key_hex);
    cfg.users_path = j.value("users", cfg.users_path);
    cfg.debug_direct = j.value("debug_direct", cfg.debug_direct);
    cfg.poll_timeout_ms = j.value("poll_timeout_ms", cfg.poll_timeout_ms);
    cfg.chain_file = j.value("chain_file", cfg.chain_file);
    if (j.contains("mask_token")) cfg.policy.mask_token = j["mask_token"].get<std::string>();
    if (j.contains("sensitive_fields")) {
        cfg.policy.sensitive_fields.clear();
        for (const auto& f : j["sensitive_fields"])
            cfg.policy.sensitive_fields.insert(f.get<std::string>());
    }
    if (j.contains("aggregate_fields")) {
        cfg.policy.aggregate_fields.clear();
        for (const auto& f : j["aggregate_fields"])
            cfg.policy.aggregate_fields.insert(f.get<std::string>());
    }

    if (cfg.anonymous_mode != "deny" && cfg.anonymous_mode != "aggregate")
        throw ConfigError("anonymous_mode must be \"deny\" or \"aggregate\"");
    if (cfg.chain.difficulty_bits > 32) throw ConfigError("difficulty_bits must be 0-32");
    if (cfg.policy.mask_token.empty()) throw ConfigError("mask_token must be non-empty");
    const auto& schema = record_fields();
    for (const auto& f : cfg.policy.sensitive_fields)
        if (std::find(schema.begin(), schema.end(), f) == schema.end())
            throw ConfigError("sensitive_fields names unknown field: " + f);
    return cfg;
}

GatewayConfig GatewayConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    return from_json(j);
}

Json record_to_json(const PatientRecord& r, ViewMode mode, const ViewPolicy& policy) {
    Json j;
    for (const std::string& f : record_fields()) {
        if (mode == ViewMode::Masked && policy.sensitive_fields.count(f)) {
            j[f] = policy.mask_token;
        } else if (f == "age") {
            j[f] = r.age;
        } else {
            j[f] = get_field(r, f);
        }
    }
    return j;
}

Json record_set_to_json(const RecordSet& rs, const ViewPolicy& policy) {
    Json j{{"mode", to_string(rs.mode)}};
    if (rs.mode == ViewMode::Full || rs.mode == ViewMode::Masked) {
        Json rows = Json::array();
        for (const PatientRecord& r : rs.rows) rows.push_back(record_to_json(r, rs.mode, policy));
        j["rows"] = std::move(rows);
    } else if (rs.mode == ViewMode::Aggregate && rs.aggregates) {
        Json stats = Json::object();
        for (const auto& [field, st] : rs.aggregates->stats)
            stats[field] = Json{{"mean", st.mean}, {"min", st.min}, {"max", st.max}};
        j["aggregates"] = Json{{"count", rs.aggregates->count}, {"stats", std::move(stats)}};
    }
    return j;
}

Json event_to_json(const EventLogEntry& e) {
    return Json{{"log_index", e.log_index},     {"event_name", e.event_name},
                {"user", e.user.hex()},         {"secret_hash", e.secret_hash.hex()},
                {"block_timestamp", e.block_timestamp}, {"block_index", e.block_index}};
}

Gateway::Gateway(GatewayConfig cfg, RecordStore store, Clock clock)
    : cfg_(std::move(cfg)),
      store_(std::move(store)),
      clock_(clock ? std::move(clock) : Clock(wall_seconds)),
      owner_key_([&] {
          auto raw = from_hex(cfg_.owner_key_hex);
          if (!raw || raw->size() != 32)
              throw ConfigError("owner_key must be 64 hex characters");
          try {
              return generate_keypair(ByteView{raw->data(), raw->size()});
          } catch (const InvalidSeed&) {
              throw ConfigError("owner_key is not a valid private key");
          }
      }()),
      ledger_(cfg_.chain, ContractConfig{derive_address(owner_key_.public_view()), cfg_.open_create},
              clock_) {
    auth_ = std::make_unique<Authorizer>(
        [this](const Address& a) { return ledger_.get_user_query_token(a); },
        Authorizer::Config{cfg_.token_ttl});
    if (!cfg_.chain_file.empty()) {
        std::ifstream probe(cfg_.chain_file);
        if (probe.good()) ledger_.load_from_file(cfg_.chain_file);
    }
}

Gateway::~Gateway() {
    stop();
}

Address Gateway::owner_address() const {
    return derive_address(owner_key_.public_view());
}

void Gateway::add_user(const UserSeed& seed) {
    UserAccount acct;
    acct.user_id = seed.user_id;
    if (RAND_bytes(acct.salt.data(), static_cast<int>(acct.salt.size())) != 1)
        throw std::runtime_error("RAND_bytes failure");
    acct.password_hash = password_digest(acct.salt, seed.password);
    acct.authorized = seed.authorized;
    acct.role = seed.role;
    acct.secret_pattern = seed.secret_pattern;
    if (seed.address_hex) {
        auto a = Address::from_hex(*seed.address_hex);
        if (!a || a->is_zero())
            throw ConfigError("bad address for user " + seed.user_id);
        acct.registered_address = *a;
    }

    std::lock_guard<std::mutex> lock(mu_);
    if (accounts_.count(acct.user_id)) throw ConfigError("duplicate user: " + acct.user_id);
    if (acct.registered_address && address_taken_locked(*acct.registered_address))
        throw ConfigError("address already registered: " + acct.registered_address->hex());
    accounts_[acct.user_id] = std::move(acct);
}

void Gateway::load_users_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open users file: " + path);
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw ConfigError("users file must be a JSON array");
    for (const Json& u : j) {
        UserSeed seed;
        seed.user_id = u.at("user_id").get<std::string>();
        seed.password = u.at("password").get<std::string>();
        seed.authorized = u.value("authorized", false);
        seed.role = u.value("role", std::string("user")) == "admin" ? Role::Admin : Role::User;
        if (u.contains("address")) seed.address_hex = u["address"].get<std::string>();
        if (u.contains("secret_pattern"))
            seed.secret_pattern = u["secret_pattern"].get<std::string>();
        add_user(seed);
    }
}

bool Gateway::address_taken_locked(const Address& a) const {
    for (const auto& [id, acct] : accounts_)
        if (acct.registered_address && *acct.registered_address == a) return true;
    return false;
}

std::string Gateway::new_session_locked(const std::string& user_id) {
    std::string sid = random_hex(32);
    int64_t now = clock_();
    sessions_[sid] = Session{sid, user_id, now, now + cfg_.session_ttl};
    return sid;
}

SessionContext Gateway::context_for(const std::string& session_id) {
    SessionContext ctx;
    if (session_id.empty()) return ctx;
    std::lock_guard<std::mutex> lock(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return ctx;
    if (clock_() >= it->second.expires_at) return ctx;
    auto acct = accounts_.find(it->second.user_id);
    if (acct == accounts_.end()) return ctx;
    ctx.user_id = acct->second.user_id;
    ctx.logged_in = true;
    ctx.registered_address = acct->second.registered_address;
    ctx.authorized = acct->second.authorized;
    ctx.secret_pattern = acct->second.secret_pattern;
    return ctx;
}

ApiResult Gateway::post_login(const Json& body) {
    if (!body.is_object() || !body.contains("user_id") || !body.contains("password") ||
        !body["user_id"].is_string() || !body["password"].is_string())
        return {400, error_body("BadRequest", "user_id and password required")};
    std::string user_id = body["user_id"].get<std::string>();
    std::string password = body["password"].get<std::string>();

    std::lock_guard<std::mutex> lock(mu_);
    auto it = accounts_.find(user_id);
    // Unknown users burn the same hash work as wrong passwords so the two
    // rejections are indistinguishable, timing included.
    static const std::array<uint8_t, 16> dummy_salt{};
    const std::array<uint8_t, 16>& salt = it != accounts_.end() ? it->second.salt : dummy_salt;
    Digest32 offered = password_digest(salt, password);
    const Digest32 expected = it != accounts_.end() ? it->second.password_hash : Digest32{};
    bool ok = CRYPTO_memcmp(offered.bytes.data(), expected.bytes.data(), 32) == 0 &&
              it != accounts_.end();
    if (!ok) return {401, error_body("BadCredentials")};
    return {200, Json{{"session_id", new_session_locked(user_id)}}};
}

ApiResult Gateway::post_logout(const std::string& session_id) {
    std::lock_guard<std::mutex> lock(mu_);
    sessions_.erase(session_id);
    return {200, Json{{"ok", true}}};
}

ApiResult Gateway::post_address_request(const std::string& session_id, const Json& body) {
    SessionContext ctx = context_for(session_id);
    if (!ctx.logged_in) return {401, error_body("NoSession")};
    if (!body.is_object() || !body.contains("address") || !body["address"].is_string())
        return {400, error_body("BadRequest", "address required")};
    auto addr = Address::from_hex(body["address"].get<std::string>());
    if (!addr) return {400, error_body("BadRequest", "malformed address")};
    if (addr->is_zero()) return {400, error_body("BadRequest", "zero address")};

    std::lock_guard<std::mutex> lock(mu_);
    if (address_taken_locked(*addr)) return {409, error_body("AddressInUse")};
    accounts_[ctx.user_id].pending_address = *addr;
    return {200, Json{{"pending", addr->hex()}, {"user_id", ctx.user_id}}};
}

ApiResult Gateway::post_address_approve(const std::string& session_id, const Json& body) {
    SessionContext ctx = context_for(session_id);
    if (!ctx.logged_in) return {401, error_body("NoSession")};
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto self = accounts_.find(ctx.user_id);
        if (self == accounts_.end() || self->second.role != Role::Admin)
            return {403, error_body("NotAdmin")};
    }
    if (!body.is_object() || !body.contains("user_id") || !body["user_id"].is_string())
        return {400, error_body("BadRequest", "user_id required")};
    std::string target = body["user_id"].get<std::string>();

    std::lock_guard<std::mutex> lock(mu_);
    auto it = accounts_.find(target);
    if (it == accounts_.end() || !it->second.pending_address)
        return {404, error_body("NoPendingRequest")};
    Address addr = *it->second.pending_address;
    // Re-check: another account may have claimed it since the request.
    if (address_taken_locked(addr)) return {409, error_body("AddressInUse")};
    it->second.registered_address = addr;
    it->second.pending_address.reset();
    return {200, Json{{"user_id", target}, {"registered", addr.hex()}}};
}

ApiResult Gateway::post_token_request(const std::string& session_id, const Json& body) {
    SessionContext ctx = context_for(session_id);
    if (!ctx.logged_in) return {401, error_body("NoSession")};
    if (!ctx.registered_address) return {400, error_body("NoRegisteredAddress")};
    if (!body.is_object() || !body.contains("secret_hash") || !body["secret_hash"].is_string())
        return {400, error_body("BadRequest", "secret_hash required")};
    auto hash = Digest32::from_hex(body["secret_hash"].get<std::string>());
    if (!hash) return {400, error_body("BadRequest", "secret_hash must be 64 hex characters")};

    Receipt receipt =
        ledger_.submit_call(owner_address(), make_create_call(*ctx.registered_address, *hash));
    Json j{{"block_index", receipt.block_index},
           {"tx_index", receipt.tx_index},
           {"gas_used", receipt.gas_used},
           {"status", receipt.status == TxStatus::Success ? "success" : "failed"}};
    if (receipt.revert_reason) j["revert_reason"] = to_string(*receipt.revert_reason);
    return {200, j};
}

ApiResult Gateway::post_query(const std::string& session_id, const Json& body) {
    if (!body.is_object() && !body.is_null())
        return {400, error_body("BadRequest", "body must be a JSON object")};

    QuerySpec query;
    if (body.is_object() && body.contains("filter")) {
        if (!body["filter"].is_array())
            return {400, error_body("BadRequest", "filter must be an array")};
        for (const Json& p : body["filter"]) {
            if (!p.is_object() || !p.contains("field") || !p.contains("op") ||
                !p.contains("value"))
                return {400, error_body("BadRequest", "each predicate needs field, op, value")};
            Predicate pred;
            pred.field = p["field"].get<std::string>();
            auto op = parse_op(p["op"].get<std::string>());
            if (!op) return {400, error_body("BadRequest", "unknown op")};
            pred.op = *op;
            pred.value = p["value"].is_string() ? p["value"].get<std::string>()
                                                : p["value"].dump();
            query.filter.push_back(std::move(pred));
        }
    }
    if (body.is_object() && body.contains("limit")) {
        // is_number_integer covers both signed and unsigned storage
        if (!body["limit"].is_number_integer() || body["limit"].get<int64_t>() <= 0)
            return {400, error_body("BadRequest", "limit must be a positive integer")};
        query.limit = body["limit"].get<uint64_t>();
    }

    QueryToken token;
    if (body.is_object() && body.contains("secret_message") && body["secret_message"].is_string())
        token.secret_message = body["secret_message"].get<std::string>();
    if (body.is_object() && body.contains("signature") && body["signature"].is_string()) {
        // A malformed signature stays unset and fails verification downstream.
        token.signature = Signature::from_hex(body["signature"].get<std::string>());
    }

    bool direct = body.is_object() && body.value("direct", false);
    if (direct && !cfg_.debug_direct) return {400, error_body("DirectDisabled")};

    SessionContext ctx = context_for(session_id);
    int64_t now = clock_();
    auto [decision, validity] =
        direct ? auth_->authorize_direct(ctx, now) : auth_->authorize_query(ctx, token, now);

    RecordSet rs;
    try {
        rs = store_.execute_query(query, decision, cfg_.policy,
                                  cfg_.anonymous_mode == "aggregate");
    } catch (const UnknownField& e) {
        return {400, error_body("UnknownField", e.what())};
    } catch (const QueryError& e) {
        return {400, error_body("BadFilterValue", e.what())};
    }

    Json j = record_set_to_json(rs, cfg_.policy);
    j["decision"] = to_string(decision);
    j["reason"] = to_string(validity.reason);
    if (rs.mode != ViewMode::Denied) data_responses_.fetch_add(1);
    return {200, j};
}

ApiResult Gateway::get_events(uint64_t from_log_index, const std::optional<Address>& filter) {
    int64_t deadline = steady_ms() + cfg_.poll_timeout_ms;
    std::vector<EventLogEntry> events = ledger_.read_events(from_log_index, filter);
    while (events.empty() && cfg_.poll_timeout_ms > 0 && steady_ms() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        events = ledger_.read_events(from_log_index, filter);
    }
    Json arr = Json::array();
    for (const EventLogEntry& e : events) arr.push_back(event_to_json(e));
    return {200, Json{{"events", std::move(arr)}}};
}

ApiResult Gateway::get_healthz() const {
    return {200, Json{{"ok", true},
                      {"height", ledger_.height()},
                      {"events", ledger_.event_count()}}};
}

std::optional<Address> Gateway::registered_address(const std::string& user_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = accounts_.find(user_id);
    if (it == accounts_.end()) return std::nullopt;
    return it->second.registered_address;
}

void Gateway::save_chain_file() const {
    if (!cfg_.chain_file.empty()) ledger_.save_chain(cfg_.chain_file);
}

namespace {

void send_json(httplib::Response& res, const ApiResult& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
}

Json body_json(const httplib::Request& req) {
    if (req.body.empty()) return Json(nullptr);
    Json j = Json::parse(req.body, nullptr, false);
    if (j.is_discarded()) return Json(nullptr);
    return j;
}

std::string session_of(const httplib::Request& req) {
    return req.get_header_value("X-Session");
}

}  // namespace

int Gateway::start(int port) {
    http_ = std::make_unique<httplib::Server>();
    httplib::Server& svr = *http_;
    svr.set_tcp_nodelay(true);

    svr.Post("/login", [this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, post_login(body_json(req)));
    });
    svr.Post("/logout", [this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, post_logout(session_of(req)));
    });
    svr.Post("/address/request", [this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, post_address_request(session_of(req), body_json(req)));
    });
    svr.Post("/address/approve", [this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, post_address_approve(session_of(req), body_json(req)));
    });
    svr.Post("/token/request", [this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, post_token_request(session_of(req), body_json(req)));
    });
    svr.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, post_query(session_of(req), body_json(req)));
    });
    svr.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
        uint64_t from = 0;
        if (req.has_param("from")) {
            try {
                from = std::stoull(req.get_param_value("from"));
            } catch (...) {
                send_json(res, {400, error_body("BadRequest", "from must be an integer")});
                return;
            }
        }
        std::optional<Address> filter;
        if (req.has_param("address")) {
            filter = Address::from_hex(req.get_param_value("address"));
            if (!filter) {
                send_json(res, {400, error_body("BadRequest", "malformed address")});
                return;
            }
        }
        send_json(res, get_events(from, filter));
    });
    svr.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, get_healthz());
    });

    int bound = port;
    if (port == 0) {
        bound = svr.bind_to_any_port("127.0.0.1");
        if (bound <= 0) throw std::runtime_error("cannot bind ephemeral port");
    } else {
        if (!svr.bind_to_port("127.0.0.1", port))
            throw std::runtime_error("cannot bind port " + std::to_string(port));
    }
    http_thread_ = std::thread([this] { http_->listen_after_bind(); });
    svr.wait_until_ready();
    return bound;
}

void Gateway::wait() {
    if (http_thread_.joinable()) http_thread_.join();
}

void Gateway::stop() {
    if (http_) http_->stop();
    if (http_thread_.joinable()) http_thread_.join();
}

}  // namespace scauth
