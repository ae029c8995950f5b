// Gateway server. Loads config, dataset, and users, then serves the HTTP API
// until SIGINT/SIGTERM.

#include <csignal>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "scauth/gateway.hpp"

int main(int argc, char** argv) {
    CLI::App app{"SmartCoAuth gateway server"};
    std::string config_path;
    int port_override = -1;
    std::string dataset_override;
    app.add_option("--config", config_path, "config file (JSON)")->required();
    app.add_option("--port", port_override, "listen port, overrides config (0 = ephemeral)");
    app.add_option("--dataset", dataset_override, "records CSV, overrides config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        scauth::GatewayConfig cfg = scauth::GatewayConfig::from_file(config_path);
        if (port_override >= 0) cfg.port = port_override;
        if (!dataset_override.empty()) cfg.dataset_path = dataset_override;
        if (cfg.dataset_path.empty()) {
            std::fprintf(stderr, "scauthd: no dataset configured\n");
            return 1;
        }

        scauth::RecordStore store = scauth::RecordStore::ingest_csv(cfg.dataset_path);
        std::fprintf(stderr, "scauthd: loaded %zu records from %s\n", store.size(),
                     cfg.dataset_path.c_str());

        scauth::Gateway gateway(cfg, std::move(store));
        if (!cfg.users_path.empty()) gateway.load_users_file(cfg.users_path);

        // Block SIGINT/SIGTERM before the server thread exists so it inherits
        // the mask, then park in sigwait. Shutdown then runs in a normal
        // context; a handler calling stop() would join from a signal frame.
        sigset_t sigs;
        sigemptyset(&sigs);
        sigaddset(&sigs, SIGINT);
        sigaddset(&sigs, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

        int port = gateway.start(cfg.port);
        std::printf("scauthd listening on 127.0.0.1:%d\n", port);
        std::fflush(stdout);

        int sig = 0;
        sigwait(&sigs, &sig);
        gateway.stop();

        gateway.save_chain_file();
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "scauthd: %s\n", e.what());
        return 1;
    }
}
