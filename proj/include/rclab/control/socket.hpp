#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rclab/control/bus.hpp"

namespace rclab::control {

/// Line-delimited JSON bridge between TCP clients and a Bus. A client sends
/// {"topic", "correlation_id", "payload"} per line; every ack, telemetry,
/// stats and workload message on the bus is written back to all clients as
/// {"topic", "message"}.
class SocketServer {
public:
    explicit SocketServer(Bus& bus, std::string host = "127.0.0.1", std::uint16_t port = 0);
    ~SocketServer();
    SocketServer(const SocketServer&) = delete;
    SocketServer& operator=(const SocketServer&) = delete;

    /// Binds and starts accepting. Throws std::system_error on socket errors.
    void start();
    void stop();
    /// The bound port (useful when constructed with port 0).
    std::uint16_t port() const { return port_; }

private:
    struct Client {
        int fd = -1;
        std::mutex write_mu;
        std::thread reader;
        std::vector<std::uint64_t> subs;
    };

    void accept_loop();
    void serve(const std::shared_ptr<Client>& c);

    Bus& bus_;
    std::string host_;
    std::uint16_t port_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex clients_mu_;
    std::list<std::shared_ptr<Client>> clients_;
};

/// Blocking client for the socket transport.
class SocketClient {
public:
    SocketClient(const std::string& host, std::uint16_t port);
    ~SocketClient();
    SocketClient(const SocketClient&) = delete;
    SocketClient& operator=(const SocketClient&) = delete;

    void send(const std::string& topic, const nlohmann::json& payload, const std::string& correlation_id);
    /// Next message line, or nullopt on timeout or EOF.
    std::optional<nlohmann::json> read(std::chrono::milliseconds timeout);
    /// Sends a command and waits for the ack carrying `correlation_id`;
    /// other messages read meanwhile are dropped.
    std::optional<nlohmann::json> request(const std::string& topic, const nlohmann::json& payload,
                                          const std::string& correlation_id,
                                          std::chrono::milliseconds timeout = std::chrono::seconds(10));

private:
    int fd_ = -1;
    std::string buffer_;
};

}  // namespace rclab::control
