#include "rclab/control/socket.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <system_error>

namespace rclab::control {

namespace {

[[noreturn]] void fail(const char* what) { throw std::system_error(errno, std::generic_category(), what); }

void write_all(int fd, const std::string& data)
{
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return;  // peer went away; reader side will notice
        }
        off += static_cast<std::size_t>(n);
    }
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port)
{
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw std::invalid_argument("not an IPv4 address: " + host);
    }
    return addr;
}

bool is_outbound(const std::string& topic)
{
    for (const char* leaf : {"/ack", "/telemetry", "/stats", "/workload"}) {
        const std::string l(leaf);
        if (topic.size() >= l.size() && topic.compare(topic.size() - l.size(), l.size(), l) == 0) return true;
    }
    return false;
}

}  // namespace

SocketServer::SocketServer(Bus& bus, std::string host, std::uint16_t port)
    : bus_(bus), host_(std::move(host)), port_(port)
{
}

SocketServer::~SocketServer() { stop(); }

void SocketServer::start()
{
    if (running_) return;
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) fail("socket");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = make_addr(host_, port_);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) fail("bind");
    if (::listen(listen_fd_, 16) < 0) fail("listen");
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void SocketServer::stop()
{
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) acceptor_.join();
    std::list<std::shared_ptr<Client>> clients;
    {
        std::lock_guard lock(clients_mu_);
        clients.swap(clients_);
    }
    for (auto& c : clients) {
        ::shutdown(c->fd, SHUT_RDWR);
        if (c->reader.joinable()) c->reader.join();
        for (auto id : c->subs) bus_.unsubscribe(id);
        ::close(c->fd);
    }
}

void SocketServer::accept_loop()
{
    while (running_) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        auto c = std::make_shared<Client>();
        c->fd = fd;
        std::weak_ptr<Client> weak = c;
        for (const char* leaf : {"ack", "telemetry", "stats", "workload"}) {
            c->subs.push_back(bus_.subscribe(std::string("rc/+/") + leaf, [weak](const std::string& topic, const nlohmann::json& msg) {
                auto cl = weak.lock();
                if (!cl) return;
                const std::string line = nlohmann::json{{"topic", topic}, {"message", msg}}.dump() + "\n";
                std::lock_guard lock(cl->write_mu);
                write_all(cl->fd, line);
            }));
        }
        std::lock_guard lock(clients_mu_);
        clients_.push_back(c);
        c->reader = std::thread([this, c] { serve(c); });
    }
}

void SocketServer::serve(const std::shared_ptr<Client>& c)
{
    std::string buf;
    char chunk[4096];
    for (;;) {
        const ssize_t n = ::recv(c->fd, chunk, sizeof chunk, 0);
        if (n <= 0) break;
        buf.append(chunk, static_cast<std::size_t>(n));
        std::size_t nl;
        while ((nl = buf.find('\n')) != std::string::npos) {
            const std::string line = buf.substr(0, nl);
            buf.erase(0, nl + 1);
            if (line.empty()) continue;
            nlohmann::json msg;
            std::string error;
            try {
                msg = nlohmann::json::parse(line);
                if (!msg.is_object() || !msg.contains("topic") || !msg.at("topic").is_string()) {
                    error = "expected an object with a string 'topic'";
                }
            } catch (const nlohmann::json::exception& e) {
                error = e.what();
            }
            if (!error.empty()) {
                const std::string reply =
                    nlohmann::json{{"topic", "error"}, {"message", {{"code", "bad-message"}, {"message", error}}}}.dump() +
                    "\n";
                std::lock_guard lock(c->write_mu);
                write_all(c->fd, reply);
                continue;
            }
            const std::string topic = msg.at("topic");
            nlohmann::json body = {{"correlation_id", msg.value("correlation_id", "")},
                                   {"payload", msg.contains("payload") ? msg.at("payload") : nlohmann::json::object()}};
            std::string refused;
            if (is_outbound(topic)) {
                refused = "topic '" + topic + "' is device output";
            } else if (bus_.publish(topic, body) == 0) {
                refused = "no handler for topic '" + topic + "'";
            }
            if (!refused.empty()) {
                const nlohmann::json ack = {{"correlation_id", body["correlation_id"]},
                                            {"ok", false},
                                            {"error", {{"code", "unknown-topic"}, {"message", refused}}}};
                const std::string reply = nlohmann::json{{"topic", "error"}, {"message", ack}}.dump() + "\n";
                std::lock_guard lock(c->write_mu);
                write_all(c->fd, reply);
            }
        }
    }
}

SocketClient::SocketClient(const std::string& host, std::uint16_t port)
{
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) fail("socket");
    sockaddr_in addr = make_addr(host, port);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        const int err = errno;
        ::close(fd_);
        throw std::system_error(err, std::generic_category(), "connect");
    }
}

SocketClient::~SocketClient()
{
    if (fd_ >= 0) ::close(fd_);
}

void SocketClient::send(const std::string& topic, const nlohmann::json& payload, const std::string& correlation_id)
{
    write_all(fd_, nlohmann::json{{"topic", topic}, {"correlation_id", correlation_id}, {"payload", payload}}.dump() + "\n");
}

std::optional<nlohmann::json> SocketClient::read(std::chrono::milliseconds timeout)
{
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            const std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return nlohmann::json::parse(line);
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) return std::nullopt;
        pollfd p{fd_, POLLIN, 0};
        if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) return std::nullopt;
        char chunk[4096];
        const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n <= 0) return std::nullopt;
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::optional<nlohmann::json> SocketClient::request(const std::string& topic, const nlohmann::json& payload,
                                                    const std::string& correlation_id, std::chrono::milliseconds timeout)
{
    send(topic, payload, correlation_id);
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) return std::nullopt;
        auto msg = read(left);
        if (!msg) return std::nullopt;
        const auto& m = (*msg)["message"];
        if (m.is_object() && m.value("correlation_id", "") == correlation_id && m.contains("ok")) return m;
    }
}

}  // namespace rclab::control
