#include "mlcapsule/wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>

#include "mlcapsule/error.hpp"

namespace mlcapsule::wire {

namespace {

std::atomic<bool> g_network_disabled{false};

void check_network_allowed() {
    if (network_disabled()) {
        throw Error(ErrorCode::TransportError, "network access is disabled");
    }
}

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    ~Fd() {
        if (fd >= 0) ::close(fd);
    }
    Fd(Fd&& other) noexcept : fd(other.fd) { other.fd = -1; }
    Fd& operator=(Fd&&) = delete;
    Fd(const Fd&) = delete;
    int release() {
        int f = fd;
        fd = -1;
        return f;
    }
};

void write_all(int fd, ByteView data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) throw Error(ErrorCode::TransportError, "send failed");
        sent += static_cast<std::size_t>(n);
    }
}

// Reads exactly n bytes; false on clean EOF at a frame boundary.
bool read_exact(int fd, std::uint8_t* out, std::size_t n, bool eof_ok) {
    std::size_t got = 0;
    while (got < n) {
        ssize_t r = ::recv(fd, out + got, n - got, 0);
        if (r == 0) {
            if (got == 0 && eof_ok) return false;
            throw Error(ErrorCode::TransportError, "connection closed mid-frame");
        }
        if (r < 0) throw Error(ErrorCode::TransportError, "recv failed");
        got += static_cast<std::size_t>(r);
    }
    return true;
}

// Returns nullopt on clean EOF before a frame started.
std::optional<Frame> read_frame(int fd, std::uint32_t max_frame) {
    std::uint8_t head[9];
    if (!read_exact(fd, head, sizeof head, true)) return std::nullopt;
    if (std::memcmp(head, "MLC1", 4) != 0) {
        throw Error(ErrorCode::ParseError, "bad frame magic");
    }
    Frame f;
    f.type = static_cast<MsgType>(head[4]);
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(head[5 + i]) << (8 * i);
    if (len > max_frame) {
        throw Error(ErrorCode::TransportError,
                    "frame of " + std::to_string(len) + " bytes exceeds limit");
    }
    f.payload.resize(len);
    if (len > 0) read_exact(fd, f.payload.data(), len, false);
    return f;
}

}  // namespace

Bytes encode_frame(MsgType type, ByteView payload) {
    Bytes out;
    out.reserve(9 + payload.size());
    for (char c : {'M', 'L', 'C', '1'}) out.push_back(static_cast<std::uint8_t>(c));
    out.push_back(static_cast<std::uint8_t>(type));
    put_u32le(out, static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Bytes encode_error_payload(ErrorCode code, std::string_view message) {
    Bytes out;
    put_u16le(out, static_cast<std::uint16_t>(error_exit_code(code)));
    out.insert(out.end(), message.begin(), message.end());
    return out;
}

std::pair<ErrorCode, std::string> decode_error_payload(ByteView payload) {
    ByteReader r(payload);
    std::uint16_t code = r.u16le();
    std::string message = to_string(r.take(r.remaining()));
    // map the exit code back to the enum; unknown values degrade to transport
    for (int c = 0; c <= static_cast<int>(ErrorCode::StealingSuspected); ++c) {
        if (error_exit_code(static_cast<ErrorCode>(c)) == code) {
            return {static_cast<ErrorCode>(c), message};
        }
    }
    return {ErrorCode::TransportError, message};
}

void set_network_disabled(bool disabled) {
    g_network_disabled.store(disabled);
}

bool network_disabled() {
    if (g_network_disabled.load()) return true;
    const char* env = std::getenv("MLCAPSULE_DISABLE_NETWORK");
    return env != nullptr && env[0] == '1';
}

ProvisionServer::ProvisionServer(ServerConfig cfg, nn::ModelDef def, nn::ModelSecrets secrets)
    : cfg_(std::move(cfg)), def_(std::move(def)), secrets_(std::move(secrets)) {}

ProvisionServer::~ProvisionServer() {
    stop();
}

std::uint16_t ProvisionServer::start() {
    check_network_allowed();
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (fd.fd < 0) throw Error(ErrorCode::TransportError, "socket failed");
    int one = 1;
    ::setsockopt(fd.fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(cfg_.port);
    if (::inet_pton(AF_INET, cfg_.bind_host.c_str(), &addr.sin_addr) != 1) {
        throw Error(ErrorCode::TransportError, "bad bind address " + cfg_.bind_host);
    }
    if (::bind(fd.fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        throw Error(ErrorCode::TransportError, "bind failed on " + cfg_.bind_host + ":" +
                                                   std::to_string(cfg_.port));
    }
    if (::listen(fd.fd, 16) != 0) throw Error(ErrorCode::TransportError, "listen failed");

    socklen_t len = sizeof addr;
    ::getsockname(fd.fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    listen_fd_ = fd.release();
    stop_.store(false);
    thread_ = std::thread([this] { serve_loop(); });
    return port_;
}

void ProvisionServer::stop() {
    stop_.store(true);
    if (thread_.joinable()) thread_.join();
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
}

void ProvisionServer::serve_loop() {
    while (!stop_.load()) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        int ready = ::poll(&pfd, 1, 100);
        if (ready <= 0) continue;
        int conn = ::accept(listen_fd_, nullptr, nullptr);
        if (conn < 0) continue;
        // one session per connection
        std::thread([this, conn] { handle_connection(conn); }).detach();
    }
}

void ProvisionServer::handle_connection(int fd) {
    Fd guard(fd);
    try {
        auto frame = read_frame(fd, cfg_.max_frame);
        if (!frame) return;
        if (frame->type != MsgType::ProvisionRequest) {
            write_all(fd, encode_frame(MsgType::Error,
                                       encode_error_payload(ErrorCode::ParseError,
                                                            "expected a provision request")));
            return;
        }
        protocol::ModelRequest req = protocol::ModelRequest::parse(frame->payload);
        protocol::HiddenModel hidden = protocol::provide(def_, secrets_, req);
        write_all(fd, encode_frame(MsgType::ProvisionResponse, hidden.serialize()));
        served_.fetch_add(1);
    } catch (const Error& e) {
        try {
            write_all(fd, encode_frame(MsgType::Error, encode_error_payload(e.code(), e.message())));
        } catch (...) {
        }
    } catch (const std::exception& e) {
        try {
            write_all(fd, encode_frame(MsgType::Error,
                                       encode_error_payload(ErrorCode::TransportError, e.what())));
        } catch (...) {
        }
    }
}

protocol::HiddenModel request_provision(const std::string& host, std::uint16_t port,
                                        const protocol::ModelRequest& req,
                                        std::uint32_t max_frame) {
    check_network_allowed();
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (fd.fd < 0) throw Error(ErrorCode::TransportError, "socket failed");

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw Error(ErrorCode::TransportError, "bad address " + host);
    }
    if (::connect(fd.fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        throw Error(ErrorCode::TransportError,
                    "connect failed to " + host + ":" + std::to_string(port));
    }

    write_all(fd.fd, encode_frame(MsgType::ProvisionRequest, req.serialize()));
    auto frame = read_frame(fd.fd, max_frame);
    if (!frame) throw Error(ErrorCode::TransportError, "server closed without replying");
    if (frame->type == MsgType::Error) {
        auto [code, message] = decode_error_payload(frame->payload);
        throw Error(code, "provisioning rejected: " + message);
    }
    if (frame->type != MsgType::ProvisionResponse) {
        throw Error(ErrorCode::ParseError, "unexpected frame type");
    }
    return protocol::HiddenModel::parse(frame->payload);
}

}  // namespace mlcapsule::wire
