#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <thread>

#include "mlcapsule/error.hpp"
#include "mlcapsule/protocol.hpp"

namespace mlcapsule::wire {

// Frame: "MLC1" | type u8 | payload length u32 LE | payload.
enum class MsgType : std::uint8_t {
    ProvisionRequest = 0x01,
    ProvisionResponse = 0x02,
    Error = 0x7F,
};

inline constexpr std::uint32_t kDefaultMaxFrame = 64u * 1024 * 1024;

Bytes encode_frame(MsgType type, ByteView payload);

struct Frame {
    MsgType type;
    Bytes payload;
};

// Error payload: u16 code (ErrorCode exit value) | UTF-8 message.
Bytes encode_error_payload(ErrorCode code, std::string_view message);
std::pair<ErrorCode, std::string> decode_error_payload(ByteView payload);

// Test-harness switch: when disabled, every socket operation throws
// TransportError. Also honours MLCAPSULE_DISABLE_NETWORK=1.
void set_network_disabled(bool disabled);
bool network_disabled();

struct ServerConfig {
    std::string bind_host = "127.0.0.1";
    std::uint16_t port = 0;  // 0 picks an ephemeral port
    std::uint32_t max_frame = kDefaultMaxFrame;
};

// Provisioning endpoint: answers ProvisionRequest frames with a
// ProvisionResponse carrying the hidden model, or an Error frame.
class ProvisionServer {
public:
    ProvisionServer(ServerConfig cfg, nn::ModelDef def, nn::ModelSecrets secrets);
    ~ProvisionServer();

    ProvisionServer(const ProvisionServer&) = delete;
    ProvisionServer& operator=(const ProvisionServer&) = delete;

    std::uint16_t start();  // returns the bound port
    void stop();
    std::uint16_t port() const { return port_; }
    std::uint64_t requests_served() const { return served_.load(); }

private:
    void serve_loop();
    void handle_connection(int fd);

    ServerConfig cfg_;
    nn::ModelDef def_;
    nn::ModelSecrets secrets_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::thread thread_;
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> served_{0};
};

// One request/response exchange over a fresh connection. Server-side Error
// frames re-raise locally with their original code.
protocol::HiddenModel request_provision(const std::string& host, std::uint16_t port,
                                        const protocol::ModelRequest& req,
                                        std::uint32_t max_frame = kDefaultMaxFrame);

}  // namespace mlcapsule::wire
