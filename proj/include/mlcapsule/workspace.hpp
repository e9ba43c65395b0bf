#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mlcapsule/defense.hpp"
#include "mlcapsule/guard.hpp"
#include "mlcapsule/protocol.hpp"
#include "mlcapsule/wire.hpp"

namespace mlcapsule::workspace {

enum class GuardMode { Off, Counter, Ticket };

struct Config {
    GuardMode guard_mode = GuardMode::Counter;
    std::uint64_t threshold = 1000;
    std::string sp_host = "127.0.0.1";
    std::uint16_t sp_port = 7788;
    float noise_c = 0.0f;             // 0 disables posterior noising
    std::string noise_t = "uniform";  // "uniform" or comma-separated floats
    bool re_detect_enabled = false;
    bool stealing_enabled = false;
    bool deny_on_alarm = true;
    double stealing_tau = 1.0;
    double stealing_rate_floor = 0.1;
    std::uint32_t stealing_window = 100;
    std::uint32_t chunk_size = crypto::kDefaultChunkSize;
    std::uint64_t memory_budget = 0;
    std::uint64_t seed = 1;

    std::string write() const;
    static Config parse(std::string_view text);
};

// On-disk layout of one provisioned capsule. Every artifact uses the owning
// module's wire format, so a workspace directory is relocatable as a unit.
class CapsuleWorkspace {
public:
    explicit CapsuleWorkspace(std::filesystem::path root);

    static CapsuleWorkspace create(std::filesystem::path root, const Config& cfg);
    static CapsuleWorkspace open(std::filesystem::path root);

    const Config& config() const { return cfg_; }
    void save_config();
    Config& config() { return cfg_; }
    const std::filesystem::path& root() const { return root_; }

    // Setup phase: attest, fetch the hidden model from the provisioning
    // endpoint, seal layer files, initialize the guard. Network is required
    // here and only here.
    void obtain_and_provision(const nn::ModelDef& def, const std::string& host,
                              std::uint16_t port);

    struct ClassifyResult {
        nn::Tensor posterior;
        bool noised = false;
        bool stealing_alarm = false;
    };

    // Inference phase, fully offline. Hook order: guard, input detector,
    // query archive, classification, posterior noising; each stage can veto.
    ClassifyResult classify(const nn::Tensor& input,
                            const std::optional<guard::QueryTicket>& ticket = {});

    struct Status {
        bool provisioned = false;
        std::uint64_t counter = 0;
        std::uint64_t threshold = 0;
        std::uint64_t version = 0;
        std::size_t archive_size = 0;
        bool alarmed = false;
    };
    Status status() const;

    void install_detector(const defense::DetectorModel& det);
    bool has_detector() const;

    // Stores the SP's ticket verification key (ticket guard mode).
    void install_ticket_key(ByteView sp_verify_key);

    // paths (also used by tests for tamper/rollback scenarios)
    std::filesystem::path platform_path() const { return root_ / "platform.state"; }
    std::filesystem::path model_def_path() const { return root_ / "model.def"; }
    std::filesystem::path layers_dir() const { return root_ / "layers"; }
    std::filesystem::path layer_path(std::size_t i) const;
    std::filesystem::path guard_path() const { return root_ / "guard.seal"; }
    std::filesystem::path counter_path() const { return root_ / "counter.mlcc"; }
    std::filesystem::path config_path() const { return root_ / "config.cfg"; }
    std::filesystem::path archive_path() const { return root_ / "stealing.bin"; }
    std::filesystem::path spent_path() const { return root_ / "spent.bin"; }
    std::filesystem::path ticket_key_path() const { return root_ / "sp_ticket.pk"; }
    std::filesystem::path detector_def_path() const { return root_ / "detector.def"; }
    std::filesystem::path detector_weights_path() const { return root_ / "detector.mlcw"; }

private:
    struct Platform {
        iee::HwParams params;
        std::unique_ptr<iee::HwInstance> hw;
        iee::EnclaveHandle q_handle;
    };
    Platform load_platform() const;
    void save_platform(const Platform& p);
    guard::PersistentGuard make_guard(const Platform& p) const;
    nn::ModelDef load_model_def() const;
    std::vector<nn::CapsuleLayer> load_layers() const;

    std::filesystem::path root_;
    Config cfg_;
};

// Parses either an MLCW single-tensor file or whitespace-separated floats
// (shape taken from the model definition).
nn::Tensor load_input_tensor(const std::filesystem::path& path,
                             const std::vector<std::uint32_t>& expected_shape);

}  // namespace mlcapsule::workspace
