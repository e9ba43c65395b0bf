#include "mlcapsule/workspace.hpp"

#include <algorithm>
#include <sstream>

#include "mlcapsule/error.hpp"
#include "mlcapsule/model_io.hpp"

namespace mlcapsule::workspace {

namespace {

std::string guard_mode_name(GuardMode m) {
    switch (m) {
        case GuardMode::Off: return "off";
        case GuardMode::Counter: return "counter";
        case GuardMode::Ticket: return "ticket";
    }
    return "counter";
}

GuardMode guard_mode_from(const std::string& s) {
    if (s == "off") return GuardMode::Off;
    if (s == "counter") return GuardMode::Counter;
    if (s == "ticket") return GuardMode::Ticket;
    throw Error(ErrorCode::ParseError, "unknown guard mode '" + s + "'");
}

// Serialized stealing monitor: archive blob + append history + latched alarm.
struct StealingFile {
    Bytes archive;
    std::vector<bool> history;
    bool alarmed = false;

    Bytes serialize() const {
        Bytes out;
        put_lp(out, archive);
        put_u32le(out, static_cast<std::uint32_t>(history.size()));
        for (bool b : history) out.push_back(b ? 1 : 0);
        out.push_back(alarmed ? 1 : 0);
        return out;
    }
    static StealingFile parse(ByteView raw) {
        ByteReader r(raw);
        StealingFile f;
        f.archive = r.lp();
        std::uint32_t n = r.u32le();
        for (std::uint32_t i = 0; i < n; ++i) f.history.push_back(r.u8() != 0);
        f.alarmed = r.u8() != 0;
        return f;
    }
};

}  // namespace

std::string Config::write() const {
    std::ostringstream out;
    out << "guard_mode " << guard_mode_name(guard_mode) << "\n";
    out << "threshold " << threshold << "\n";
    out << "sp_host " << sp_host << "\n";
    out << "sp_port " << sp_port << "\n";
    out << "noise_c " << noise_c << "\n";
    out << "noise_t " << noise_t << "\n";
    out << "re_detect_enabled " << (re_detect_enabled ? 1 : 0) << "\n";
    out << "stealing_enabled " << (stealing_enabled ? 1 : 0) << "\n";
    out << "deny_on_alarm " << (deny_on_alarm ? 1 : 0) << "\n";
    out << "stealing_tau " << stealing_tau << "\n";
    out << "stealing_rate_floor " << stealing_rate_floor << "\n";
    out << "stealing_window " << stealing_window << "\n";
    out << "chunk_size " << chunk_size << "\n";
    out << "memory_budget " << memory_budget << "\n";
    out << "seed " << seed << "\n";
    return out.str();
}

Config Config::parse(std::string_view text) {
    Config cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key, value;
        if (!(ls >> key) || key[0] == '#') continue;
        if (!(ls >> value)) throw Error(ErrorCode::ParseError, "config key without value: " + key);

        try {
            if (key == "guard_mode") cfg.guard_mode = guard_mode_from(value);
            else if (key == "threshold") cfg.threshold = std::stoull(value);
            else if (key == "sp_host") cfg.sp_host = value;
            else if (key == "sp_port") cfg.sp_port = static_cast<std::uint16_t>(std::stoul(value));
            else if (key == "noise_c") cfg.noise_c = std::stof(value);
            else if (key == "noise_t") cfg.noise_t = value;
            else if (key == "re_detect_enabled") cfg.re_detect_enabled = value != "0";
            else if (key == "stealing_enabled") cfg.stealing_enabled = value != "0";
            else if (key == "deny_on_alarm") cfg.deny_on_alarm = value != "0";
            else if (key == "stealing_tau") cfg.stealing_tau = std::stod(value);
            else if (key == "stealing_rate_floor") cfg.stealing_rate_floor = std::stod(value);
            else if (key == "stealing_window") cfg.stealing_window = std::stoul(value);
            else if (key == "chunk_size") cfg.chunk_size = std::stoul(value);
            else if (key == "memory_budget") cfg.memory_budget = std::stoull(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else throw Error(ErrorCode::ParseError, "unknown config key '" + key + "'");
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw Error(ErrorCode::ParseError, "bad value for config key '" + key + "'");
        }
    }
    return cfg;
}

CapsuleWorkspace::CapsuleWorkspace(std::filesystem::path root) : root_(std::move(root)) {}

CapsuleWorkspace CapsuleWorkspace::create(std::filesystem::path root, const Config& cfg) {
    std::filesystem::create_directories(root);
    CapsuleWorkspace ws(std::move(root));
    ws.cfg_ = cfg;
    ws.save_config();
    return ws;
}

CapsuleWorkspace CapsuleWorkspace::open(std::filesystem::path root) {
    CapsuleWorkspace ws(std::move(root));
    if (!std::filesystem::exists(ws.config_path())) {
        throw Error(ErrorCode::StorageUnavailable,
                    "no workspace at " + ws.root_.string() + " (missing config.cfg)");
    }
    ws.cfg_ = Config::parse(to_string(nn::read_file(ws.config_path())));
    return ws;
}

void CapsuleWorkspace::save_config() {
    nn::write_file(config_path(), to_bytes(cfg_.write()));
}

std::filesystem::path CapsuleWorkspace::layer_path(std::size_t i) const {
    char name[32];
    std::snprintf(name, sizeof name, "layer_%03zu.seal", i);
    return layers_dir() / name;
}

CapsuleWorkspace::Platform CapsuleWorkspace::load_platform() const {
    if (!std::filesystem::exists(platform_path())) {
        throw Error(ErrorCode::StorageUnavailable, "workspace is not provisioned");
    }
    iee::ProgramRegistry registry;
    registry.add(protocol::make_program_q());
    auto [params, hw] = iee::HwInstance::restore(nn::read_file(platform_path()), registry);

    Platform p;
    p.params = params;
    p.hw = std::move(hw);
    // the workspace runs exactly one enclave: program Q, loaded at obtain time
    Bytes tag(protocol::program_q_tag().begin(), protocol::program_q_tag().end());
    bool found = false;
    // handles are opaque; the platform file preserves them, so scan 0..count
    // is not possible — the handle is stored alongside instead.
    if (std::filesystem::exists(root_ / "enclave.hdl")) {
        Bytes id = nn::read_file(root_ / "enclave.hdl");
        if (id.size() == p.q_handle.id.size()) {
            std::copy(id.begin(), id.end(), p.q_handle.id.begin());
            found = true;
        }
    }
    if (!found) {
        throw Error(ErrorCode::StorageUnavailable, "workspace enclave handle missing");
    }
    return p;
}

void CapsuleWorkspace::save_platform(const Platform& p) {
    nn::write_file_private(platform_path(), p.hw->save_state());
    nn::write_file_private(root_ / "enclave.hdl", Bytes(p.q_handle.id.begin(), p.q_handle.id.end()));
}

guard::PersistentGuard CapsuleWorkspace::make_guard(const Platform& p) const {
    crypto::Digest measurement = protocol::program_q_tag();
    return guard::PersistentGuard(guard_path(), counter_path(),
                                  p.hw->seal_key_for(measurement), measurement);
}

nn::ModelDef CapsuleWorkspace::load_model_def() const {
    return nn::parse_model_doc(to_string(nn::read_file(model_def_path())));
}

std::vector<nn::CapsuleLayer> CapsuleWorkspace::load_layers() const {
    nn::ModelDef def = load_model_def();
    std::vector<nn::CapsuleLayer> layers;
    layers.reserve(def.layers.size());
    for (std::size_t i = 0; i < def.layers.size(); ++i) {
        if (!std::filesystem::exists(layer_path(i))) {
            throw Error(ErrorCode::StorageUnavailable,
                        "sealed layer file missing: " + layer_path(i).string());
        }
        layers.push_back(nn::CapsuleLayer::parse(nn::read_file(layer_path(i))));
    }
    return layers;
}

void CapsuleWorkspace::obtain_and_provision(const nn::ModelDef& def, const std::string& host,
                                            std::uint16_t port) {
    def.validate();

    auto [req, session] = protocol::obtain(def);
    protocol::HiddenModel hidden = wire::request_provision(host, port, req);
    if (!(hidden.model_def == def)) {
        throw Error(ErrorCode::SchemaError,
                    "provisioned definition differs from the requested one");
    }

    auto layers = protocol::seal_layers(session, hidden);
    std::filesystem::create_directories(layers_dir());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        nn::write_file(layer_path(i), layers[i].serialize());
    }
    nn::write_file(model_def_path(), to_bytes(nn::write_model_doc(def)));

    Platform p{session.params, std::move(session.hw), session.q_handle};
    save_platform(p);

    if (cfg_.guard_mode == GuardMode::Counter) {
        make_guard(p).initialize(cfg_.threshold);
    }
}

CapsuleWorkspace::ClassifyResult CapsuleWorkspace::classify(
    const nn::Tensor& input, const std::optional<guard::QueryTicket>& ticket) {
    Platform p = load_platform();

    // 1. pay-per-query guard
    if (cfg_.guard_mode == GuardMode::Counter) {
        make_guard(p).begin_query();
    } else if (cfg_.guard_mode == GuardMode::Ticket) {
        if (!ticket) {
            throw Error(ErrorCode::BadSignature, "ticket guard mode requires a query ticket");
        }
        if (!std::filesystem::exists(ticket_key_path())) {
            throw Error(ErrorCode::StorageUnavailable, "no SP ticket key installed");
        }
        Bytes key = nn::read_file(ticket_key_path());
        guard::SpentSet spent;
        if (std::filesystem::exists(spent_path())) {
            spent = guard::SpentSet::parse(nn::read_file(spent_path()));
        }
        guard::redeem_ticket(key, *ticket, nn::serialize_tensor(input), spent);
        nn::write_file_private(spent_path(), spent.serialize());
    }

    // 2. reverse-engineering input detector
    if (cfg_.re_detect_enabled) {
        if (!has_detector()) {
            throw Error(ErrorCode::StorageUnavailable, "detector enabled but not installed");
        }
        auto [ddef, dsecrets] = nn::import_weights(detector_def_path(), detector_weights_path());
        defense::DetectorModel det{std::move(ddef), std::move(dsecrets)};
        if (defense::re_detector_malicious(det, input)) {
            throw Error(ErrorCode::InputRejected, "input flagged as a crafted probe");
        }
    }

    // 3. query-set growth monitoring
    bool alarm = false;
    if (cfg_.stealing_enabled) {
        defense::StealingConfig scfg{cfg_.stealing_tau, cfg_.stealing_rate_floor,
                                     cfg_.stealing_window};
        defense::StealingMonitor monitor(scfg, input.size());
        if (std::filesystem::exists(archive_path())) {
            StealingFile persisted = StealingFile::parse(nn::read_file(archive_path()));
            monitor.restore(defense::QueryArchive::parse(persisted.archive), persisted.history,
                            persisted.alarmed);
        }
        monitor.observe(input.data);
        alarm = monitor.alarmed();
        StealingFile out{monitor.archive().serialize(), monitor.history(), monitor.alarmed()};
        nn::write_file(archive_path(), out.serialize());
        if (alarm && cfg_.deny_on_alarm) {
            throw Error(ErrorCode::StealingSuspected,
                        "query stream growth fell below the configured floor");
        }
    }

    // 4. sealed layer-wise classification inside the enclave
    auto layers = load_layers();
    protocol::ClientSession session{std::move(p.hw), p.params, p.q_handle, load_model_def()};
    nn::Tensor posterior = protocol::classify_sealed(session, layers, input);

    // 5. posterior noising
    ClassifyResult result;
    result.stealing_alarm = alarm;
    if (cfg_.noise_c > 0.0f) {
        defense::Posterior base(posterior.data.begin(), posterior.data.end());
        defense::NoiseConfig ncfg;
        ncfg.c = cfg_.noise_c;
        if (cfg_.noise_t == "uniform") {
            ncfg.noise_dist.assign(base.size(), 1.0f / static_cast<float>(base.size()));
        } else {
            std::istringstream ts(cfg_.noise_t);
            std::string tok;
            while (std::getline(ts, tok, ',')) ncfg.noise_dist.push_back(std::stof(tok));
        }
        defense::Posterior noised = defense::noise_posterior(base, ncfg);
        posterior.data.assign(noised.begin(), noised.end());
        result.noised = true;
    }

    Platform p2{session.params, std::move(session.hw), session.q_handle};
    save_platform(p2);
    result.posterior = std::move(posterior);
    return result;
}

CapsuleWorkspace::Status CapsuleWorkspace::status() const {
    Status s;
    s.provisioned = std::filesystem::exists(platform_path());
    if (cfg_.guard_mode == GuardMode::Counter && std::filesystem::exists(guard_path())) {
        Platform p = load_platform();
        guard::GuardState state = make_guard(p).peek();
        s.counter = state.counter;
        s.threshold = state.threshold;
        s.version = state.version;
    }
    if (std::filesystem::exists(archive_path())) {
        StealingFile f = StealingFile::parse(nn::read_file(archive_path()));
        s.archive_size = defense::QueryArchive::parse(f.archive).size();
        s.alarmed = f.alarmed;
    }
    return s;
}

void CapsuleWorkspace::install_detector(const defense::DetectorModel& det) {
    nn::export_weights(detector_def_path(), detector_weights_path(), det.def, det.secrets);
}

bool CapsuleWorkspace::has_detector() const {
    return std::filesystem::exists(detector_def_path()) &&
           std::filesystem::exists(detector_weights_path());
}

void CapsuleWorkspace::install_ticket_key(ByteView sp_verify_key) {
    nn::write_file(ticket_key_path(), sp_verify_key);
}

nn::Tensor load_input_tensor(const std::filesystem::path& path,
                             const std::vector<std::uint32_t>& expected_shape) {
    Bytes raw = nn::read_file(path);
    if (raw.size() >= 4 && raw[0] == 'M' && raw[1] == 'L' && raw[2] == 'C' && raw[3] == 'W') {
        auto tensors = nn::read_weights(raw);
        if (tensors.size() != 1) {
            throw Error(ErrorCode::ParseError, "input file must hold exactly one tensor");
        }
        if (tensors[0].dims != expected_shape) {
            throw Error(ErrorCode::ShapeMismatch, "input tensor shape does not match the model");
        }
        return tensors[0];
    }
    // whitespace-separated floats
    std::istringstream in(to_string(raw));
    std::vector<float> values;
    float v;
    while (in >> v) values.push_back(v);
    if (values.size() != nn::shape_size(expected_shape)) {
        throw Error(ErrorCode::ShapeMismatch,
                    "input has " + std::to_string(values.size()) + " values, model expects " +
                        std::to_string(nn::shape_size(expected_shape)));
    }
    return nn::Tensor(expected_shape, std::move(values));
}

}  // namespace mlcapsule::workspace
