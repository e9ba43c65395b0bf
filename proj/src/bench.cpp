#include "mlcapsule/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "mlcapsule/error.hpp"
#include "mlcapsule/rng.hpp"
#include "mlcapsule/model_io.hpp"

namespace mlcapsule::bench {

namespace {

// Keeps results alive so the optimizer cannot drop the computation.
volatile float g_sink = 0.0f;

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct Stats {
    double mean = 0.0;
    double sd = 0.0;
};

Stats summarize(const std::vector<double>& samples) {
    Stats s;
    if (samples.empty()) return s;
    double sum = 0.0;
    for (double v : samples) sum += v;
    s.mean = sum / static_cast<double>(samples.size());
    double var = 0.0;
    for (double v : samples) var += (v - s.mean) * (v - s.mean);
    s.sd = samples.size() > 1 ? std::sqrt(var / static_cast<double>(samples.size() - 1)) : 0.0;
    return s;
}

nn::ModelSecrets random_params_for(const nn::ModelDef& def, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
    nn::ModelSecrets secrets;
    for (const auto& shape : def.param_shapes()) {
        nn::LayerParams p;
        p.weights = nn::Tensor::zeros(shape.weights);
        for (auto& v : p.weights.data) v = dist(rng);
        p.bias = nn::Tensor::zeros(shape.bias);
        for (auto& v : p.bias.data) v = dist(rng);
        secrets.params.push_back(std::move(p));
    }
    return secrets;
}

nn::Tensor random_tensor(const std::vector<std::uint32_t>& dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    nn::Tensor t = nn::Tensor::zeros(dims);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

// Wraps a single layer into a one-layer model so both paths share code. The
// spec's own output becomes the "class count" surrogate; no softmax here, the
// kernels are timed raw.
struct LayerFixture {
    nn::LayerSpec spec;
    nn::LayerParams params;
    bool has_params;
    nn::Tensor input;
    std::vector<nn::CapsuleLayer> capsule;  // single entry
    crypto::SealKey key{};
    crypto::Digest measurement{};
};

LayerFixture make_fixture(const nn::LayerSpec& spec, const std::vector<std::uint32_t>& input_shape,
                          std::uint32_t chunk_size, std::uint64_t seed) {
    LayerFixture f;
    f.spec = spec;
    f.has_params = spec.has_params();
    f.input = random_tensor(input_shape, seed);
    spec.output_shape(input_shape);  // validates

    std::mt19937_64 rng(seed ^ 0xabcdef);
    std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
    std::vector<nn::Tensor> tensors;
    if (f.has_params) {
        std::vector<std::uint32_t> wdims, bdims;
        switch (spec.kind) {
            case nn::LayerKind::Dense:
                wdims = {spec.out_features, spec.in_features};
                bdims = {spec.out_features};
                break;
            case nn::LayerKind::Conv2d:
                wdims = {spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w};
                bdims = {spec.out_channels};
                break;
            case nn::LayerKind::DepthwiseConv2d:
                wdims = {spec.in_channels, spec.kernel_h, spec.kernel_w};
                bdims = {spec.in_channels};
                break;
            default:
                break;
        }
        f.params.weights = nn::Tensor::zeros(wdims);
        for (auto& v : f.params.weights.data) v = dist(rng);
        f.params.bias = nn::Tensor::zeros(bdims);
        for (auto& v : f.params.bias.data) v = dist(rng);
        tensors.push_back(f.params.weights);
        tensors.push_back(f.params.bias);
    }

    mlcapsule::SystemRng sys;
    Bytes root(32);
    sys.fill(root);
    f.measurement = crypto::digest(to_bytes("bench-layer"));
    f.key = crypto::derive_seal_key(root, f.measurement);

    nn::CapsuleLayer layer;
    layer.spec = spec;
    layer.sealed_params = crypto::seal(f.key, f.measurement, nn::write_weights(tensors), chunk_size);
    f.capsule.push_back(std::move(layer));
    return f;
}

// The measured capsule sequence: allocate, copy the sealed blob in, unseal,
// compute, free. Allocation and free happen through the scopes below.
float run_capsule_once(const LayerFixture& f) {
    Bytes staged(f.capsule[0].sealed_params.size());
    std::copy(f.capsule[0].sealed_params.begin(), f.capsule[0].sealed_params.end(),
              staged.begin());
    Bytes plain = crypto::unseal(f.key, f.measurement, staged);
    auto tensors = nn::read_weights(plain);
    crypto::memzero(plain);
    const nn::LayerParams* params = nullptr;
    nn::LayerParams local;
    if (!tensors.empty()) {
        local.weights = std::move(tensors[0]);
        local.bias = std::move(tensors[1]);
        params = &local;
    }
    nn::Tensor out = nn::apply_layer(f.spec, params, f.input);
    return out.data.empty() ? 0.0f : out.data[0];
}

float run_plain_once(const LayerFixture& f) {
    nn::Tensor out = nn::apply_layer(f.spec, f.has_params ? &f.params : nullptr, f.input);
    return out.data.empty() ? 0.0f : out.data[0];
}

std::string dims_label(const nn::LayerSpec& spec, const std::vector<std::uint32_t>& input_shape) {
    std::ostringstream out;
    out << layer_kind_name(spec.kind) << " ";
    if (spec.kind == nn::LayerKind::Dense) {
        out << spec.out_features << "x" << spec.in_features;
    } else {
        for (std::size_t i = 0; i < input_shape.size(); ++i) {
            if (i) out << "x";
            out << input_shape[i];
        }
    }
    return out.str();
}

}  // namespace

BenchRow bench_layer(const nn::LayerSpec& spec, const std::vector<std::uint32_t>& input_shape,
                     const BenchOptions& opts, std::optional<PaperReference> reference,
                     std::uint64_t seed) {
    BenchRow row;
    row.label = dims_label(spec, input_shape);
    row.reference = reference;

    LayerFixture f = make_fixture(spec, input_shape, opts.chunk_size, seed);

    if (opts.memory_budget_bytes != 0) {
        auto out_shape = spec.output_shape(input_shape);
        std::uint64_t need = nn::layer_working_set(spec, f.capsule[0], nn::shape_size(input_shape),
                                                   nn::shape_size(out_shape));
        if (need > opts.memory_budget_bytes) {
            row.budget_exceeded = true;
            return row;
        }
    }

    for (std::uint32_t i = 0; i < opts.warmup; ++i) {
        g_sink = g_sink + run_capsule_once(f) + run_plain_once(f);
    }

    // interleaved so clock-frequency drift hits both paths alike
    std::vector<double> capsule_ms, plain_ms;
    capsule_ms.reserve(opts.repetitions);
    plain_ms.reserve(opts.repetitions);
    for (std::uint32_t i = 0; i < opts.repetitions; ++i) {
        double t0 = now_ms();
        float r = run_capsule_once(f);
        double t1 = now_ms();
        float s = run_plain_once(f);
        double t2 = now_ms();
        capsule_ms.push_back(t1 - t0);
        plain_ms.push_back(t2 - t1);
        g_sink = g_sink + r + s;
    }

    Stats cs = summarize(capsule_ms), ps = summarize(plain_ms);
    row.capsule_ms = cs.mean;
    row.capsule_sd = cs.sd;
    row.plain_ms = ps.mean;
    row.plain_sd = ps.sd;
    row.factor = ps.mean > 0.0 ? cs.mean / ps.mean : 0.0;
    row.capsule_min_ms = *std::min_element(capsule_ms.begin(), capsule_ms.end());
    row.plain_min_ms = *std::min_element(plain_ms.begin(), plain_ms.end());
    return row;
}

BenchReport bench_dense_suite(const BenchOptions& opts) {
    BenchReport report;
    report.title = "Dense layer overhead";
    report.repetitions = opts.repetitions;
    report.warmup = opts.warmup;
    report.memory_budget_bytes = opts.memory_budget_bytes;
    report.chunk_size = opts.chunk_size;
    report.environment = environment_string();

    struct Entry {
        std::uint32_t n;
        PaperReference ref;
    };
    const Entry entries[] = {
        {256, {0.234, 0.020}},  {512, {0.865, 0.062}},    {1024, {4.035, 0.244}},
        {2048, {26.940, 1.090}}, {4096, {96.823, 4.648}},
    };
    for (const auto& e : entries) {
        nn::LayerSpec spec;
        spec.kind = nn::LayerKind::Dense;
        spec.in_features = e.n;
        spec.out_features = e.n;
        report.rows.push_back(bench_layer(spec, {e.n}, opts, e.ref));
    }
    return report;
}

BenchReport bench_conv_suite(const BenchOptions& opts, std::uint32_t scale) {
    if (scale == 0) throw Error(ErrorCode::InvalidArgument, "scale must be positive");
    BenchReport report;
    report.title = "Convolution layer overhead (3x3 filters)";
    report.repetitions = opts.repetitions;
    report.warmup = opts.warmup;
    report.memory_budget_bytes = opts.memory_budget_bytes;
    report.chunk_size = opts.chunk_size;
    report.environment = environment_string();

    struct Entry {
        std::uint32_t ch, hw;
        PaperReference conv_ref;
        PaperReference dw_ref;
    };
    const Entry entries[] = {
        {64, 224, {80.0, 66.0, 1.21}, {41.0, 27.0, 1.52}},
        {512, 28, {61.0, 51.0, 1.20}, {7.0, 7.0, 1.00}},
        {512, 14, {30.0, 13.0, 2.31}, {2.0, 2.0, 1.00}},
    };
    for (const auto& e : entries) {
        std::uint32_t hw = std::max<std::uint32_t>(4, e.hw / scale);
        nn::LayerSpec conv;
        conv.kind = nn::LayerKind::Conv2d;
        conv.in_channels = e.ch;
        conv.out_channels = e.ch;
        conv.kernel_h = conv.kernel_w = 3;
        conv.stride = 1;
        conv.padding = nn::Padding::Same;
        report.rows.push_back(bench_layer(conv, {e.ch, hw, hw}, opts, e.conv_ref));
    }
    for (const auto& e : entries) {
        std::uint32_t hw = std::max<std::uint32_t>(4, e.hw / scale);
        nn::LayerSpec dw;
        dw.kind = nn::LayerKind::DepthwiseConv2d;
        dw.in_channels = e.ch;
        dw.kernel_h = dw.kernel_w = 3;
        dw.stride = 1;
        dw.padding = nn::Padding::Same;
        report.rows.push_back(bench_layer(dw, {e.ch, hw, hw}, opts, e.dw_ref));
    }
    return report;
}

BenchRow bench_network(const nn::ModelDef& def, const nn::ModelSecrets& secrets,
                       const std::string& label, const BenchOptions& opts,
                       std::optional<PaperReference> reference, std::uint64_t seed) {
    def.validate();
    nn::check_secrets(def, secrets);

    BenchRow row;
    row.label = label;
    row.reference = reference;

    mlcapsule::SystemRng sys;
    Bytes root(32);
    sys.fill(root);
    crypto::Digest measurement = crypto::digest(to_bytes("bench-network"));
    crypto::SealKey key = crypto::derive_seal_key(root, measurement);
    auto layers = nn::seal_model(def, secrets, key, measurement, opts.chunk_size);
    nn::Tensor input = random_tensor(def.input_shape, seed);

    nn::CapsuleForwardOptions fwd_opts;
    fwd_opts.memory_budget_bytes = opts.memory_budget_bytes;

    for (std::uint32_t i = 0; i < opts.warmup; ++i) {
        g_sink = g_sink + nn::capsule_forward(def, layers, key, measurement, input, fwd_opts).data[0];
        g_sink = g_sink + nn::forward(def, secrets, input).data[0];
    }

    std::vector<double> capsule_ms, plain_ms;
    for (std::uint32_t i = 0; i < opts.repetitions; ++i) {
        double t0 = now_ms();
        auto out = nn::capsule_forward(def, layers, key, measurement, input, fwd_opts);
        double t1 = now_ms();
        auto ref = nn::forward(def, secrets, input);
        double t2 = now_ms();
        capsule_ms.push_back(t1 - t0);
        plain_ms.push_back(t2 - t1);
        g_sink = g_sink + out.data[0] + ref.data[0];
    }
    Stats cs = summarize(capsule_ms), ps = summarize(plain_ms);
    row.capsule_ms = cs.mean;
    row.capsule_sd = cs.sd;
    row.plain_ms = ps.mean;
    row.plain_sd = ps.sd;
    row.factor = ps.mean > 0.0 ? cs.mean / ps.mean : 0.0;
    row.capsule_min_ms = *std::min_element(capsule_ms.begin(), capsule_ms.end());
    row.plain_min_ms = *std::min_element(plain_ms.begin(), plain_ms.end());
    return row;
}

std::string to_markdown(const BenchReport& report) {
    std::ostringstream out;
    out << "# " << report.title << "\n\n";
    out << "reps=" << report.repetitions << " warmup=" << report.warmup
        << " budget=" << report.memory_budget_bytes << "B chunk=" << report.chunk_size << "B ("
        << report.environment << ")\n\n";
    out << "| config | capsule ms | sd | plain ms | sd | factor | paper (SGX) capsule | paper "
           "(SGX) plain | paper (SGX) factor |\n";
    out << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : report.rows) {
        out << "| " << r.label << " | ";
        if (r.budget_exceeded) {
            out << "budget-exceeded | - | - | - | - | ";
        } else {
            char buf[256];
            std::snprintf(buf, sizeof buf, "%.4f | %.4f | %.4f | %.4f | %.2f | ", r.capsule_ms,
                          r.capsule_sd, r.plain_ms, r.plain_sd, r.factor);
            out << buf;
        }
        if (r.reference) {
            double ref_factor = r.reference->factor;
            if (ref_factor == 0.0 && r.reference->plain_ms > 0.0) {
                ref_factor = r.reference->capsule_ms / r.reference->plain_ms;
            }
            char buf[128];
            std::snprintf(buf, sizeof buf, "%.3f | %.3f | %.2f |", r.reference->capsule_ms,
                          r.reference->plain_ms, ref_factor);
            out << buf << "\n";
        } else {
            out << "- | - | - |\n";
        }
    }
    return out.str();
}

std::string to_csv(const BenchReport& report) {
    std::ostringstream out;
    out << "label,capsule_ms,capsule_sd,plain_ms,plain_sd,factor,capsule_min_ms,"
           "plain_min_ms,budget_exceeded,paper_sgx_capsule_ms,paper_sgx_plain_ms\n";
    for (const auto& r : report.rows) {
        out << r.label << "," << r.capsule_ms << "," << r.capsule_sd << "," << r.plain_ms << ","
            << r.plain_sd << "," << r.factor << "," << r.capsule_min_ms << ","
            << r.plain_min_ms << "," << (r.budget_exceeded ? 1 : 0) << ",";
        if (r.reference) {
            out << r.reference->capsule_ms << "," << r.reference->plain_ms;
        } else {
            out << ",";
        }
        out << "\n";
    }
    return out.str();
}

std::string environment_string() {
    std::ostringstream out;
#if defined(__clang__)
    out << "clang " << __clang_major__ << "." << __clang_minor__;
#elif defined(__GNUC__)
    out << "gcc " << __GNUC__ << "." << __GNUC_MINOR__;
#else
    out << "unknown compiler";
#endif
#ifdef NDEBUG
    out << ", optimized";
#else
    out << ", debug";
#endif
    out << ", single-threaded, steady clock";
    return out.str();
}

std::pair<nn::ModelDef, nn::ModelSecrets> make_toy_cnn(std::uint64_t seed) {
    nn::ModelDef def;
    def.input_shape = {3, 16, 16};
    def.class_count = 10;

    nn::LayerSpec conv;
    conv.kind = nn::LayerKind::Conv2d;
    conv.in_channels = 3;
    conv.out_channels = 8;
    conv.kernel_h = conv.kernel_w = 3;
    conv.stride = 1;
    conv.padding = nn::Padding::Same;

    nn::LayerSpec act;
    act.kind = nn::LayerKind::Relu;

    nn::LayerSpec pool;
    pool.kind = nn::LayerKind::Maxpool;
    pool.pool_size = 2;

    nn::LayerSpec dw;
    dw.kind = nn::LayerKind::DepthwiseConv2d;
    dw.in_channels = 8;
    dw.kernel_h = dw.kernel_w = 3;
    dw.stride = 1;
    dw.padding = nn::Padding::Same;

    nn::LayerSpec head;
    head.kind = nn::LayerKind::Dense;
    head.in_features = 8 * 8 * 8;
    head.out_features = 10;

    nn::LayerSpec sm;
    sm.kind = nn::LayerKind::Softmax;

    def.layers = {conv, act, dw, act, pool, head, sm};
    def.validate();
    return {def, random_params_for(def, seed)};
}

}  // namespace mlcapsule::bench
