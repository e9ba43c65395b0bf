// Acceptance suite: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. Exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "mlcapsule/bench.hpp"
#include "mlcapsule/defense.hpp"
#include "mlcapsule/error.hpp"
#include "mlcapsule/guard.hpp"
#include "mlcapsule/model_io.hpp"
#include "mlcapsule/protocol.hpp"
#include "mlcapsule/wire.hpp"
#include "mlcapsule/workspace.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mlcapsule;

namespace {

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw CheckFailure(what);
}

template <typename T>
std::string str(const T& v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

// ---- criterion 1: protocol correctness ----

void criterion_protocol_correctness() {
    SeededRng rng(4001);
    float worst = 0.0f;
    for (int m = 0; m < 50; ++m) {
        auto model = protocol::random_toy_model(rng, 10000);
        auto [req, session] = protocol::obtain(model.def);
        auto hidden = protocol::provide(model.def, model.secrets, req);
        for (int i = 0; i < 20; ++i) {
            nn::Tensor x = protocol::random_input(model.def, rng);
            nn::Tensor via_capsule = protocol::classify(session, hidden, x);
            nn::Tensor direct = nn::forward(model.def, model.secrets, x);
            worst = std::max(worst, oracle::max_abs_diff(via_capsule, direct));
        }
    }
    require(worst <= 1e-6f, "max abs diff " + str(worst) + " exceeds 1e-6");
}

// ---- criterion 2: attestation unforgeability ----

void criterion_unforgeability() {
    iee::UnforgeabilityGame game;
    SeededRng rng(4002);

    std::uint64_t accepted = iee::forge_random_bytes(game, 100000, rng);
    require(accepted == 0, str(accepted) + " random forgeries accepted");

    accepted = iee::forge_replay(game, 1000, rng);
    require(accepted == 0, str(accepted) + " replays accepted as forgeries");

    // every honest quote verifies
    auto hdl = game.load(iee::make_echo_program());
    for (int i = 0; i < 100; ++i) {
        Bytes input(16);
        rng.fill(input);
        auto quote = game.run_quote(hdl, input);
        require(iee::HwInstance::quote_verify(game.params(), quote) == 1,
                "honest quote failed verification");
    }
    require(game.accepted_forgeries() == 0, "accepted forgery count non-zero");
}

// ---- criterion 3: secrecy indistinguishability ----

void criterion_secrecy() {
    SeededRng rng(4003);
    auto model = protocol::random_toy_model(rng, 2000);
    struct Entry {
        const char* name;
        protocol::Adversary adv;
    };
    const Entry entries[] = {
        {"oracle-consistency", protocol::make_oracle_consistency_adversary(3)},
        {"ciphertext-length", protocol::make_ciphertext_length_adversary()},
        {"byte-histogram", protocol::make_byte_histogram_adversary()},
    };
    for (const auto& e : entries) {
        auto est = protocol::estimate_advantage(model.def, model.secrets, e.adv, 1000, 8, 4003);
        require(est.advantage <= 0.05, std::string(e.name) + " advantage " +
                                           str(est.advantage) + " exceeds 0.05");
    }
}

// ---- criterion 4: chunked sealing ----

void criterion_chunked_sealing() {
    Bytes root = testutil::random_bytes(32, 4004);
    auto m = crypto::digest(to_bytes("acceptance sealing"));
    auto key = crypto::derive_seal_key(root, m);

    const std::size_t kMiB2 = 2u * 1024 * 1024;
    for (std::size_t size : {std::size_t(0), std::size_t(1), kMiB2 - 1, kMiB2, kMiB2 + 1,
                             std::size_t(100) * 1024 * 1024}) {
        Bytes plain = testutil::random_bytes(std::min<std::size_t>(size, 1 << 20), size);
        plain.resize(size, 0xA5);
        Bytes blob = crypto::seal(key, m, plain);
        require(crypto::unseal(key, m, blob) == plain,
                "roundtrip mismatch at size " + str(size));
    }

    // reorder, truncation and mutation must all error, never return plaintext
    Bytes plain = testutil::random_bytes(400, 5);
    Bytes blob = crypto::seal(key, m, plain, 100);
    const std::size_t rec = 4 + 12 + 100 + 16;

    Bytes swapped = blob;
    std::copy(blob.begin() + 18 + rec, blob.begin() + 18 + 2 * rec, swapped.begin() + 18 + 2 * rec);
    std::copy(blob.begin() + 18 + 2 * rec, blob.begin() + 18 + 3 * rec, swapped.begin() + 18 + rec);
    bool threw = false;
    try {
        crypto::unseal(key, m, swapped);
    } catch (const Error&) {
        threw = true;
    }
    require(threw, "reordered chunks accepted");

    threw = false;
    try {
        crypto::unseal(key, m, ByteView(blob).subspan(0, blob.size() - 10));
    } catch (const Error&) {
        threw = true;
    }
    require(threw, "truncated blob accepted");

    std::mt19937_64 mrng(4444);
    for (int i = 0; i < 200; ++i) {
        Bytes bad = blob;
        std::size_t bit = mrng() % (bad.size() * 8);
        bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        try {
            Bytes out = crypto::unseal(key, m, bad);
            require(false, "mutated blob unsealed at bit " + str(bit));
        } catch (const Error&) {
        }
    }
}

// ---- criterion 5: pay-per-query ----

void criterion_pay_per_query() {
    // counter mode: 30 randomized snapshot/restore/reopen schedules, each
    // must release exactly 100 posteriors and detect every rollback attempt
    auto [def, secrets] = bench::make_toy_cnn(4005);
    Bytes root = testutil::random_bytes(32, 4005);
    auto m = crypto::digest(to_bytes("acceptance capsule"));
    auto key = crypto::derive_seal_key(root, m);
    auto layers = nn::seal_model(def, secrets, key, m);
    nn::Tensor input = testutil::random_tensor(def.input_shape, 4006);

    for (int schedule = 0; schedule < 30; ++schedule) {
        testutil::TmpDir dir("acc-guard-" + std::to_string(schedule));
        guard::PersistentGuard g(dir / "guard.seal", dir / "counter.mlcc", key, m);
        g.initialize(100);

        std::mt19937_64 rng(5000 + schedule);
        std::vector<Bytes> snapshots;
        Bytes latest = nn::read_file(dir / "guard.seal");
        std::uint64_t released = 0;
        std::uint64_t rollback_attempts = 0, rollbacks_detected = 0;
        bool exhausted = false;

        while (!exhausted) {
            switch (rng() % 8) {
                case 0:  // snapshot the sealed file (attacker bookkeeping)
                    snapshots.push_back(nn::read_file(dir / "guard.seal"));
                    break;
                case 1: {  // restore a stale snapshot and try to query
                    if (snapshots.empty()) break;
                    const Bytes& old = snapshots[rng() % snapshots.size()];
                    if (old == latest) break;  // not actually stale
                    nn::write_file(dir / "guard.seal", old);
                    ++rollback_attempts;
                    try {
                        g.begin_query();
                        require(false, "rollback went undetected");
                    } catch (const Error& e) {
                        require(e.code() == ErrorCode::RollbackDetected,
                                std::string("expected RollbackDetected, got ") + e.what());
                        ++rollbacks_detected;
                    }
                    nn::write_file(dir / "guard.seal", latest);  // honest recovery
                    break;
                }
                case 2: {  // process restart: reopen the guard from disk
                    guard::PersistentGuard reopened(dir / "guard.seal", dir / "counter.mlcc", key,
                                                    m);
                    auto s = reopened.peek();
                    require(s.counter <= 100, "counter beyond threshold after reopen");
                    break;
                }
                default: {  // a paid query
                    try {
                        g.begin_query();
                    } catch (const Error& e) {
                        require(e.code() == ErrorCode::QuotaExceeded,
                                std::string("unexpected guard failure: ") + e.what());
                        exhausted = true;
                        break;
                    }
                    // release: the posterior leaves the enclave only now
                    nn::Tensor out = nn::capsule_forward(def, layers, key, m, input);
                    require(out.size() == def.class_count, "posterior missing");
                    ++released;
                    latest = nn::read_file(dir / "guard.seal");
                    break;
                }
            }
        }
        require(released == 100, "schedule " + str(schedule) + " released " + str(released) +
                                     " posteriors instead of 100");
        require(rollback_attempts == rollbacks_detected,
                "missed rollback detections in schedule " + str(schedule));
    }

    // ticket mode: 1000 tickets redeem exactly once each
    auto kp = crypto::sig_keygen();
    std::vector<guard::QueryTicket> tickets;
    std::vector<Bytes> queries;
    for (int i = 0; i < 1000; ++i) {
        queries.push_back(testutil::random_bytes(48, 6000 + i));
        tickets.push_back(guard::issue_ticket(kp.sk, queries.back()));
    }
    guard::SpentSet spent;
    std::atomic<std::uint64_t> redemptions{0}, double_spends{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < 4; ++w) {
        workers.emplace_back([&, w] {
            // every worker tries every ticket: 4000 attempts, 1000 must win
            for (std::size_t i = 0; i < tickets.size(); ++i) {
                try {
                    guard::redeem_ticket(kp.pk, tickets[i], queries[i], spent);
                    redemptions.fetch_add(1);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::TicketReused) {
                        double_spends.fetch_add(1000000);  // unexpected failure, force-fail
                    }
                }
            }
            (void)w;
        });
    }
    for (auto& t : workers) t.join();
    require(redemptions.load() == 1000,
            str(redemptions.load()) + " redemptions instead of 1000");
    require(spent.size() == 1000, "spent set size drifted");
    require(double_spends.load() == 0, "unexpected redemption failures");
}

// ---- criterion 6: membership defense ----

void criterion_membership_defense() {
    auto toy = defense::make_overfit_toy(4007);
    require(toy.train_accuracy - toy.test_accuracy >= 0.3f,
            "overfit gap " + str(toy.train_accuracy - toy.test_accuracy) + " below 0.3");

    std::vector<float> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(0.05f * static_cast<float>(i));
    auto rows = defense::membership_eval(toy.def, toy.secrets, toy.split, grid, toy.class_dist);

    require(rows.front().auc >= 0.75, "AUC(c=0) " + str(rows.front().auc) + " below 0.75");
    require(rows.back().auc <= 0.6, "AUC(c=0.5) " + str(rows.back().auc) + " above 0.6");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        require(rows[i].auc <= rows[i - 1].auc + 0.02,
                "AUC rose by more than 0.02 between c=" + str(rows[i - 1].c) + " and c=" +
                    str(rows[i].c));
        require(rows[i].jsd_mean >= rows[i - 1].jsd_mean - 1e-9,
                "mean divergence decreased with c");
        require(rows[i].est_err_mean >= rows[i - 1].est_err_mean - 1e-9,
                "mean estimation error decreased with c");
    }

    // |P_d - P'_d| = c*alpha*|P_d - T_d| to 1e-7 over 1000 random posteriors
    std::mt19937_64 rng(4008);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int i = 0; i < 1000; ++i) {
        std::size_t k = 2 + rng() % 8;
        defense::Posterior p(k), t(k);
        double ps = 0, ts = 0;
        for (std::size_t j = 0; j < k; ++j) {
            p[j] = static_cast<float>(u(rng));
            t[j] = static_cast<float>(u(rng));
            ps += p[j];
            ts += t[j];
        }
        for (std::size_t j = 0; j < k; ++j) {
            p[j] = static_cast<float>(p[j] / ps);
            t[j] = static_cast<float>(t[j] / ts);
        }
        float c = static_cast<float>(rng() % 101) / 100.0f;
        std::uint32_t delta = static_cast<std::uint32_t>(rng() % k);
        auto noised = defense::noise_posterior(p, defense::NoiseConfig{c, t});
        double alpha = std::clamp(
            1.0 - defense::entropy(p) / std::log(static_cast<double>(k)), 0.0, 1.0);
        double lhs = defense::estimation_error(p, noised, delta);
        double rhs = static_cast<double>(c) * alpha *
                     std::abs(static_cast<double>(p[delta]) - static_cast<double>(t[delta]));
        require(std::abs(lhs - rhs) <= 1e-7,
                "noising identity off by " + str(std::abs(lhs - rhs)));
    }
}

// ---- criterion 7: analytic noising values ----

void criterion_noising_values() {
    defense::Posterior uniform4(4, 0.25f);
    auto out = defense::noise_posterior(uniform4, defense::NoiseConfig{0.5f, uniform4});
    for (std::size_t i = 0; i < 4; ++i) {
        require(std::abs(out[i] - 0.25f) <= 1e-7f, "uniform posterior shifted");
    }

    defense::Posterior onehot{1.0f, 0.0f};
    defense::Posterior uniform2(2, 0.5f);
    auto noised = defense::noise_posterior(onehot, defense::NoiseConfig{0.5f, uniform2});
    require(std::abs(noised[0] - 0.75f) <= 1e-7f, "one-hot class 0 is " + str(noised[0]));
    require(std::abs(noised[1] - 0.25f) <= 1e-7f, "one-hot class 1 is " + str(noised[1]));
}

// ---- criterion 8: numerics ----

void criterion_numerics() {
    std::mt19937_64 rng(4009);

    // kernels vs naive oracles across 100 random shapes
    for (int i = 0; i < 34; ++i) {
        std::uint32_t n = 1 + rng() % 32, m = 1 + rng() % 32;
        auto x = testutil::random_tensor({n}, rng());
        auto w = testutil::random_tensor({m, n}, rng());
        auto b = testutil::random_tensor({m}, rng());
        require(oracle::max_abs_diff(nn::dense(x, w, b), oracle::naive_dense(x, w, b)) <= 1e-5f,
                "dense oracle mismatch");
    }
    for (int i = 0; i < 33; ++i) {
        std::uint32_t ic = 1 + rng() % 3, oc = 1 + rng() % 4;
        std::uint32_t h = 3 + rng() % 10, w = 3 + rng() % 10;
        std::uint32_t stride = 1 + rng() % 2;
        bool same = rng() % 2 == 0;
        auto x = testutil::random_tensor({ic, h, w}, rng());
        auto f = testutil::random_tensor({oc, ic, 3, 3}, rng());
        auto b = testutil::random_tensor({oc}, rng());
        auto got = nn::conv2d(x, f, b, stride, same ? nn::Padding::Same : nn::Padding::Valid);
        auto want = oracle::naive_conv2d(x, f, b, stride, same ? 1 : 0);
        require(oracle::max_abs_diff(got, want) <= 1e-5f, "conv2d oracle mismatch");
    }
    for (int i = 0; i < 33; ++i) {
        std::uint32_t ch = 1 + rng() % 4, h = 3 + rng() % 10, w = 3 + rng() % 10;
        auto x = testutil::random_tensor({ch, h, w}, rng());
        auto f = testutil::random_tensor({ch, 3, 3}, rng());
        auto b = testutil::random_tensor({ch}, rng());
        require(oracle::max_abs_diff(nn::depthwise_conv2d(x, f, b, 1, nn::Padding::Same),
                                     oracle::naive_depthwise(x, f, b, 1, 1)) <= 1e-5f,
                "depthwise oracle mismatch");
    }

    // gradient check on a two-layer dense net
    nn::ModelDef arch;
    arch.input_shape = {6};
    arch.class_count = 3;
    nn::LayerSpec d1, act, d2, sm;
    d1.kind = nn::LayerKind::Dense;
    d1.in_features = 6;
    d1.out_features = 10;
    act.kind = nn::LayerKind::Relu;
    d2.kind = nn::LayerKind::Dense;
    d2.in_features = 10;
    d2.out_features = 3;
    sm.kind = nn::LayerKind::Softmax;
    arch.layers = {d1, act, d2, sm};

    nn::Dataset sample;
    sample.feature_dim = 6;
    sample.class_count = 3;
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::mt19937_64 drng(4010);
    for (int i = 0; i < 12; ++i) {
        std::vector<float> xv(6);
        for (auto& v : xv) v = g(drng);
        sample.inputs.push_back(xv);
        sample.labels.push_back(static_cast<std::uint32_t>(drng() % 3));
    }
    auto gc = nn::grad_check(arch, sample, 1e-5, 4011);
    require(gc.max_rel_error <= 1e-4, "gradient check " + str(gc.max_rel_error));

    // posterior validity across random models and inputs
    SeededRng prng(4012);
    for (int i = 0; i < 20; ++i) {
        auto model = protocol::random_toy_model(prng, 4000);
        for (int j = 0; j < 5; ++j) {
            auto p = nn::forward(model.def, model.secrets,
                                 protocol::random_input(model.def, prng));
            double sum = 0;
            for (float v : p.data) {
                require(v >= 0.0f, "negative posterior entry");
                sum += v;
            }
            require(std::abs(sum - 1.0) <= 1e-6, "posterior sum " + str(sum));
        }
    }
}

// ---- criterion 9: stealing detection ----

void criterion_stealing_detection() {
    defense::StealingConfig cfg{1.0, 0.25, 100};

    // benign: i.i.d. queries with spacing far above tau, 5000 queries, no alarm
    {
        defense::StealingMonitor monitor(cfg, 16);
        std::mt19937_64 rng(4013);
        std::uniform_real_distribution<float> wide(-100.0f, 100.0f);
        for (int i = 0; i < 5000; ++i) {
            std::vector<float> q(16);
            for (auto& v : q) v = wide(rng);
            auto obs = monitor.observe(q);
            require(!obs.alarm, "benign stream alarmed at query " + str(i));
        }
        require(!monitor.alarmed(), "benign stream latched an alarm");
    }

    // attack: near-duplicate probing raises the alarm within one window
    {
        defense::StealingMonitor monitor(cfg, 16);
        std::mt19937_64 rng(4014);
        std::normal_distribution<float> tiny(0.0f, 0.001f);
        bool alarmed = false;
        for (std::size_t i = 0; i < cfg.window && !alarmed; ++i) {
            std::vector<float> q(16);
            for (auto& v : q) v = tiny(rng);
            alarmed = monitor.observe(q).alarm;
        }
        require(alarmed, "attack stream not flagged within one window");
    }

    // permutation invariance on separated point sets
    const double tau = 1.0;
    std::vector<std::vector<float>> points;
    for (int i = 0; i < 40; ++i) {
        points.push_back({static_cast<float>(3.0 * i), static_cast<float>(-3.0 * i)});
    }
    std::mt19937_64 rng(4015);
    std::vector<std::size_t> sizes;
    for (int trial = 0; trial < 6; ++trial) {
        std::shuffle(points.begin(), points.end(), rng);
        defense::QueryArchive archive(2, tau);
        for (const auto& p : points) archive.update(p);
        sizes.push_back(archive.size());
    }
    for (std::size_t s : sizes) {
        require(s == points.size(), "separated points dropped under permutation");
    }
}

// ---- criterion 10: reverse-engineering detection ----

void criterion_re_detection() {
    auto benign_train = defense::gen_benign_images(500, 16, 4016);
    auto crafted_train = defense::gen_crafted_images(500, 16, 4017);
    auto benign_test = defense::gen_benign_images(250, 16, 4018);
    auto crafted_test = defense::gen_crafted_images(250, 16, 4019);

    auto det = defense::re_detector_train(benign_train, crafted_train);
    double heldout = defense::re_detector_accuracy(det, benign_test, crafted_test);
    require(heldout >= 0.95, "held-out accuracy " + str(heldout) + " below 0.95");

    std::size_t false_denials = 0;
    for (const auto& x : benign_train) {
        if (defense::re_detector_malicious(det, x)) ++false_denials;
    }
    require(false_denials == 0, str(false_denials) + " false denials on the benign train set");

    auto t0 = std::chrono::steady_clock::now();
    for (const auto& x : benign_test) defense::re_detector_malicious(det, x);
    double per_query_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() /
        static_cast<double>(benign_test.size());
    std::cout << "       [report] detector overhead " << per_query_ms
              << " ms/query (reference: 0.832 ms on the SGX desktop)\n";
}

// ---- criterion 11: benchmarks ----

void criterion_benchmarks() {
    bench::BenchOptions opts;
    opts.repetitions = 10;
    opts.warmup = 5;
    opts.memory_budget_bytes = 90ull * 1024 * 1024;

    // report shape: the three tables regenerate with their reference columns
    auto dense = bench::bench_dense_suite(opts);
    require(dense.rows.size() == 5, "dense table row count");
    std::size_t with_reference = 0;
    for (const auto& row : dense.rows) {
        if (row.reference) ++with_reference;
    }
    require(with_reference == 5, "reference columns missing from the dense table");
    auto conv = bench::bench_conv_suite(opts, 16);
    require(conv.rows.size() == 6, "conv table row count");

    // structural gate: capsule covers strictly more work than plain on every
    // row, witnessed by the per-path minima. This machine's scheduling noise
    // swings single repetitions by +-40%, so a violating row is re-measured
    // with doubled repetitions before it can fail; a genuinely inverted
    // implementation fails every attempt.
    auto stable_geq = [&](const std::function<bench::BenchRow(bench::BenchOptions)>& run,
                          const char* what) {
        bench::BenchOptions local = opts;
        local.repetitions = 20;
        bench::BenchRow row;
        for (int attempt = 0; attempt < 3; ++attempt) {
            row = run(local);
            if (row.budget_exceeded || row.capsule_min_ms >= row.plain_min_ms) return;
            local.repetitions *= 2;
        }
        require(false, std::string("capsule below plain on ") + what + " row " + row.label);
    };

    for (std::uint32_t n : {256u, 512u, 1024u, 2048u, 4096u}) {
        nn::LayerSpec spec;
        spec.kind = nn::LayerKind::Dense;
        spec.in_features = n;
        spec.out_features = n;
        stable_geq([&](bench::BenchOptions o) { return bench::bench_layer(spec, {n}, o); },
                   "dense");
    }
    struct ConvCase {
        std::uint32_t ch, hw;
        bool depthwise;
    };
    const ConvCase conv_cases[] = {{64, 14, false}, {512, 4, false}, {64, 14, true},
                                   {512, 4, true}};
    for (const auto& c : conv_cases) {
        nn::LayerSpec spec;
        spec.kind = c.depthwise ? nn::LayerKind::DepthwiseConv2d : nn::LayerKind::Conv2d;
        spec.in_channels = c.ch;
        spec.out_channels = c.ch;
        spec.kernel_h = spec.kernel_w = 3;
        spec.stride = 1;
        spec.padding = nn::Padding::Same;
        stable_geq(
            [&](bench::BenchOptions o) {
                return bench::bench_layer(spec, {c.ch, c.hw, c.hw}, o);
            },
            c.depthwise ? "depthwise" : "conv");
    }

    auto [def, secrets] = bench::make_toy_cnn(4020);
    bench::BenchRow net_row;
    stable_geq(
        [&](bench::BenchOptions o) {
            net_row = bench::bench_network(def, secrets, "toy-cnn", o,
                                           bench::PaperReference{1145.0, 736.0, 1.55});
            return net_row;
        },
        "network");
    require(net_row.factor > 0.0 && std::isfinite(net_row.factor), "network factor not finite");

    // reference factors ride along in the report text, never asserted
    bench::BenchReport nets;
    nets.title = "Network evaluation overhead";
    nets.repetitions = 20;
    nets.rows.push_back(net_row);
    auto md = bench::to_markdown(nets);
    require(md.find("paper (SGX)") != std::string::npos, "reference column label missing");
    require(md.find("1.55") != std::string::npos, "reference factor missing from report");
}

// ---- criterion 12: offline property ----

void criterion_offline() {
    SeededRng rng(4021);
    auto model = protocol::random_toy_model(rng, 4000);

    testutil::TmpDir dir("acc-offline");
    wire::ProvisionServer server({}, model.def, model.secrets);
    std::uint16_t port = server.start();

    workspace::Config cfg;
    cfg.guard_mode = workspace::GuardMode::Counter;
    cfg.threshold = 50;
    auto ws = workspace::CapsuleWorkspace::create(dir / "w", cfg);
    ws.obtain_and_provision(model.def, "127.0.0.1", port);
    server.stop();

    // every network path is now disabled; classification must keep working
    wire::set_network_disabled(true);
    bool classify_ok = true, network_blocked = false;
    float worst = 0.0f;
    try {
        for (int i = 0; i < 5; ++i) {
            nn::Tensor x = protocol::random_input(model.def, rng);
            auto result = ws.classify(x);
            worst = std::max(worst,
                             oracle::max_abs_diff(result.posterior,
                                                  nn::forward(model.def, model.secrets, x)));
        }
    } catch (const Error&) {
        classify_ok = false;
    }
    try {
        protocol::ModelRequest dummy;
        wire::request_provision("127.0.0.1", port, dummy);
    } catch (const Error&) {
        network_blocked = true;
    }
    wire::set_network_disabled(false);

    require(classify_ok, "offline classification failed with networking disabled");
    require(worst <= 1e-6f, "offline posterior drifted from the model output");
    require(network_blocked, "the network kill switch is not effective");
}

struct Criterion {
    int id;
    const char* title;
    std::function<void()> body;
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
    }

    const Criterion criteria[] = {
        {1, "protocol correctness (50 models x 20 inputs, diff <= 1e-6)",
         criterion_protocol_correctness},
        {2, "attestation unforgeability (1e5 forgeries + 1e3 replays, 0 accepted)",
         criterion_unforgeability},
        {3, "secrecy indistinguishability (3 distinguishers, advantage <= 0.05)",
         criterion_secrecy},
        {4, "chunked sealing (boundary sizes roundtrip; tampering always errors)",
         criterion_chunked_sealing},
        {5, "pay-per-query (30 crash/restore schedules; 1000 tickets)",
         criterion_pay_per_query},
        {6, "membership defense (AUC curve, divergence monotone, noising identity)",
         criterion_membership_defense},
        {7, "analytic noising values (uniform fixed point; one-hot -> [0.75, 0.25])",
         criterion_noising_values},
        {8, "numerics (kernel oracles <= 1e-5; gradients <= 1e-4; posteriors sum to 1)",
         criterion_numerics},
        {9, "stealing detection (benign quiet over 5000; attack within one window)",
         criterion_stealing_detection},
        {10, "reverse-engineering detection (>= 0.95 held-out, 0 false denials)",
         criterion_re_detection},
        {11, "benchmarks (tables regenerate; capsule >= plain; references embedded)",
         criterion_benchmarks},
        {12, "offline property (classification with all network access disabled)",
         criterion_offline},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        auto t0 = std::chrono::steady_clock::now();
        std::string verdict = "PASS";
        std::string detail;
        try {
            c.body();
        } catch (const std::exception& e) {
            verdict = "FAIL";
            detail = e.what();
            ++failures;
        }
        double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "[" << verdict << "] criterion " << c.id << ": " << c.title << " ("
                  << secs << "s)";
        if (!detail.empty()) std::cout << " -- " << detail;
        std::cout << std::endl;
    }
    if (failures == 0) {
        std::cout << "acceptance: all criteria passed" << std::endl;
    } else {
        std::cout << "acceptance: " << failures << " criterion(s) failed" << std::endl;
    }
    return failures;
}
