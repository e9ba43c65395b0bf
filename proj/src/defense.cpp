#include "mlcapsule/defense.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mlcapsule/error.hpp"

namespace mlcapsule::defense {

namespace {

constexpr double kProbFloor = 1e-12;

void check_posterior(const Posterior& p, const char* what) {
    if (p.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " needs at least 2 classes");
    }
    double sum = 0.0;
    for (float v : p) {
        if (!(v >= -1e-6f)) {
            throw Error(ErrorCode::InvalidArgument, std::string(what) + " has negative entries");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-4) {
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " does not sum to 1");
    }
}

double xlogx_ratio(double x, double m) {
    if (x <= 0.0) return 0.0;  // 0 * log 0 := 0
    return x * std::log(std::max(x, kProbFloor) / std::max(m, kProbFloor));
}

Posterior to_posterior(const nn::Tensor& t) {
    return Posterior(t.data.begin(), t.data.end());
}

}  // namespace

double entropy(const Posterior& p) {
    double h = 0.0;
    for (float v : p) {
        if (v > 0.0f) {
            double x = std::max(static_cast<double>(v), kProbFloor);
            h -= x * std::log(x);
        }
    }
    return h;
}

Posterior noise_posterior(const Posterior& p, const NoiseConfig& cfg) {
    check_posterior(p, "posterior");
    check_posterior(cfg.noise_dist, "noise distribution");
    if (cfg.noise_dist.size() != p.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    "noise distribution has " + std::to_string(cfg.noise_dist.size()) +
                        " classes, posterior has " + std::to_string(p.size()));
    }
    if (!(cfg.c >= 0.0f && cfg.c <= 1.0f)) {
        throw Error(ErrorCode::InvalidArgument, "c must lie in [0, 1]");
    }

    const double k = static_cast<double>(p.size());
    double alpha = 1.0 - entropy(p) / std::log(k);
    alpha = std::clamp(alpha, 0.0, 1.0);
    const double w = static_cast<double>(cfg.c) * alpha;

    Posterior out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[i] = static_cast<float>((1.0 - w) * p[i] + w * cfg.noise_dist[i]);
    }
    return out;
}

double entropy_attack_auc(const std::vector<Posterior>& members,
                          const std::vector<Posterior>& nonmembers) {
    if (members.empty() || nonmembers.empty()) {
        throw Error(ErrorCode::InvalidArgument, "both score sets must be non-empty");
    }
    // score: -entropy, so members (confident, low entropy) should rank high
    struct Scored {
        double score;
        bool member;
    };
    std::vector<Scored> all;
    all.reserve(members.size() + nonmembers.size());
    for (const auto& p : members) all.push_back({-entropy(p), true});
    for (const auto& p : nonmembers) all.push_back({-entropy(p), false});
    std::sort(all.begin(), all.end(),
              [](const Scored& a, const Scored& b) { return a.score < b.score; });

    // rank statistic with average ranks on ties
    const std::size_t n = all.size();
    double member_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && all[j].score == all[i].score) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based ranks i+1..j
        for (std::size_t t = i; t < j; ++t) {
            if (all[t].member) member_rank_sum += avg_rank;
        }
        i = j;
    }
    const double m = static_cast<double>(members.size());
    const double u = member_rank_sum - m * (m + 1.0) / 2.0;
    return u / (m * static_cast<double>(nonmembers.size()));
}

double jsd(const Posterior& p, const Posterior& q) {
    if (p.size() != q.size()) {
        throw Error(ErrorCode::InvalidArgument, "posterior lengths differ");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (static_cast<double>(p[i]) + static_cast<double>(q[i]));
        total += xlogx_ratio(p[i], m) + xlogx_ratio(q[i], m);
    }
    return total;
}

double estimation_error(const Posterior& p, const Posterior& noised,
                        std::uint32_t correct_class) {
    if (p.size() != noised.size()) {
        throw Error(ErrorCode::InvalidArgument, "posterior lengths differ");
    }
    if (correct_class >= p.size()) {
        throw Error(ErrorCode::InvalidArgument, "correct class index out of range");
    }
    return std::abs(static_cast<double>(p[correct_class]) -
                    static_cast<double>(noised[correct_class]));
}

std::vector<MembershipRow> membership_eval(const nn::ModelDef& def,
                                           const nn::ModelSecrets& secrets,
                                           const EvalSplit& split,
                                           const std::vector<float>& c_grid,
                                           const Posterior& noise_dist) {
    if (split.member_x.empty() || split.nonmember_x.empty() ||
        split.member_x.size() != split.member_y.size() ||
        split.nonmember_x.size() != split.nonmember_y.size()) {
        throw Error(ErrorCode::InvalidArgument, "degenerate member/nonmember split");
    }

    std::vector<Posterior> member_post, nonmember_post;
    member_post.reserve(split.member_x.size());
    nonmember_post.reserve(split.nonmember_x.size());
    for (const auto& x : split.member_x) member_post.push_back(to_posterior(nn::forward(def, secrets, x)));
    for (const auto& x : split.nonmember_x) {
        nonmember_post.push_back(to_posterior(nn::forward(def, secrets, x)));
    }

    std::vector<MembershipRow> rows;
    rows.reserve(c_grid.size());
    for (float c : c_grid) {
        NoiseConfig cfg{c, noise_dist};
        std::vector<Posterior> noised_members, noised_nonmembers;
        noised_members.reserve(member_post.size());
        noised_nonmembers.reserve(nonmember_post.size());
        double jsd_sum = 0.0, err_sum = 0.0;
        for (std::size_t i = 0; i < member_post.size(); ++i) {
            Posterior noised = noise_posterior(member_post[i], cfg);
            jsd_sum += jsd(member_post[i], noised);
            err_sum += estimation_error(member_post[i], noised, split.member_y[i]);
            noised_members.push_back(std::move(noised));
        }
        for (std::size_t i = 0; i < nonmember_post.size(); ++i) {
            Posterior noised = noise_posterior(nonmember_post[i], cfg);
            jsd_sum += jsd(nonmember_post[i], noised);
            err_sum += estimation_error(nonmember_post[i], noised, split.nonmember_y[i]);
            noised_nonmembers.push_back(std::move(noised));
        }
        const double n = static_cast<double>(member_post.size() + nonmember_post.size());
        MembershipRow row;
        row.c = c;
        row.auc = entropy_attack_auc(noised_members, noised_nonmembers);
        row.jsd_mean = jsd_sum / n;
        row.est_err_mean = err_sum / n;
        rows.push_back(row);
    }
    return rows;
}

OverfitToy make_overfit_toy(std::uint64_t seed) {
    // Tiny training set with unstructured labels: the network memorizes it
    // outright while generalizing to nothing, which is the regime the
    // entropy attack exploits.
    constexpr std::uint32_t kDim = 16;
    constexpr std::uint32_t kClasses = 4;
    constexpr std::size_t kTrain = 48;
    constexpr std::size_t kTest = 240;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> coord(-1.0f, 1.0f);
    std::uniform_int_distribution<std::uint32_t> label(0, kClasses - 1);

    nn::Dataset train;
    train.feature_dim = kDim;
    train.class_count = kClasses;
    for (std::size_t i = 0; i < kTrain; ++i) {
        std::vector<float> x(kDim);
        for (auto& v : x) v = coord(rng);
        train.inputs.push_back(std::move(x));
        train.labels.push_back(label(rng));
    }
    nn::Dataset test;
    test.feature_dim = kDim;
    test.class_count = kClasses;
    for (std::size_t i = 0; i < kTest; ++i) {
        std::vector<float> x(kDim);
        for (auto& v : x) v = coord(rng);
        test.inputs.push_back(std::move(x));
        test.labels.push_back(label(rng));
    }

    nn::ModelDef def;
    def.input_shape = {kDim};
    def.class_count = kClasses;
    auto dense = [](std::uint32_t in, std::uint32_t out) {
        nn::LayerSpec s;
        s.kind = nn::LayerKind::Dense;
        s.in_features = in;
        s.out_features = out;
        return s;
    };
    nn::LayerSpec relu_spec;
    relu_spec.kind = nn::LayerKind::Relu;
    nn::LayerSpec softmax_spec;
    softmax_spec.kind = nn::LayerKind::Softmax;
    def.layers = {dense(kDim, 64), relu_spec, dense(64, kClasses), softmax_spec};

    nn::TrainConfig cfg;
    cfg.epochs = 400;
    cfg.learning_rate = 0.08f;
    cfg.seed = seed ^ 0xfeedfaceULL;
    auto result = nn::train_toy(train, def, cfg);

    OverfitToy toy;
    toy.def = def;
    toy.secrets = result.secrets;
    toy.train_accuracy = result.train_accuracy;
    toy.test_accuracy = nn::accuracy(def, result.secrets, test);

    for (std::size_t i = 0; i < train.size(); ++i) {
        toy.split.member_x.emplace_back(std::vector<std::uint32_t>{kDim}, train.inputs[i]);
        toy.split.member_y.push_back(train.labels[i]);
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        toy.split.nonmember_x.emplace_back(std::vector<std::uint32_t>{kDim}, test.inputs[i]);
        toy.split.nonmember_y.push_back(test.labels[i]);
    }

    toy.class_dist.assign(kClasses, 0.0f);
    for (auto y : train.labels) toy.class_dist[y] += 1.0f;
    for (auto& v : toy.class_dist) v /= static_cast<float>(train.size());
    return toy;
}

// ---- query archive ----

QueryArchive::QueryArchive(std::size_t feature_dim, double tau) : dim_(feature_dim), tau_(tau) {
    if (feature_dim == 0) throw Error(ErrorCode::InvalidArgument, "zero feature dimension");
    if (!(tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be non-negative");
}

double QueryArchive::min_distance(const std::vector<float>& features) const {
    if (features.size() != dim_) {
        throw Error(ErrorCode::ShapeMismatch, "query has " + std::to_string(features.size()) +
                                                  " features, archive expects " +
                                                  std::to_string(dim_));
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : set_) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double diff = static_cast<double>(features[i]) - static_cast<double>(p[i]);
            d2 += diff * diff;
        }
        best = std::min(best, std::sqrt(d2));
    }
    return best;
}

bool QueryArchive::update(const std::vector<float>& features) {
    double d = min_distance(features);
    if (d > tau_) {
        set_.push_back(features);
        return true;
    }
    return false;
}

Bytes QueryArchive::serialize() const {
    Bytes out;
    put_u32le(out, static_cast<std::uint32_t>(dim_));
    put_u64le(out, std::bit_cast<std::uint64_t>(tau_));
    put_u32le(out, static_cast<std::uint32_t>(set_.size()));
    for (const auto& p : set_) {
        for (float v : p) put_u32le(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

QueryArchive QueryArchive::parse(ByteView raw) {
    ByteReader r(raw);
    std::uint32_t dim = r.u32le();
    double tau = std::bit_cast<double>(r.u64le());
    QueryArchive archive(dim, tau);
    std::uint32_t n = r.u32le();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::vector<float> p(dim);
        for (auto& v : p) v = std::bit_cast<float>(r.u32le());
        archive.set_.push_back(std::move(p));
    }
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after archive");
    return archive;
}

StealingMonitor::StealingMonitor(StealingConfig cfg, std::size_t feature_dim)
    : cfg_(cfg), archive_(feature_dim, cfg.tau) {
    if (cfg.window == 0) throw Error(ErrorCode::InvalidArgument, "zero window");
    if (!(cfg.rate_floor >= 0.0 && cfg.rate_floor <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "rate floor must lie in [0, 1]");
    }
}

StealingMonitor::Observation StealingMonitor::observe(const std::vector<float>& features) {
    Observation obs;
    obs.appended = archive_.update(features);
    history_.push_back(obs.appended);
    if (history_.size() >= cfg_.window) {
        obs.alarm = alarm_now();
        if (obs.alarm) alarmed_ = true;
    }
    return obs;
}

void StealingMonitor::restore(QueryArchive archive, std::vector<bool> history, bool alarmed) {
    if (archive.feature_dim() != archive_.feature_dim()) {
        throw Error(ErrorCode::ShapeMismatch, "persisted archive dimension mismatch");
    }
    archive_ = std::move(archive);
    history_ = std::move(history);
    alarmed_ = alarmed;
}

bool StealingMonitor::alarm_now() const {
    if (history_.size() < cfg_.window) {
        throw Error(ErrorCode::InvalidArgument, "window larger than observed history");
    }
    std::size_t appended = 0;
    for (std::size_t i = history_.size() - cfg_.window; i < history_.size(); ++i) {
        if (history_[i]) ++appended;
    }
    const double rate = static_cast<double>(appended) / static_cast<double>(cfg_.window);
    return rate < cfg_.rate_floor;
}

// ---- reverse-engineering detector ----

namespace {

nn::Dataset detector_dataset(const std::vector<nn::Tensor>& benign,
                             const std::vector<nn::Tensor>& crafted) {
    if (benign.empty() || crafted.empty()) {
        throw Error(ErrorCode::InvalidArgument, "both corpora must be non-empty");
    }
    const std::size_t lo = std::min(benign.size(), crafted.size());
    const std::size_t hi = std::max(benign.size(), crafted.size());
    if (hi > 10 * lo) {
        throw Error(ErrorCode::InvalidArgument, "class imbalance beyond 10:1");
    }
    nn::Dataset data;
    data.feature_dim = static_cast<std::uint32_t>(benign.front().size());
    data.class_count = 2;
    for (const auto& t : benign) {
        if (t.size() != data.feature_dim) {
            throw Error(ErrorCode::ShapeMismatch, "benign samples disagree on shape");
        }
        data.inputs.push_back(t.data);
        data.labels.push_back(0);
    }
    for (const auto& t : crafted) {
        if (t.size() != data.feature_dim) {
            throw Error(ErrorCode::ShapeMismatch, "crafted samples disagree on shape");
        }
        data.inputs.push_back(t.data);
        data.labels.push_back(1);
    }
    return data;
}

}  // namespace

nn::ModelDef default_detector_arch(const std::vector<std::uint32_t>& input_shape) {
    nn::ModelDef def;
    def.input_shape = input_shape;
    def.class_count = 2;
    nn::LayerSpec d1;
    d1.kind = nn::LayerKind::Dense;
    d1.in_features = static_cast<std::uint32_t>(nn::shape_size(input_shape));
    d1.out_features = 32;
    nn::LayerSpec act;
    act.kind = nn::LayerKind::Relu;
    nn::LayerSpec d2;
    d2.kind = nn::LayerKind::Dense;
    d2.in_features = 32;
    d2.out_features = 2;
    nn::LayerSpec sm;
    sm.kind = nn::LayerKind::Softmax;
    def.layers = {d1, act, d2, sm};
    return def;
}

DetectorModel re_detector_train(const std::vector<nn::Tensor>& benign,
                                const std::vector<nn::Tensor>& crafted,
                                const DetectorTrainConfig& cfg, const nn::ModelDef* arch) {
    nn::Dataset data = detector_dataset(benign, crafted);

    DetectorModel det;
    det.def = arch ? *arch : default_detector_arch(benign.front().dims);
    det.def.validate();
    if (det.def.class_count != 2 ||
        nn::shape_size(det.def.input_shape) != data.feature_dim) {
        throw Error(ErrorCode::SchemaError,
                    "detector architecture must be a 2-class net over the sample shape");
    }

    nn::TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = cfg.seed;
    det.secrets = nn::train_toy(data, det.def, tc).secrets;
    return det;
}

bool re_detector_malicious(const DetectorModel& det, const nn::Tensor& input) {
    nn::Tensor p = nn::forward(det.def, det.secrets, input);
    return nn::argmax(p) == 1;
}

double re_detector_accuracy(const DetectorModel& det, const std::vector<nn::Tensor>& benign,
                            const std::vector<nn::Tensor>& crafted) {
    std::size_t hits = 0;
    for (const auto& t : benign) {
        if (!re_detector_malicious(det, t)) ++hits;
    }
    for (const auto& t : crafted) {
        if (re_detector_malicious(det, t)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(benign.size() + crafted.size());
}

std::vector<nn::Tensor> gen_benign_images(std::size_t n, std::uint32_t side, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0.0, static_cast<double>(side));
    std::uniform_real_distribution<double> width(side / 8.0, side / 3.0);
    std::uniform_int_distribution<int> blobs(2, 3);
    std::uniform_real_distribution<double> height(0.5, 1.0);

    std::vector<nn::Tensor> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        nn::Tensor img = nn::Tensor::zeros({side, side});
        int nb = blobs(rng);
        for (int b = 0; b < nb; ++b) {
            double cy = pos(rng), cx = pos(rng), s = width(rng), a = height(rng);
            for (std::uint32_t y = 0; y < side; ++y) {
                for (std::uint32_t x = 0; x < side; ++x) {
                    double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                    img.data[y * side + x] +=
                        static_cast<float>(a * std::exp(-d2 / (2.0 * s * s)));
                }
            }
        }
        float peak = *std::max_element(img.data.begin(), img.data.end());
        if (peak > 0.0f) {
            for (auto& v : img.data) v /= peak;
        }
        out.push_back(std::move(img));
    }
    return out;
}

std::vector<nn::Tensor> gen_crafted_images(std::size_t n, std::uint32_t side, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0xc0ffee);
    std::uniform_real_distribution<float> uni(0.0f, 1.0f);
    std::uniform_int_distribution<int> freq(2, 5);
    std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);

    std::vector<nn::Tensor> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        nn::Tensor img = nn::Tensor::zeros({side, side});
        if (k % 2 == 0) {
            // unstructured probe: i.i.d. uniform pixels
            for (auto& v : img.data) v = uni(rng);
        } else {
            // high-frequency pattern probe
            double fy = freq(rng), fx = freq(rng), ph = phase(rng);
            for (std::uint32_t y = 0; y < side; ++y) {
                for (std::uint32_t x = 0; x < side; ++x) {
                    double v = 0.5 + 0.5 * std::sin(fy * y + ph) * std::cos(fx * x);
                    img.data[y * side + x] = static_cast<float>(v) * 0.8f + 0.2f * uni(rng);
                }
            }
        }
        out.push_back(std::move(img));
    }
    return out;
}

}  // namespace mlcapsule::defense
