#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mlcapsule/train.hpp"

namespace mlcapsule::defense {

using Posterior = std::vector<float>;

// Shannon entropy in nats; 0*log 0 reads as 0 (probabilities clamp at 1e-12
// before the log).
double entropy(const Posterior& p);

struct NoiseConfig {
    float c = 0.0f;        // noise magnitude control, in [0, 1]
    Posterior noise_dist;  // T, a valid posterior (training class distribution)
};

// P' = (1 - c*alpha) P + c*alpha T with alpha = 1 - entropy(P)/log K.
// Confident posteriors receive more noise; a uniform P passes through.
Posterior noise_posterior(const Posterior& p, const NoiseConfig& cfg);

// AUC of the score -entropy(P) for member-vs-nonmember separation, by rank
// statistic with tie credit 1/2.
double entropy_attack_auc(const std::vector<Posterior>& members,
                          const std::vector<Posterior>& nonmembers);

// Divergence between original and noised posterior, as the sum
// P_i log(P_i/M_i) + P'_i log(P'_i/M_i) with M the midpoint. Note there is
// deliberately no 1/2 factor; values are in nats and reach 2 ln 2 for
// disjoint supports.
double jsd(const Posterior& p, const Posterior& q);

// |P_delta - P'_delta| for the correct class delta.
double estimation_error(const Posterior& p, const Posterior& noised, std::uint32_t correct_class);

// ---- membership-inference evaluation harness ----

struct EvalSplit {
    std::vector<nn::Tensor> member_x;
    std::vector<std::uint32_t> member_y;
    std::vector<nn::Tensor> nonmember_x;
    std::vector<std::uint32_t> nonmember_y;
};

struct MembershipRow {
    float c = 0.0f;
    double auc = 0.0;
    double jsd_mean = 0.0;
    double est_err_mean = 0.0;
};

// For each c: noise every posterior, re-run the entropy attack on the noised
// outputs and average the utility metrics.
std::vector<MembershipRow> membership_eval(const nn::ModelDef& def,
                                           const nn::ModelSecrets& secrets,
                                           const EvalSplit& split,
                                           const std::vector<float>& c_grid,
                                           const Posterior& noise_dist);

// Deliberately overfit toy model (tiny noisy training set, many epochs) with
// its member/nonmember split and training class distribution.
struct OverfitToy {
    nn::ModelDef def;
    nn::ModelSecrets secrets;
    EvalSplit split;
    Posterior class_dist;
    float train_accuracy = 0.0f;
    float test_accuracy = 0.0f;
};
OverfitToy make_overfit_toy(std::uint64_t seed);

// ---- query-set growth monitoring (model stealing) ----

class QueryArchive {
public:
    QueryArchive(std::size_t feature_dim, double tau);

    // Appends iff the minimum Euclidean distance to the stored set exceeds
    // tau; the first query always appends. Returns whether it appended.
    bool update(const std::vector<float>& features);

    double min_distance(const std::vector<float>& features) const;
    std::size_t size() const { return set_.size(); }
    std::size_t feature_dim() const { return dim_; }
    double tau() const { return tau_; }
    const std::vector<std::vector<float>>& points() const { return set_; }

    Bytes serialize() const;
    static QueryArchive parse(ByteView raw);

private:
    std::size_t dim_;
    double tau_;
    std::vector<std::vector<float>> set_;
};

struct StealingConfig {
    double tau = 1.0;
    double rate_floor = 0.1;   // alarm when append rate over the window drops below
    std::size_t window = 100;  // queries per evaluation window
};

// Sliding-window growth monitor over archive append decisions.
class StealingMonitor {
public:
    StealingMonitor(StealingConfig cfg, std::size_t feature_dim);

    struct Observation {
        bool appended = false;
        bool alarm = false;
    };
    Observation observe(const std::vector<float>& features);

    // Alarm decision over the last `window` observations; errors if fewer
    // have been seen.
    bool alarm_now() const;
    const QueryArchive& archive() const { return archive_; }
    const std::vector<bool>& history() const { return history_; }
    std::size_t observed() const { return history_.size(); }
    bool alarmed() const { return alarmed_; }

    // Resumes from persisted state (cross-invocation monitoring).
    void restore(QueryArchive archive, std::vector<bool> history, bool alarmed);

private:
    StealingConfig cfg_;
    QueryArchive archive_;
    std::vector<bool> history_;
    bool alarmed_ = false;
};

// ---- reverse-engineering input detector ----

struct DetectorModel {
    nn::ModelDef def;
    nn::ModelSecrets secrets;
};

struct DetectorTrainConfig {
    std::uint32_t epochs = 60;
    float learning_rate = 0.05f;
    std::uint64_t seed = 7;
};

// Detector architecture over a given input shape: a dense stand-in for the
// published two-conv network, ending in FullyConnected(2) + softmax. (The
// trainer is dense-only; an externally supplied dense arch works as well.)
nn::ModelDef default_detector_arch(const std::vector<std::uint32_t>& input_shape);

// Trains the benign-vs-crafted classifier (class 0 benign, 1 malicious) with
// the dense trainer. An empty arch selects the default; a supplied arch must
// be a 2-class dense network over the sample shape. Rejects class imbalance
// beyond 10:1.
DetectorModel re_detector_train(const std::vector<nn::Tensor>& benign,
                                const std::vector<nn::Tensor>& crafted,
                                const DetectorTrainConfig& cfg = {},
                                const nn::ModelDef* arch = nullptr);

// True when the detector flags the input as crafted; service is denied
// before any classification runs.
bool re_detector_malicious(const DetectorModel& det, const nn::Tensor& input);

double re_detector_accuracy(const DetectorModel& det, const std::vector<nn::Tensor>& benign,
                            const std::vector<nn::Tensor>& crafted);

// Synthetic corpora: structured benign images (smooth random blobs) and a
// crafted-input proxy (uniform noise and high-frequency patterns). These
// stand in for attack-generated probes, which are out of reach here; the
// detector accepts externally supplied corpora the same way.
std::vector<nn::Tensor> gen_benign_images(std::size_t n, std::uint32_t side, std::uint64_t seed);
std::vector<nn::Tensor> gen_crafted_images(std::size_t n, std::uint32_t side, std::uint64_t seed);

}  // namespace mlcapsule::defense
