#include "codelnet/optim.hpp"

#include <algorithm>
#include <cmath>

#include "codelnet/data.hpp"
#include "codelnet/errors.hpp"

namespace codelnet {

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "rmsprop") return OptimizerKind::rmsprop;
    if (s == "adadelta") return OptimizerKind::adadelta;
    if (s == "adam") return OptimizerKind::adam;
    throw invalid_argument_error("optimizer must be sgd|rmsprop|adadelta|adam, got '" + s + "'");
}

const char* optimizer_token(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::rmsprop: return "rmsprop";
        case OptimizerKind::adadelta: return "adadelta";
        default: return "adam";
    }
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw invalid_argument_error("batch_size must be >= 1");
    if (!(base_lr > 0.0f)) throw invalid_argument_error("base learning rate must be positive");
    if (lr_halving_period < 1) throw invalid_argument_error("lr halving period must be >= 1");
    if (!(early_stop_delta > 0.0f)) throw invalid_argument_error("early stop delta must be positive");
    if (early_stop_patience < 1) throw invalid_argument_error("early stop patience must be >= 1");
    if (max_epochs < 1) throw invalid_argument_error("max_epochs must be >= 1");
    if (augmentation_fold < 0) throw invalid_argument_error("augmentation fold must be >= 0");
}

namespace {

constexpr float kRmsDecay = 0.9f;
constexpr float kRmsEps = 1e-8f;
constexpr float kAdaDeltaRho = 0.95f;
constexpr float kAdaDeltaEps = 1e-6f;
constexpr float kAdamBeta1 = 0.9f;
constexpr float kAdamBeta2 = 0.999f;
constexpr float kAdamEps = 1e-8f;

} // namespace

void optimizer_step(OptimizerState& state, std::vector<Parameter>& params, float lr) {
    ++state.step;
    for (auto& p : params) {
        if (!p.trainable) continue;
        if (!p.tensor.has_grad())
            throw invalid_argument_error("optimizer_step: parameter '" + p.name + "' has no gradient");
        const std::size_t n = p.tensor.data.size();
        float* w = p.tensor.data.data();
        const float* g = p.tensor.grad.data();

        switch (state.kind) {
            case OptimizerKind::sgd: {
                for (std::size_t i = 0; i < n; ++i) w[i] -= lr * g[i];
                break;
            }
            case OptimizerKind::rmsprop: {
                auto& slot = state.slots[p.name];
                if (slot.a.empty()) slot.a.assign(n, 0.0f);
                float* a = slot.a.data();
                for (std::size_t i = 0; i < n; ++i) {
                    a[i] = kRmsDecay * a[i] + (1.0f - kRmsDecay) * g[i] * g[i];
                    w[i] -= lr * g[i] / (std::sqrt(a[i]) + kRmsEps);
                }
                break;
            }
            case OptimizerKind::adadelta: {
                auto& slot = state.slots[p.name];
                if (slot.a.empty()) {
                    slot.a.assign(n, 0.0f); // E[g^2]
                    slot.b.assign(n, 0.0f); // E[dx^2]
                }
                float* eg = slot.a.data();
                float* ex = slot.b.data();
                for (std::size_t i = 0; i < n; ++i) {
                    eg[i] = kAdaDeltaRho * eg[i] + (1.0f - kAdaDeltaRho) * g[i] * g[i];
                    const float dx = -std::sqrt(ex[i] + kAdaDeltaEps) / std::sqrt(eg[i] + kAdaDeltaEps) * g[i];
                    ex[i] = kAdaDeltaRho * ex[i] + (1.0f - kAdaDeltaRho) * dx * dx;
                    w[i] += dx;
                }
                break;
            }
            case OptimizerKind::adam: {
                auto& slot = state.slots[p.name];
                if (slot.a.empty()) {
                    slot.a.assign(n, 0.0f); // first moment
                    slot.b.assign(n, 0.0f); // second moment
                }
                float* m = slot.a.data();
                float* v = slot.b.data();
                const double t = static_cast<double>(state.step);
                const float c1 = 1.0f - static_cast<float>(std::pow(kAdamBeta1, t));
                const float c2 = 1.0f - static_cast<float>(std::pow(kAdamBeta2, t));
                for (std::size_t i = 0; i < n; ++i) {
                    m[i] = kAdamBeta1 * m[i] + (1.0f - kAdamBeta1) * g[i];
                    v[i] = kAdamBeta2 * v[i] + (1.0f - kAdamBeta2) * g[i] * g[i];
                    const float mhat = m[i] / c1;
                    const float vhat = v[i] / c2;
                    w[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
                }
                break;
            }
        }
    }
}

float lr_schedule(int epoch, float base_lr, int halving_period) {
    if (epoch < 0) throw invalid_argument_error("lr_schedule: epoch must be >= 0");
    if (halving_period < 1) throw invalid_argument_error("lr_schedule: halving period must be >= 1");
    return base_lr * static_cast<float>(std::pow(0.5, epoch / halving_period));
}

bool early_stop(const std::vector<float>& validation_losses, float delta, int patience) {
    if (static_cast<int>(validation_losses.size()) < patience + 1) return false;
    const std::size_t n = validation_losses.size();
    for (int i = 0; i < patience; ++i) {
        const float change =
            std::abs(validation_losses[n - 1 - i] - validation_losses[n - 2 - i]);
        if (!(change < delta)) return false;
    }
    return true;
}

namespace {

struct Batch {
    Tensor images;
    std::vector<int> labels;
};

Batch assemble_batch(const std::vector<SliceSample>& samples, std::size_t begin, std::size_t end) {
    const Tensor& first = samples[begin].image;
    const std::int64_t c = first.dim(0), h = first.dim(1), w = first.dim(2);
    Batch batch;
    batch.images = Tensor({static_cast<std::int64_t>(end - begin), c, h, w});
    for (std::size_t i = begin; i < end; ++i) {
        const Tensor& img = samples[i].image;
        if (img.shape != first.shape)
            throw dimension_error("batch: sample image shapes disagree: " + Tensor::shape_string(img.shape) +
                                  " vs " + Tensor::shape_string(first.shape));
        std::copy(img.data.begin(), img.data.end(),
                  batch.images.data.begin() + static_cast<std::int64_t>(i - begin) * c * h * w);
        batch.labels.push_back(samples[i].label);
    }
    return batch;
}

int count_correct(const Tensor& probs, const std::vector<int>& labels) {
    int correct = 0;
    const std::int64_t k = probs.dim(1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int best = 0;
        for (std::int64_t j = 1; j < k; ++j) {
            if (probs.data[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)] >
                probs.data[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(best)])
                best = static_cast<int>(j);
        }
        if (best == labels[i]) ++correct;
    }
    return correct;
}

} // namespace

EvalResult evaluate_samples(const Network& net, const std::vector<SliceSample>& samples, int batch_size) {
    if (samples.empty()) throw invalid_argument_error("evaluate: no samples");
    double loss_sum = 0.0;
    int correct = 0;
    for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(samples.size(), begin + static_cast<std::size_t>(batch_size));
        Batch batch = assemble_batch(samples, begin, end);
        Tensor probs = forward(net, batch.images);
        loss_sum += static_cast<double>(nll_loss(probs, batch.labels)) * static_cast<double>(end - begin);
        correct += count_correct(probs, batch.labels);
    }
    EvalResult r;
    r.loss = static_cast<float>(loss_sum / static_cast<double>(samples.size()));
    r.acc = static_cast<float>(correct) / static_cast<float>(samples.size());
    return r;
}

std::vector<EpochLog> train_loop(Network& net, const TrainData& data, const TrainConfig& cfg,
                                 const std::function<void(const EpochLog&)>& on_epoch) {
    cfg.validate();
    if (data.pool.empty()) throw invalid_argument_error("train_loop: empty training pool");
    if (data.validation.empty()) throw invalid_argument_error("train_loop: empty validation set");
    data.augment.validate(data.pool.front().image.dim(1));

    std::vector<int> pool_labels;
    pool_labels.reserve(data.pool.size());
    for (const auto& s : data.pool) pool_labels.push_back(s.label);
    const std::vector<std::size_t> counts = class_counts(pool_labels);
    int per_class = data.per_class_count;
    if (per_class <= 0) per_class = static_cast<int>(std::min(counts[0], counts[1]));
    if (per_class < 1) throw split_error("train_loop: a class is absent from the training pool");

    OptimizerState state;
    state.kind = cfg.optimizer;

    std::vector<EpochLog> logs;
    std::vector<float> val_losses;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const float lr = lr_schedule(epoch, cfg.base_lr, cfg.lr_halving_period);

        std::vector<std::size_t> chosen =
            balanced_sample_indices(pool_labels, per_class, epoch, cfg.master_seed);
        std::vector<SliceSample> subset;
        subset.reserve(chosen.size());
        for (std::size_t i : chosen) subset.push_back(data.pool[i]);

        std::vector<SliceSample> epoch_set =
            build_epoch_training_set(subset, cfg.augmentation_fold, epoch, cfg.master_seed, data.augment);

        double loss_sum = 0.0;
        int correct = 0;
        for (std::size_t begin = 0; begin < epoch_set.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(epoch_set.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            Batch batch = assemble_batch(epoch_set, begin, end);
            ForwardTrace trace = forward_trace(net, batch.images);
            const float loss = nll_loss(trace.probs, batch.labels);
            if (!std::isfinite(loss))
                throw numeric_error("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(begin / static_cast<std::size_t>(cfg.batch_size)));
            loss_sum += static_cast<double>(loss) * static_cast<double>(end - begin);
            correct += count_correct(trace.probs, batch.labels);
            net.zero_grads();
            backward(net, trace, batch.labels);
            optimizer_step(state, net.parameters, lr);
        }

        EvalResult val = evaluate_samples(net, data.validation, cfg.batch_size);
        if (!std::isfinite(val.loss))
            throw numeric_error("non-finite validation loss at epoch " + std::to_string(epoch));

        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        log.train_loss = static_cast<float>(loss_sum / static_cast<double>(epoch_set.size()));
        log.train_acc = static_cast<float>(correct) / static_cast<float>(epoch_set.size());
        log.val_loss = val.loss;
        log.val_acc = val.acc;
        logs.push_back(log);
        val_losses.push_back(val.loss);
        if (on_epoch) on_epoch(log);

        if (early_stop(val_losses, cfg.early_stop_delta, cfg.early_stop_patience)) break;
    }
    return logs;
}

} // namespace codelnet
