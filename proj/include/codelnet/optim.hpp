#ifndef CODELNET_OPTIM_HPP
#define CODELNET_OPTIM_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "codelnet/network.hpp"
#include "codelnet/preprocess.hpp"

namespace codelnet {

enum class OptimizerKind { sgd, rmsprop, adadelta, adam };

OptimizerKind optimizer_from_string(const std::string& s);
const char* optimizer_token(OptimizerKind kind);

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::sgd;
    float base_lr = 0.001f;
    int lr_halving_period = 50; // epochs
    int batch_size = 32;
    float early_stop_delta = 0.02f;
    int early_stop_patience = 10; // consecutive epochs
    int max_epochs = 50;
    int augmentation_fold = 0; // k
    std::uint64_t master_seed = 0;

    void validate() const;
};

// Per-parameter accumulators, keyed by parameter name; all start at zero.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::sgd;
    std::int64_t step = 0;
    struct Slot {
        std::vector<float> a; // squared-gradient / first-moment accumulator
        std::vector<float> b; // squared-update / second-moment accumulator
    };
    std::map<std::string, Slot> slots;
};

// SGD:      w -= lr * g                                  (no momentum)
// RMSprop:  a = 0.9 a + 0.1 g^2;  w -= lr * g / (sqrt(a) + 1e-8)
// AdaDelta: rho = 0.95, eps = 1e-6, standard recurrence; lr is ignored
// Adam:     beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias-corrected
void optimizer_step(OptimizerState& state, std::vector<Parameter>& params, float lr);

// lr = base * 0.5^floor(epoch / period)
float lr_schedule(int epoch, float base_lr, int halving_period);

// true iff the last `patience` consecutive epoch-to-epoch absolute changes
// are all below delta
bool early_stop(const std::vector<float>& validation_losses, float delta, int patience);

struct EpochLog {
    int epoch = 0;
    float lr = 0.0f;
    float train_loss = 0.0f;
    float train_acc = 0.0f;
    float val_loss = 0.0f;
    float val_acc = 0.0f;
};

struct TrainData {
    std::vector<SliceSample> pool;       // canonical training samples
    std::vector<SliceSample> validation; // fixed for the whole run
    int per_class_count = 0;             // balanced draw per class; 0 = largest equal count
    AugmentParams augment;
};

struct EvalResult {
    float loss = 0.0f;
    float acc = 0.0f;
};

EvalResult evaluate_samples(const Network& net, const std::vector<SliceSample>& samples, int batch_size);

// Per epoch: balanced subset -> k-fold augmentation -> shuffle -> minibatches
// (final partial batch kept) -> optimizer steps at the scheduled lr ->
// validation pass -> EpochLog; stops on early_stop or max_epochs. Fully
// deterministic in cfg.master_seed.
std::vector<EpochLog> train_loop(Network& net, const TrainData& data, const TrainConfig& cfg,
                                 const std::function<void(const EpochLog&)>& on_epoch = nullptr);

} // namespace codelnet

#endif
