#ifndef CODELNET_PIPELINE_HPP
#define CODELNET_PIPELINE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "codelnet/data.hpp"
#include "codelnet/metrics.hpp"
#include "codelnet/network.hpp"
#include "codelnet/optim.hpp"
#include "codelnet/phantom.hpp"
#include "codelnet/preprocess.hpp"

namespace codelnet {

// Fully resolved run configuration. Every knob has a documented default and
// round-trips through a flat key=value map, so a resolved config echoed to
// disk reproduces the identical run when fed back in.
struct RunSettings {
    std::uint64_t seed = 0;
    int workers = 0; // 0 = auto

    ChannelMode channels = ChannelMode::both;
    std::int64_t canvas = 64;
    std::int64_t filters = 16;
    std::vector<std::int64_t> fc_sizes = {64};

    TrainConfig train;
    SplitSpec split;
    AugmentParams augment;
    PhantomConfig phantom;

    std::string manifest_path;
    std::string weights_path;
    std::string out_dir = ".";
    std::string eval_split = "test"; // test | all

    NetworkConfig network_config() const;
};

using OptionMap = std::map<std::string, std::string>;

// Applies defaults, then the provided overrides. Unknown keys and malformed
// values raise invalid_argument errors naming the key.
RunSettings resolve_settings(const OptionMap& options);

// The complete effective configuration, suitable for echoing as key=value.
OptionMap settings_to_options(const RunSettings& settings);

using LineFn = std::function<void(const std::string&)>;

struct TrainOutcome {
    std::vector<EpochLog> logs;
    ConfusionMatrix val_cm;
    Metrics val_metrics;
    std::string weights_path;
    std::string log_path;
};

// split -> carve validation -> canonicalize -> train; writes weights.cdw and
// epochs.csv under out_dir. Emits one CSV row per epoch plus a final
// validation summary through `emit`.
TrainOutcome run_train(const RunSettings& settings, const LineFn& emit = nullptr);

struct EvalOutcome {
    ConfusionMatrix cm;
    Metrics metrics;
    std::string csv_path;
};

// Rebuilds the held-out split from (seed, split spec), loads the weights and
// reports sensitivity/specificity/accuracy; writes metrics.csv under out_dir.
EvalOutcome run_evaluate(const RunSettings& settings, const LineFn& emit = nullptr);

struct PredictLine {
    std::string id;
    int label = 0;
    float probability = 0.0f;
};

std::vector<PredictLine> run_predict(const RunSettings& settings, const LineFn& emit = nullptr);

Manifest run_phantom(const RunSettings& settings, const LineFn& emit = nullptr);

// Formats one epoch log row: epoch,lr,train_loss,train_acc,val_loss,val_acc
std::string epoch_csv_row(const EpochLog& log);
extern const char* const kEpochCsvHeader;

} // namespace codelnet

#endif
