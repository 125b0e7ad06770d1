// codelnet command-line front end. Talks to the engine exclusively through
// the C API of the shared library.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <list>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "codelnet.h"

namespace {

constexpr int kExitUsage = 64;

void print_line(const char* line, void*) { std::puts(line); }

struct OptionBag {
    codelnet_options* handle = nullptr;

    OptionBag() {
        if (codelnet_options_create(&handle) != CODELNET_OK) {
            std::fprintf(stderr, "error: %s\n", codelnet_last_error());
            std::exit(2);
        }
    }
    ~OptionBag() { codelnet_options_destroy(handle); }
    OptionBag(const OptionBag&) = delete;
    OptionBag& operator=(const OptionBag&) = delete;
};

// Buffers flag values as strings; values flow into the option bag with
// explicit precedence (environment < config file < flags), so the library's
// defaults remain the single source of truth. Each flag also gets an
// underscore alias matching the resolved-config echo.
class FlagSet {
public:
    explicit FlagSet(CLI::App* cmd) : cmd_(cmd) {
        cmd_->add_option("--config", config_path_, "Config file with key = value lines; flags override it");
    }

    CLI::Option* add(const std::string& flag, const std::string& key, const std::string& help) {
        entries_.push_back(Entry{key, "", nullptr});
        Entry& e = entries_.back();
        std::string spec = flag;
        const std::string underscore = "--" + key;
        if (underscore != flag) spec += "," + underscore;
        e.option = cmd_->add_option(spec, e.value, help);
        return e.option;
    }

    // environment, then config file, then explicit flags
    int apply(codelnet_options* options) const {
        if (const char* env_seed = std::getenv("CODELNET_SEED"); env_seed && *env_seed) {
            if (!set(options, "seed", env_seed)) return kExitUsage;
        }
        if (!config_path_.empty()) {
            std::ifstream is(config_path_);
            if (!is) {
                std::fprintf(stderr, "error: cannot read config file %s\n", config_path_.c_str());
                return 2;
            }
            std::string line;
            int lineno = 0;
            while (std::getline(is, line)) {
                ++lineno;
                const std::size_t hash = line.find('#');
                if (hash != std::string::npos) line.erase(hash);
                const std::size_t eq = line.find('=');
                if (eq == std::string::npos) {
                    if (line.find_first_not_of(" \t\r") != std::string::npos) {
                        std::fprintf(stderr, "error: %s:%d: expected key = value\n", config_path_.c_str(),
                                     lineno);
                        return kExitUsage;
                    }
                    continue;
                }
                std::string key = trim(line.substr(0, eq));
                const std::string value = trim(line.substr(eq + 1));
                for (char& c : key) {
                    if (c == '-') c = '_';
                }
                if (key.empty()) continue;
                if (!set(options, key, value)) return kExitUsage;
            }
        }
        for (const Entry& e : entries_) {
            if (e.option->count() == 0) continue;
            if (!set(options, e.key, e.value)) return kExitUsage;
        }
        return 0;
    }

    std::string get(const std::string& key) const {
        for (const Entry& e : entries_) {
            if (e.key == key) return e.value;
        }
        return "";
    }

private:
    struct Entry {
        std::string key;
        std::string value;
        CLI::Option* option;
    };

    static bool set(codelnet_options* options, const std::string& key, const std::string& value) {
        if (codelnet_options_set(options, key.c_str(), value.c_str()) != CODELNET_OK) {
            std::fprintf(stderr, "error: %s\n", codelnet_last_error());
            return false;
        }
        return true;
    }

    static std::string trim(std::string s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
        return s;
    }

    CLI::App* cmd_;
    std::string config_path_;
    std::list<Entry> entries_;
};

void add_shared_flags(FlagSet& flags) {
    flags.add("--seed", "seed", "Master seed; every random decision derives from it (CODELNET_SEED is the"
                                " lowest-precedence source)");
    flags.add("--out", "out", "Output directory");
    flags.add("--workers", "workers", "Worker threads (0 = auto)");
}

void add_network_flags(FlagSet& flags) {
    flags.add("--channels", "channels", "Input channels: t1c|t2|both");
    flags.add("--canvas", "canvas", "Square canvas side in pixels");
    flags.add("--filters", "filters", "Filters per branch stage");
    flags.add("--fc", "fc", "Hidden fully-connected widths, comma separated");
}

void add_split_flags(FlagSet& flags) {
    flags.add("--test-per-class", "test_per_class", "Held-out test slices per class");
    flags.add("--train-per-class", "train_per_class", "Balanced per-epoch draw per class (0 = auto)");
    flags.add("--val-fraction", "val_fraction", "Validation fraction carved from the pool");
    flags.add("--grouping", "grouping", "Split grouping: patient|slice");
}

void add_train_flags(FlagSet& flags) {
    flags.add("--optimizer", "optimizer", "sgd|rmsprop|adadelta|adam");
    flags.add("--augment-fold", "augment_fold", "Augmented copies per slice per epoch (0 = none)");
    flags.add("--epochs", "epochs", "Maximum training epochs");
    flags.add("--batch-size", "batch_size", "Minibatch size");
    flags.add("--base-lr", "base_lr", "Initial learning rate");
    flags.add("--lr-halving-period", "lr_halving_period", "Epochs between 50% learning-rate cuts");
    flags.add("--early-stop-delta", "early_stop_delta", "Validation-loss change threshold");
    flags.add("--early-stop-patience", "early_stop_patience", "Consecutive small changes before stopping");
    flags.add("--max-shift", "max_shift", "Max augmentation translation in pixels");
    flags.add("--max-rotation", "max_rotation", "Max augmentation rotation in degrees");
    flags.add("--flip-probability", "flip_probability", "Per-axis flip probability");
}

int write_resolved_config(codelnet_options* options, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const std::string path = (std::filesystem::path(out_dir) / "resolved.cfg").string();
    std::ofstream os(path);
    if (!os) {
        std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
        return 2;
    }
    auto sink = [](const char* line, void* user) { *static_cast<std::ofstream*>(user) << line << "\n"; };
    if (codelnet_resolve_config(options, sink, &os) != CODELNET_OK) {
        std::fprintf(stderr, "error: %s\n", codelnet_last_error());
        return kExitUsage;
    }
    return 0;
}

int report(codelnet_status status) {
    if (status != CODELNET_OK) std::fprintf(stderr, "error: %s\n", codelnet_last_error());
    return static_cast<int>(status);
}

// a key's fully layered value (defaults < env < config < flags)
std::string resolved_value(codelnet_options* options, const std::string& key) {
    std::map<std::string, std::string> kv;
    auto sink = [](const char* line, void* user) {
        const std::string text = line;
        const std::size_t eq = text.find(" = ");
        if (eq == std::string::npos) return;
        (*static_cast<std::map<std::string, std::string>*>(user))[text.substr(0, eq)] = text.substr(eq + 3);
    };
    if (codelnet_resolve_config(options, sink, &kv) != CODELNET_OK) return "";
    return kv.count(key) ? kv.at(key) : "";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"codelnet - multi-scale CNN pipeline for two-channel slice classification"};
    app.require_subcommand(1);

    CLI::App* phantom = app.add_subcommand("phantom", "Generate the synthetic phantom dataset");
    FlagSet phantom_flags(phantom);
    add_shared_flags(phantom_flags);
    phantom_flags.add("--patients", "patients_per_class", "Patients per class");
    phantom_flags.add("--slices-per-patient", "slices_per_patient", "Slices per patient");
    phantom_flags.add("--canvas", "canvas", "Square canvas side in pixels");
    phantom_flags.add("--radius-min", "radius_min", "Minimum tumor semi-axis");
    phantom_flags.add("--radius-max", "radius_max", "Maximum tumor semi-axis");
    phantom_flags.add("--signal", "signal", "Class cue strength in [0,1]");
    phantom_flags.add("--noise", "noise", "Pixel noise level");

    CLI::App* train = app.add_subcommand("train", "Split, preprocess and train; writes weights + epoch log");
    FlagSet train_flags(train);
    add_shared_flags(train_flags);
    add_network_flags(train_flags);
    add_split_flags(train_flags);
    add_train_flags(train_flags);
    train_flags.add("--manifest", "manifest", "Dataset manifest path");

    CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate saved weights on the held-out split");
    FlagSet eval_flags(evaluate);
    add_shared_flags(eval_flags);
    add_network_flags(eval_flags);
    add_split_flags(eval_flags);
    eval_flags.add("--manifest", "manifest", "Dataset manifest path");
    eval_flags.add("--weights", "weights", "Weights file path");
    eval_flags.add("--split", "eval_split", "Which records to score: test|all");
    eval_flags.add("--batch-size", "batch_size", "Inference batch size");

    CLI::App* predictc = app.add_subcommand("predict", "Print id,label,probability per slice");
    FlagSet predict_flags(predictc);
    add_shared_flags(predict_flags);
    add_network_flags(predict_flags);
    predict_flags.add("--manifest", "manifest", "Dataset manifest path");
    predict_flags.add("--weights", "weights", "Weights file path");
    predict_flags.add("--batch-size", "batch_size", "Inference batch size");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "Verify layer gradients against finite differences");
    std::string gc_op;
    double gc_tolerance = 1e-4;
    std::uint64_t gc_seed = 0;
    int gc_cases = 100;
    gradcheck->add_option("--op", gc_op, "Check a single op (default: all)");
    gradcheck->add_option("--tolerance", gc_tolerance, "Maximum allowed relative error");
    gradcheck->add_option("--seed", gc_seed, "Seed for the randomized cases")->envname("CODELNET_SEED");
    gradcheck->add_option("--cases", gc_cases, "Randomized cases per op");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitUsage;
    }

    if (gradcheck->parsed()) {
        return report(codelnet_gradcheck(gc_op.empty() ? nullptr : gc_op.c_str(), gc_tolerance, gc_seed,
                                         gc_cases, print_line, nullptr));
    }

    FlagSet* flags = nullptr;
    if (phantom->parsed()) flags = &phantom_flags;
    else if (train->parsed()) flags = &train_flags;
    else if (evaluate->parsed()) flags = &eval_flags;
    else flags = &predict_flags;

    OptionBag bag;
    if (int rc = flags->apply(bag.handle); rc != 0) return rc;

    std::string out_dir = resolved_value(bag.handle, "out");
    if (out_dir.empty()) out_dir = ".";
    const std::string manifest = resolved_value(bag.handle, "manifest");
    const std::string weights = resolved_value(bag.handle, "weights");

    if (phantom->parsed()) {
        char manifest_path[4096] = {0};
        const codelnet_status status =
            codelnet_phantom(bag.handle, out_dir.c_str(), manifest_path, sizeof(manifest_path));
        if (status != CODELNET_OK) return report(status);
        std::puts(manifest_path);
        return 0;
    }

    if (train->parsed()) {
        if (int rc = write_resolved_config(bag.handle, out_dir); rc != 0) return rc;
        return report(codelnet_train(bag.handle, manifest.c_str(), out_dir.c_str(), print_line, nullptr));
    }

    if (evaluate->parsed()) {
        codelnet_eval_result result{};
        const codelnet_status status =
            codelnet_evaluate(bag.handle, weights.c_str(), manifest.c_str(), out_dir.c_str(), &result);
        if (status != CODELNET_OK) return report(status);
        std::printf("tp=%lld fp=%lld tn=%lld fn=%lld\n", result.tp, result.fp, result.tn, result.fn);
        std::printf("sensitivity=%.4f specificity=%.4f accuracy=%.4f\n", result.sensitivity,
                    result.specificity, result.accuracy);
        return 0;
    }

    return report(codelnet_predict(bag.handle, weights.c_str(), manifest.c_str(), print_line, nullptr));
}
