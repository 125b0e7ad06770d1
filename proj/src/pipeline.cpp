#include "codelnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "codelnet/errors.hpp"
#include "codelnet/parallel.hpp"
#include "codelnet/rng.hpp"

namespace fs = std::filesystem;

namespace codelnet {

const char* const kEpochCsvHeader = "epoch,lr,train_loss,train_acc,val_loss,val_acc";

namespace {

// shortest decimal string that parses back to the same double
std::string fmt_float(double v) {
    char buf[64];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

// shortest decimal string that parses back to the same float
std::string fmt_float32(float v) {
    char buf[64];
    for (int precision = 1; precision <= 9; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, static_cast<double>(v));
        if (std::strtof(buf, nullptr) == v) return buf;
    }
    return buf;
}

std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }

std::int64_t parse_i64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return static_cast<std::int64_t>(v);
    } catch (const std::exception&) {
        throw invalid_argument_error("option '" + key + "': expected integer, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw invalid_argument_error("option '" + key + "': expected unsigned integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw invalid_argument_error("option '" + key + "': expected number, got '" + value + "'");
    }
}

std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<std::int64_t> out;
    std::string cur;
    std::stringstream ss(value);
    while (std::getline(ss, cur, ',')) {
        if (cur.empty()) continue;
        out.push_back(parse_i64(key, cur));
    }
    if (out.empty()) throw invalid_argument_error("option '" + key + "': expected a comma-separated list");
    return out;
}

std::string int_list_to_string(const std::vector<std::int64_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

// default shift keeps tumors on-canvas across canvas sizes; 64 -> 20
int default_max_shift(std::int64_t canvas) {
    return static_cast<int>(std::min<std::int64_t>(20, canvas * 5 / 16));
}

} // namespace

NetworkConfig RunSettings::network_config() const {
    NetworkConfig cfg = desk_scale_config(channel_count(channels), canvas, filters, fc_sizes);
    cfg.init_seed = mix_seed(seed, 0x1247ULL);
    return cfg;
}

RunSettings resolve_settings(const OptionMap& options) {
    RunSettings s;
    bool shift_set = false;

    for (const auto& [key, value] : options) {
        if (key == "seed") s.seed = parse_u64(key, value);
        else if (key == "workers") s.workers = static_cast<int>(parse_i64(key, value));
        else if (key == "channels") s.channels = channel_mode_from_string(value);
        else if (key == "canvas") s.canvas = parse_i64(key, value);
        else if (key == "filters") s.filters = parse_i64(key, value);
        else if (key == "fc") s.fc_sizes = parse_int_list(key, value);
        else if (key == "optimizer") s.train.optimizer = optimizer_from_string(value);
        else if (key == "base_lr") s.train.base_lr = static_cast<float>(parse_double(key, value));
        else if (key == "lr_halving_period") s.train.lr_halving_period = static_cast<int>(parse_i64(key, value));
        else if (key == "batch_size") s.train.batch_size = static_cast<int>(parse_i64(key, value));
        else if (key == "early_stop_delta") s.train.early_stop_delta = static_cast<float>(parse_double(key, value));
        else if (key == "early_stop_patience") s.train.early_stop_patience = static_cast<int>(parse_i64(key, value));
        else if (key == "epochs") s.train.max_epochs = static_cast<int>(parse_i64(key, value));
        else if (key == "augment_fold") s.train.augmentation_fold = static_cast<int>(parse_i64(key, value));
        else if (key == "test_per_class") s.split.test_per_class = static_cast<int>(parse_i64(key, value));
        else if (key == "train_per_class") s.split.train_per_class = static_cast<int>(parse_i64(key, value));
        else if (key == "val_fraction") s.split.validation_fraction = parse_double(key, value);
        else if (key == "grouping") s.split.grouping = grouping_from_string(value);
        else if (key == "max_shift") { s.augment.max_shift = static_cast<int>(parse_i64(key, value)); shift_set = true; }
        else if (key == "max_rotation") s.augment.max_rotation = parse_double(key, value);
        else if (key == "flip_probability") s.augment.flip_probability = parse_double(key, value);
        else if (key == "patients_per_class") s.phantom.patients_per_class = static_cast<int>(parse_i64(key, value));
        else if (key == "slices_per_patient") s.phantom.slices_per_patient = static_cast<int>(parse_i64(key, value));
        else if (key == "radius_min") s.phantom.tumor_radius_min = parse_double(key, value);
        else if (key == "radius_max") s.phantom.tumor_radius_max = parse_double(key, value);
        else if (key == "signal") s.phantom.signal_strength = parse_double(key, value);
        else if (key == "noise") s.phantom.noise_level = parse_double(key, value);
        else if (key == "manifest") s.manifest_path = value;
        else if (key == "weights") s.weights_path = value;
        else if (key == "out") s.out_dir = value;
        else if (key == "eval_split") {
            if (value != "test" && value != "all")
                throw invalid_argument_error("option 'eval_split': expected test|all, got '" + value + "'");
            s.eval_split = value;
        } else {
            throw invalid_argument_error("unknown option '" + key + "'");
        }
    }

    if (!shift_set) s.augment.max_shift = default_max_shift(s.canvas);
    s.train.master_seed = s.seed;
    s.split.seed = mix_seed(s.seed, 0x5971ULL);
    s.phantom.seed = s.seed;
    if (s.canvas < 8) throw invalid_argument_error("option 'canvas': must be >= 8");
    if (s.filters < 1) throw invalid_argument_error("option 'filters': must be >= 1");
    s.phantom.canvas = s.canvas;
    return s;
}

OptionMap settings_to_options(const RunSettings& s) {
    OptionMap m;
    m["seed"] = fmt_u64(s.seed);
    m["workers"] = std::to_string(s.workers);
    m["channels"] = channel_mode_token(s.channels);
    m["canvas"] = std::to_string(s.canvas);
    m["filters"] = std::to_string(s.filters);
    m["fc"] = int_list_to_string(s.fc_sizes);
    m["optimizer"] = optimizer_token(s.train.optimizer);
    m["base_lr"] = fmt_float32(s.train.base_lr);
    m["lr_halving_period"] = std::to_string(s.train.lr_halving_period);
    m["batch_size"] = std::to_string(s.train.batch_size);
    m["early_stop_delta"] = fmt_float32(s.train.early_stop_delta);
    m["early_stop_patience"] = std::to_string(s.train.early_stop_patience);
    m["epochs"] = std::to_string(s.train.max_epochs);
    m["augment_fold"] = std::to_string(s.train.augmentation_fold);
    m["test_per_class"] = std::to_string(s.split.test_per_class);
    m["train_per_class"] = std::to_string(s.split.train_per_class);
    m["val_fraction"] = fmt_float(s.split.validation_fraction);
    m["grouping"] = s.split.grouping == Grouping::patient ? "patient" : "slice";
    m["max_shift"] = std::to_string(s.augment.max_shift);
    m["max_rotation"] = fmt_float(s.augment.max_rotation);
    m["flip_probability"] = fmt_float(s.augment.flip_probability);
    m["patients_per_class"] = std::to_string(s.phantom.patients_per_class);
    m["slices_per_patient"] = std::to_string(s.phantom.slices_per_patient);
    m["radius_min"] = fmt_float(s.phantom.tumor_radius_min);
    m["radius_max"] = fmt_float(s.phantom.tumor_radius_max);
    m["signal"] = fmt_float(s.phantom.signal_strength);
    m["noise"] = fmt_float(s.phantom.noise_level);
    m["manifest"] = s.manifest_path;
    m["weights"] = s.weights_path;
    m["out"] = s.out_dir;
    m["eval_split"] = s.eval_split;
    return m;
}

std::string epoch_csv_row(const EpochLog& log) {
    return std::to_string(log.epoch) + "," + fmt_float32(log.lr) + "," + fmt_float32(log.train_loss) + "," +
           fmt_float32(log.train_acc) + "," + fmt_float32(log.val_loss) + "," + fmt_float32(log.val_acc);
}

namespace {

void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create output directory " + out_dir + ": " + ec.message());
}

std::vector<int> predict_labels(const Network& net, const std::vector<SliceSample>& samples, int batch_size) {
    std::vector<int> out;
    out.reserve(samples.size());
    for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(samples.size(), begin + static_cast<std::size_t>(batch_size));
        const Tensor& first = samples[begin].image;
        Tensor batch({static_cast<std::int64_t>(end - begin), first.dim(0), first.dim(1), first.dim(2)});
        for (std::size_t i = begin; i < end; ++i) {
            std::copy(samples[i].image.data.begin(), samples[i].image.data.end(),
                      batch.data.begin() +
                          static_cast<std::int64_t>(i - begin) * first.dim(0) * first.dim(1) * first.dim(2));
        }
        for (const Prediction& p : predict(net, batch)) out.push_back(p.label);
    }
    return out;
}

std::string metrics_summary(const ConfusionMatrix& cm, const Metrics& m) {
    std::ostringstream os;
    os << "sensitivity=" << fmt_float(m.sensitivity) << " specificity=" << fmt_float(m.specificity)
       << " accuracy=" << fmt_float(m.accuracy) << " tp=" << cm.tp << " fp=" << cm.fp << " tn=" << cm.tn
       << " fn=" << cm.fn;
    return os.str();
}

} // namespace

Manifest run_phantom(const RunSettings& settings, const LineFn& emit) {
    set_worker_count(settings.workers);
    Manifest manifest = generate_phantom(settings.phantom, settings.out_dir);
    if (emit) emit((fs::path(settings.out_dir) / "manifest.csv").string());
    return manifest;
}

TrainOutcome run_train(const RunSettings& settings, const LineFn& emit) {
    set_worker_count(settings.workers);
    if (settings.manifest_path.empty()) throw invalid_argument_error("train: manifest path required");
    ensure_out_dir(settings.out_dir);

    Manifest manifest = parse_manifest(settings.manifest_path);
    Split split = split_dataset(manifest, settings.split);
    PoolSplit pools = carve_validation(split.pool, settings.split.validation_fraction, settings.split.grouping,
                                       mix_seed(settings.seed, 0x7a55ULL));
    if (pools.validation.empty())
        throw split_error("validation set is empty; raise val_fraction or enlarge the pool");

    TrainData data;
    data.pool = canonicalize_all(manifest, pools.train, settings.channels, settings.canvas);
    data.validation = canonicalize_all(manifest, pools.validation, settings.channels, settings.canvas);
    data.per_class_count = settings.split.train_per_class;
    data.augment = settings.augment;

    Network net = build_network(settings.network_config());

    std::ofstream log_file;
    const std::string log_path = (fs::path(settings.out_dir) / "epochs.csv").string();
    log_file.open(log_path);
    if (!log_file) throw io_error("cannot open training log for writing: " + log_path);
    log_file << kEpochCsvHeader << "\n";
    if (emit) emit(kEpochCsvHeader);

    TrainOutcome outcome;
    outcome.logs = train_loop(net, data, settings.train, [&](const EpochLog& log) {
        const std::string row = epoch_csv_row(log);
        log_file << row << "\n";
        if (emit) emit(row);
    });
    log_file.close();
    if (!log_file) throw io_error("failed writing training log: " + log_path);

    const std::string weights_path = (fs::path(settings.out_dir) / "weights.cdw").string();
    save_weights(net, weights_path);

    std::vector<int> preds = predict_labels(net, data.validation, settings.train.batch_size);
    std::vector<int> truths;
    for (const auto& s : data.validation) truths.push_back(s.label);
    outcome.val_cm = confusion(preds, truths);
    outcome.val_metrics = evaluate_metrics(outcome.val_cm);
    outcome.weights_path = weights_path;
    outcome.log_path = log_path;
    if (emit) emit("final validation: " + metrics_summary(outcome.val_cm, outcome.val_metrics));
    return outcome;
}

EvalOutcome run_evaluate(const RunSettings& settings, const LineFn& emit) {
    set_worker_count(settings.workers);
    if (settings.manifest_path.empty()) throw invalid_argument_error("evaluate: manifest path required");
    if (settings.weights_path.empty()) throw invalid_argument_error("evaluate: weights path required");
    ensure_out_dir(settings.out_dir);

    Manifest manifest = parse_manifest(settings.manifest_path);
    std::vector<SliceRecord> records;
    if (settings.eval_split == "test") {
        records = split_dataset(manifest, settings.split).test;
    } else {
        records = manifest.records;
    }
    if (records.empty()) throw split_error("evaluate: no records selected");

    Network net = load_weights(settings.weights_path, settings.network_config());
    std::vector<SliceSample> samples = canonicalize_all(manifest, records, settings.channels, settings.canvas);

    std::vector<int> preds = predict_labels(net, samples, settings.train.batch_size);
    std::vector<int> truths;
    for (const auto& s : samples) truths.push_back(s.label);

    EvalOutcome out;
    out.cm = confusion(preds, truths);
    out.metrics = evaluate_metrics(out.cm);
    out.csv_path = (fs::path(settings.out_dir) / "metrics.csv").string();

    std::ofstream csv(out.csv_path);
    if (!csv) throw io_error("cannot open metrics csv for writing: " + out.csv_path);
    csv << "sensitivity,specificity,accuracy,tp,fp,tn,fn\n";
    csv << fmt_float(out.metrics.sensitivity) << "," << fmt_float(out.metrics.specificity) << ","
        << fmt_float(out.metrics.accuracy) << "," << out.cm.tp << "," << out.cm.fp << "," << out.cm.tn << ","
        << out.cm.fn << "\n";
    if (!csv) throw io_error("failed writing metrics csv: " + out.csv_path);

    if (emit) {
        emit("split=" + settings.eval_split + " n=" + std::to_string(out.cm.total()));
        emit(metrics_summary(out.cm, out.metrics));
    }
    return out;
}

std::vector<PredictLine> run_predict(const RunSettings& settings, const LineFn& emit) {
    set_worker_count(settings.workers);
    if (settings.manifest_path.empty()) throw invalid_argument_error("predict: manifest path required");
    if (settings.weights_path.empty()) throw invalid_argument_error("predict: weights path required");

    Manifest manifest = parse_manifest(settings.manifest_path);
    if (manifest.records.empty()) throw invalid_argument_error("predict: manifest holds no records");
    Network net = load_weights(settings.weights_path, settings.network_config());
    std::vector<SliceSample> samples =
        canonicalize_all(manifest, manifest.records, settings.channels, settings.canvas);

    std::vector<PredictLine> lines;
    for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(settings.train.batch_size)) {
        const std::size_t end =
            std::min(samples.size(), begin + static_cast<std::size_t>(settings.train.batch_size));
        const Tensor& first = samples[begin].image;
        Tensor batch({static_cast<std::int64_t>(end - begin), first.dim(0), first.dim(1), first.dim(2)});
        for (std::size_t i = begin; i < end; ++i) {
            std::copy(samples[i].image.data.begin(), samples[i].image.data.end(),
                      batch.data.begin() +
                          static_cast<std::int64_t>(i - begin) * first.dim(0) * first.dim(1) * first.dim(2));
        }
        std::vector<Prediction> preds = predict(net, batch);
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const SliceSample& s = samples[begin + i];
            PredictLine line;
            line.id = s.patient_id + ":" + std::to_string(s.slice_index);
            line.label = preds[i].label;
            line.probability = preds[i].probability;
            lines.push_back(line);
            if (emit)
                emit(line.id + "," + label_token(line.label) + "," + fmt_float32(line.probability));
        }
    }
    return lines;
}

} // namespace codelnet
