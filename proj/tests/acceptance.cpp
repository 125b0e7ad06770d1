// Acceptance suite: one test case per release criterion, each printing a
// single PASS/FAIL line. Training-based criteria run the real pipeline on
// freshly generated phantom data at desk scale.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "codelnet/gradcheck.hpp"
#include "codelnet/pipeline.hpp"
#include "codelnet/rng.hpp"
#include "e2e_oracle.hpp"

using namespace codelnet;
namespace fs = std::filesystem;

namespace {

std::string root_dir() {
    static std::string root;
    if (root.empty()) {
        root = (fs::temp_directory_path() / ("codelnet_acceptance_" + std::to_string(::getpid()))).string();
        fs::create_directories(root);
    }
    return root;
}

void verdict(int criterion, const std::string& name, bool pass) {
    std::printf("ACCEPTANCE %d (%s): %s\n", criterion, name.c_str(), pass ? "PASS" : "FAIL");
    std::fflush(stdout);
}

struct RunResult {
    float train_acc = 0.0f;
    double test_acc = 0.0;
    double seconds = 0.0;
    std::size_t epochs = 0;
    bool finite = true;
};

// desk-scale pipeline run: generate (cached), train, evaluate on the held-out split
RunResult desk_run(const PhantomConfig& phantom, const OptionMap& overrides, std::uint64_t master_seed,
                   const std::string& tag) {
    const std::string data_dir = root_dir() + "/data_" + tag + "_" + std::to_string(phantom.seed);
    if (!fs::exists(data_dir + "/manifest.csv")) generate_phantom(phantom, data_dir);

    OptionMap options = overrides;
    options["seed"] = std::to_string(master_seed);
    options["manifest"] = data_dir + "/manifest.csv";
    options["out"] = root_dir() + "/run_" + tag + "_" + std::to_string(master_seed);
    RunSettings settings = resolve_settings(options);

    const auto t0 = std::chrono::steady_clock::now();
    TrainOutcome outcome = run_train(settings);
    const auto t1 = std::chrono::steady_clock::now();

    RunSettings eval_settings = settings;
    eval_settings.weights_path = outcome.weights_path;
    EvalOutcome eval = run_evaluate(eval_settings);

    RunResult r;
    r.train_acc = outcome.logs.back().train_acc;
    r.test_acc = eval.metrics.accuracy;
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    r.epochs = outcome.logs.size();
    for (const auto& log : outcome.logs) {
        r.finite = r.finite && std::isfinite(log.train_loss) && std::isfinite(log.val_loss);
    }
    return r;
}

PhantomConfig learning_phantom(std::uint64_t seed) {
    PhantomConfig ph; // 60 patients, canvas 64, full-strength textural cue
    ph.patients_per_class = 30;
    ph.canvas = 64;
    ph.tumor_radius_min = 9.0;
    ph.tumor_radius_max = 14.0;
    ph.signal_strength = 1.0;
    ph.noise_level = 0.1;
    ph.seed = seed * 1000 + 17;
    return ph;
}

OptionMap learning_options(const std::string& optimizer) {
    OptionMap o;
    o["channels"] = "both";
    o["canvas"] = "64";
    o["filters"] = "16";
    o["fc"] = "64";
    o["optimizer"] = optimizer;
    o["base_lr"] = "0.005";
    o["batch_size"] = "16";
    o["epochs"] = "30";
    o["augment_fold"] = "0";
    o["test_per_class"] = "15";
    return o;
}

PhantomConfig overfit_phantom(std::uint64_t seed) {
    PhantomConfig ph; // 26 patients, canvas 32, weak cue, heavy noise
    ph.patients_per_class = 13;
    ph.canvas = 32;
    ph.tumor_radius_min = 4.0;
    ph.tumor_radius_max = 6.0;
    ph.signal_strength = 0.5;
    ph.noise_level = 0.3;
    ph.seed = seed * 1000 + 29;
    return ph;
}

OptionMap overfit_options(int k, int epochs) {
    OptionMap o;
    o["channels"] = "both";
    o["canvas"] = "32";
    o["filters"] = "8";
    o["fc"] = "32";
    o["optimizer"] = "sgd";
    o["base_lr"] = "0.005";
    o["batch_size"] = "8";
    o["epochs"] = std::to_string(epochs);
    o["augment_fold"] = std::to_string(k);
    o["test_per_class"] = "9"; // 3 patients per class held out -> 20 training patients
    o["max_shift"] = "5";
    return o;
}

} // namespace

TEST_CASE("criterion 1: gradient correctness") {
    const auto t0 = std::chrono::steady_clock::now();

    // layer level: 64-bit, 100 seeded cases per op, max rel error < 1e-4
    const auto results = run_gradcheck_suite(2026, 100);
    bool layers_ok = results.size() == gradcheck_op_names().size();
    for (const auto& r : results) {
        INFO(r.op, " max rel error ", r.max_rel_error);
        CHECK(r.max_rel_error < 1e-4);
        layers_ok = layers_ok && r.max_rel_error < 1e-4;
    }

    // end-to-end: tiny network, 32-bit analytic gradients vs the
    // double-precision oracle, 10 seeded instances, max rel error < 1e-3
    bool e2e_ok = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        NetworkConfig cfg;
        cfg.input_channels = 1;
        cfg.canvas = 16;
        cfg.branches = {BranchSpec{{ConvStage{2, Window{5, 5}, Stride{1, 1}, Window{2, 2}}}}};
        cfg.fc_sizes = {4};
        cfg.init_seed = seed;
        Network net = build_network(cfg);
        Rng rng(900 + seed);
        Tensor batch({2, 1, 16, 16});
        for (auto& v : batch.data) v = static_cast<float>(rng.range(-1.0, 1.0));
        std::vector<int> labels = {static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))};
        const auto check = testing::e2e_gradient_check(net, batch, labels);
        INFO("e2e seed ", seed, " max rel error ", check.max_rel_error);
        CHECK(check.max_rel_error < 1e-3);
        e2e_ok = e2e_ok && check.max_rel_error < 1e-3;
    }

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    INFO("runtime ", seconds, " s");
    CHECK(seconds < 60.0);
    verdict(1, "gradient correctness", layers_ok && e2e_ok && seconds < 60.0);
}

TEST_CASE("criterion 2: metric arithmetic") {
    ConfusionMatrix cm;
    cm.tp = 42;
    cm.fn = 3;
    cm.tn = 37;
    cm.fp = 8;
    const Metrics m = evaluate_metrics(cm);
    const bool pass = std::abs(m.sensitivity - 0.9333) < 0.001 && std::abs(m.specificity - 0.8222) < 0.001 &&
                      std::abs(m.accuracy - 0.8778) < 0.001;
    CHECK(std::abs(m.sensitivity * 100.0 - 93.33) < 0.1);
    CHECK(std::abs(m.specificity * 100.0 - 82.22) < 0.1);
    CHECK(std::abs(m.accuracy * 100.0 - 87.78) < 0.1);
    verdict(2, "metric arithmetic", pass);
}

TEST_CASE("criterion 3: schedule and stopping") {
    const bool lr_ok = lr_schedule(0, 0.001f, 50) == 0.001f && lr_schedule(50, 0.001f, 50) == 0.0005f &&
                       lr_schedule(120, 0.001f, 50) == 0.00025f;
    CHECK(lr_ok);

    const std::vector<float> plateau(11, 0.5f);
    std::vector<float> swing;
    for (int i = 0; i < 30; ++i) swing.push_back(i % 2 ? 0.55f : 0.5f);
    const bool stop_ok = early_stop(plateau, 0.02f, 10) && !early_stop(swing, 0.02f, 10);
    CHECK(stop_ok);
    verdict(3, "schedule and stopping", lr_ok && stop_ok);
}

TEST_CASE("criterion 4: phantom learning") {
    int passed_seeds = 0;
    bool time_ok = true;
    for (std::uint64_t seed : {1, 2, 3, 4}) {
        RunResult r = desk_run(learning_phantom(seed), learning_options("sgd"), seed, "learn");
        INFO("seed ", seed, ": test acc ", r.test_acc, " in ", r.epochs, " epochs, ", r.seconds, " s");
        std::printf("  criterion 4 seed %llu: test_acc=%.3f epochs=%zu time=%.1fs\n",
                    static_cast<unsigned long long>(seed), r.test_acc, r.epochs, r.seconds);
        if (r.test_acc >= 0.95) ++passed_seeds;
        time_ok = time_ok && r.seconds < 300.0;
        CHECK(r.seconds < 300.0);
    }
    CHECK(passed_seeds >= 3);
    verdict(4, "phantom learning", passed_seeds >= 3 && time_ok);
}

TEST_CASE("criterion 5: overfitting vs augmentation") {
    double train_k0 = 0.0, gap_k0 = 0.0, gap_k30 = 0.0;
    for (std::uint64_t seed : {1, 2, 3, 4}) {
        RunResult base = desk_run(overfit_phantom(seed), overfit_options(0, 40), seed, "overfit");
        RunResult aug = desk_run(overfit_phantom(seed), overfit_options(30, 20), seed, "overfit");
        std::printf("  criterion 5 seed %llu: k0 train=%.3f test=%.3f | k30 train=%.3f test=%.3f\n",
                    static_cast<unsigned long long>(seed), static_cast<double>(base.train_acc), base.test_acc,
                    static_cast<double>(aug.train_acc), aug.test_acc);
        train_k0 += static_cast<double>(base.train_acc) / 4.0;
        gap_k0 += std::max(0.0, static_cast<double>(base.train_acc) - base.test_acc) / 4.0;
        gap_k30 += std::max(0.0, static_cast<double>(aug.train_acc) - aug.test_acc) / 4.0;
    }
    std::printf("  criterion 5 averages: train_k0=%.3f gap_k0=%.3f gap_k30=%.3f\n", train_k0, gap_k0, gap_k30);
    CHECK(train_k0 >= 0.99);
    CHECK(gap_k0 >= 0.10);
    CHECK(gap_k30 <= 0.5 * gap_k0);
    verdict(5, "overfitting vs augmentation", train_k0 >= 0.99 && gap_k0 >= 0.10 && gap_k30 <= 0.5 * gap_k0);
}

TEST_CASE("criterion 6: optimizer quartet") {
    bool pass = true;
    for (const std::string optimizer : {"sgd", "rmsprop", "adadelta", "adam"}) {
        RunResult r = desk_run(learning_phantom(1), learning_options(optimizer), 1, "quartet_" + optimizer);
        std::printf("  criterion 6 %s: test_acc=%.3f finite=%d\n", optimizer.c_str(), r.test_acc,
                    r.finite ? 1 : 0);
        INFO(optimizer, " test acc ", r.test_acc);
        CHECK(r.finite);
        CHECK(r.test_acc >= 0.85);
        pass = pass && r.finite && r.test_acc >= 0.85;
    }
    verdict(6, "optimizer quartet", pass);
}

TEST_CASE("criterion 7: determinism") {
    const std::string data_dir = root_dir() + "/data_determinism";
    PhantomConfig ph = overfit_phantom(3);
    if (!fs::exists(data_dir + "/manifest.csv")) generate_phantom(ph, data_dir);

    auto run_once = [&](const std::string& out) {
        OptionMap o = overfit_options(2, 3); // augmentation on, to cover the full random pipeline
        o["seed"] = "11";
        o["manifest"] = data_dir + "/manifest.csv";
        o["out"] = out;
        run_train(resolve_settings(o));
    };
    const std::string out_a = root_dir() + "/det_a";
    const std::string out_b = root_dir() + "/det_b";
    run_once(out_a);
    run_once(out_b);

    auto bytes = [](const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    };
    const bool logs_equal = bytes(out_a + "/epochs.csv") == bytes(out_b + "/epochs.csv");
    const bool weights_equal = bytes(out_a + "/weights.cdw") == bytes(out_b + "/weights.cdw");
    CHECK(logs_equal);
    CHECK(weights_equal);
    CHECK(bytes(out_a + "/epochs.csv").size() > 0);
    verdict(7, "determinism", logs_equal && weights_equal);
}

TEST_CASE("criterion 8: pipeline counts") {
    // clinical-scale pool: 477 slices, test 45+45 held out, 126 per class drawn
    Manifest m;
    for (int p = 0; p < 102; ++p) {
        for (int s = 0; s < 3; ++s)
            m.records.push_back(SliceRecord{"N" + std::to_string(p), s, 0, "", "", ""});
    }
    for (int p = 0; p < 57; ++p) {
        for (int s = 0; s < 3; ++s)
            m.records.push_back(SliceRecord{"C" + std::to_string(p), s, 1, "", "", ""});
    }
    SplitSpec spec;
    spec.test_per_class = 45;
    spec.grouping = Grouping::patient;
    spec.seed = 1;
    Split split = split_dataset(m, spec);
    const auto sampled = balanced_sample(split.pool, 126, 0, 1);
    const bool counts_ok = split.pool.size() == 387 && sampled.size() == 252;
    CHECK(split.pool.size() == 387);
    CHECK(sampled.size() == 252);

    // 30-fold augmentation of the 252 records gives 7560 samples
    std::vector<SliceSample> canonical;
    Rng rng(5);
    for (std::size_t i = 0; i < sampled.size(); ++i) {
        SliceSample s;
        s.image = Tensor({1, 16, 16});
        for (auto& v : s.image.data) v = static_cast<float>(rng.range(-1.0, 1.0));
        s.label = sampled[i].label;
        canonical.push_back(std::move(s));
    }
    AugmentParams params;
    params.max_shift = 4;
    const auto epoch_set = build_epoch_training_set(canonical, 30, 0, 1, params);
    CHECK(epoch_set.size() == 7560);
    verdict(8, "pipeline counts", counts_ok && epoch_set.size() == 7560);
}

TEST_CASE("criterion 9: format roundtrips") {
    const std::string dir = root_dir() + "/formats";
    fs::create_directories(dir);
    Rng rng(31415);
    bool pass = true;

    // 800 randomized tensor files
    for (int c = 0; c < 800; ++c) {
        const int rank = static_cast<int>(rng.range_int(1, 4));
        std::vector<std::int64_t> shape;
        for (int i = 0; i < rank; ++i) shape.push_back(rng.range_int(1, 6));
        Tensor t(shape);
        for (auto& v : t.data) v = static_cast<float>(rng.normal() * std::exp(rng.range(-20.0, 20.0)));
        const std::string path = dir + "/t.tsr";
        write_tensor_file(t, path);
        Tensor back = read_tensor_file(path);
        pass = pass && back.shape == t.shape && back.data == t.data;
    }
    CHECK(pass);

    // 200 randomized weight files over varying architectures
    bool weights_pass = true;
    for (int c = 0; c < 200; ++c) {
        NetworkConfig cfg;
        cfg.input_channels = rng.coin() ? 1 : 2;
        cfg.canvas = 8 + 2 * rng.range_int(0, 4);
        const std::int64_t kernel = rng.range_int(2, 4);
        cfg.branches = {BranchSpec{{ConvStage{rng.range_int(1, 3), Window{kernel, kernel}, Stride{1, 1},
                                              Window{2, 2}}}}};
        cfg.fc_sizes = {rng.range_int(1, 6)};
        cfg.init_seed = rng.next_u64();
        Network net = build_network(cfg);
        const std::string path = dir + "/w.cdw";
        save_weights(net, path);
        Network back = load_weights(path, cfg);
        for (std::size_t i = 0; i < net.parameters.size(); ++i) {
            weights_pass = weights_pass && back.parameters[i].tensor.data == net.parameters[i].tensor.data;
        }
    }
    CHECK(weights_pass);

    // corrupted headers are rejected with the specified errors
    bool guards = true;
    {
        std::ofstream os(dir + "/bad.tsr", std::ios::binary);
        os << "XXXXrest";
    }
    try {
        read_tensor_file(dir + "/bad.tsr");
        guards = false;
    } catch (const Error& e) {
        guards = guards && e.code() == ErrorCode::io;
    }
    {
        NetworkConfig cfg;
        cfg.input_channels = 1;
        cfg.canvas = 8;
        cfg.branches = {BranchSpec{{ConvStage{1, Window{3, 3}, Stride{1, 1}, std::nullopt}}}};
        cfg.fc_sizes = {2};
        Network net = build_network(cfg);
        save_weights(net, dir + "/w2.cdw");
        fs::resize_file(dir + "/w2.cdw", 9);
        try {
            load_weights(dir + "/w2.cdw", cfg);
            guards = false;
        } catch (const Error& e) {
            guards = guards && e.code() == ErrorCode::io;
        }
        std::ofstream os(dir + "/w3.cdw", std::ios::binary);
        os << "WXYZ";
        os.close();
        try {
            load_weights(dir + "/w3.cdw", cfg);
            guards = false;
        } catch (const Error& e) {
            guards = guards && e.code() == ErrorCode::io;
        }
    }
    CHECK(guards);
    verdict(9, "format roundtrips", pass && weights_pass && guards);
}

TEST_CASE("cleanup") {
    std::error_code ec;
    fs::remove_all(root_dir(), ec);
    CHECK(!ec);
}
