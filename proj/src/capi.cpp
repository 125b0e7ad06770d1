#include "codelnet.h"

#include <cstdio>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "codelnet/errors.hpp"
#include "codelnet/gradcheck.hpp"
#include "codelnet/pipeline.hpp"

using namespace codelnet;

struct codelnet_options {
    OptionMap map;
};

namespace {

thread_local std::string t_last_error = "";

codelnet_status to_status(const Error& e) {
    t_last_error = e.what();
    switch (e.code()) {
        case ErrorCode::ok: return CODELNET_OK;
        case ErrorCode::check_failed: return CODELNET_ERR_CHECK;
        case ErrorCode::io: return CODELNET_ERR_IO;
        case ErrorCode::split_infeasible: return CODELNET_ERR_SPLIT;
        case ErrorCode::numeric: return CODELNET_ERR_NUMERIC;
        case ErrorCode::mismatch: return CODELNET_ERR_MISMATCH;
        default: return CODELNET_ERR_ARG;
    }
}

template <typename Fn>
codelnet_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        return to_status(e);
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return CODELNET_ERR_IO;
    } catch (...) {
        t_last_error = "unknown error";
        return CODELNET_ERR_IO;
    }
}

LineFn make_emit(codelnet_line_cb cb, void* user) {
    if (!cb) return nullptr;
    return [cb, user](const std::string& line) { cb(line.c_str(), user); };
}

RunSettings settings_from(const codelnet_options* options) {
    static const OptionMap empty;
    return resolve_settings(options ? options->map : empty);
}

} // namespace

extern "C" {

const char* codelnet_version(void) { return "1.0.0"; }

const char* codelnet_last_error(void) { return t_last_error.c_str(); }

codelnet_status codelnet_options_create(codelnet_options** out) {
    if (!out) {
        t_last_error = "options_create: out pointer is NULL";
        return CODELNET_ERR_ARG;
    }
    *out = new (std::nothrow) codelnet_options();
    if (!*out) {
        t_last_error = "options_create: allocation failed";
        return CODELNET_ERR_IO;
    }
    return CODELNET_OK;
}

void codelnet_options_destroy(codelnet_options* options) { delete options; }

codelnet_status codelnet_options_set(codelnet_options* options, const char* key, const char* value) {
    if (!options || !key || !value) {
        t_last_error = "options_set: NULL argument";
        return CODELNET_ERR_ARG;
    }
    return guarded([&]() {
        OptionMap probe = options->map;
        probe[key] = value;
        resolve_settings(probe); // validates key and value
        options->map[key] = value;
        return CODELNET_OK;
    });
}

codelnet_status codelnet_resolve_config(const codelnet_options* options, codelnet_line_cb on_line, void* user) {
    if (!on_line) {
        t_last_error = "resolve_config: callback is NULL";
        return CODELNET_ERR_ARG;
    }
    return guarded([&]() {
        const OptionMap resolved = settings_to_options(settings_from(options));
        for (const auto& [key, value] : resolved) {
            const std::string line = key + " = " + value;
            on_line(line.c_str(), user);
        }
        return CODELNET_OK;
    });
}

codelnet_status codelnet_phantom(const codelnet_options* options, const char* out_dir, char* manifest_path,
                                 size_t manifest_path_len) {
    if (!out_dir) {
        t_last_error = "phantom: out_dir is NULL";
        return CODELNET_ERR_ARG;
    }
    return guarded([&]() {
        RunSettings settings = settings_from(options);
        settings.out_dir = out_dir;
        std::string path;
        run_phantom(settings, [&](const std::string& line) { path = line; });
        if (manifest_path && manifest_path_len > 0) {
            std::strncpy(manifest_path, path.c_str(), manifest_path_len - 1);
            manifest_path[manifest_path_len - 1] = '\0';
        }
        return CODELNET_OK;
    });
}

codelnet_status codelnet_train(const codelnet_options* options, const char* manifest, const char* out_dir,
                               codelnet_line_cb on_line, void* user) {
    if (!manifest || !out_dir) {
        t_last_error = "train: manifest/out_dir is NULL";
        return CODELNET_ERR_ARG;
    }
    return guarded([&]() {
        RunSettings settings = settings_from(options);
        settings.manifest_path = manifest;
        settings.out_dir = out_dir;
        run_train(settings, make_emit(on_line, user));
        return CODELNET_OK;
    });
}

codelnet_status codelnet_evaluate(const codelnet_options* options, const char* weights, const char* manifest,
                                  const char* out_dir, codelnet_eval_result* result) {
    if (!weights || !manifest || !out_dir) {
        t_last_error = "evaluate: weights/manifest/out_dir is NULL";
        return CODELNET_ERR_ARG;
    }
    return guarded([&]() {
        RunSettings settings = settings_from(options);
        settings.weights_path = weights;
        settings.manifest_path = manifest;
        settings.out_dir = out_dir;
        EvalOutcome outcome = run_evaluate(settings, nullptr);
        if (result) {
            result->tp = outcome.cm.tp;
            result->fp = outcome.cm.fp;
            result->tn = outcome.cm.tn;
            result->fn = outcome.cm.fn;
            result->sensitivity = outcome.metrics.sensitivity;
            result->specificity = outcome.metrics.specificity;
            result->accuracy = outcome.metrics.accuracy;
        }
        return CODELNET_OK;
    });
}

codelnet_status codelnet_predict(const codelnet_options* options, const char* weights, const char* manifest,
                                 codelnet_line_cb on_line, void* user) {
    if (!weights || !manifest) {
        t_last_error = "predict: weights/manifest is NULL";
        return CODELNET_ERR_ARG;
    }
    return guarded([&]() {
        RunSettings settings = settings_from(options);
        settings.weights_path = weights;
        settings.manifest_path = manifest;
        run_predict(settings, make_emit(on_line, user));
        return CODELNET_OK;
    });
}

codelnet_status codelnet_gradcheck(const char* op_filter, double tolerance, uint64_t seed, int cases_per_op,
                                   codelnet_line_cb on_line, void* user) {
    return guarded([&]() {
        if (cases_per_op < 1) throw invalid_argument_error("gradcheck: cases_per_op must be >= 1");
        if (!(tolerance > 0.0)) throw invalid_argument_error("gradcheck: tolerance must be positive");
        const std::string filter = op_filter ? op_filter : "";
        const auto results = run_gradcheck_suite(seed, cases_per_op, filter);
        bool all_ok = true;
        std::string first_fail;
        for (const auto& r : results) {
            const bool ok = r.max_rel_error < tolerance;
            all_ok = all_ok && ok;
            if (!ok && first_fail.empty()) first_fail = r.op;
            if (on_line) {
                char buf[160];
                std::snprintf(buf, sizeof(buf), "%-12s max rel error %.3e over %d cases: %s", r.op.c_str(),
                              r.max_rel_error, r.cases, ok ? "ok" : "FAIL");
                on_line(buf, user);
            }
        }
        if (!all_ok) {
            t_last_error = "gradcheck failed for op " + first_fail;
            return CODELNET_ERR_CHECK;
        }
        return CODELNET_OK;
    });
}

} // extern "C"
