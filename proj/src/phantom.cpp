#include "codelnet/phantom.hpp"

#include <cmath>
#include <filesystem>

#include "codelnet/errors.hpp"
#include "codelnet/rng.hpp"

namespace fs = std::filesystem;

namespace codelnet {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kBoundaryWobble = 0.18; // relative radius modulation at full signal
constexpr double kStripeAmplitude = 0.55;
constexpr int kDilationHeadroom = 5; // preprocess dilates masks by 5

struct PatientGeometry {
    double cx, cy;     // ellipse center
    double ra, rb;     // semi-axes
    double tilt;       // ellipse orientation
    double wobble_phase;
    double stripe_dir;
    double stripe_wavelength;
    double stripe_phase[2]; // per channel
};

} // namespace

void PhantomConfig::validate() const {
    if (patients_per_class < 1) throw invalid_argument_error("phantom: patients per class must be >= 1");
    if (slices_per_patient < 1) throw invalid_argument_error("phantom: slices per patient must be >= 1");
    if (canvas < 8) throw invalid_argument_error("phantom: canvas must be >= 8");
    if (!(tumor_radius_min > 0.0) || tumor_radius_max < tumor_radius_min)
        throw invalid_argument_error("phantom: bad tumor radius range");
    if (signal_strength < 0.0 || signal_strength > 1.0)
        throw invalid_argument_error("phantom: signal strength must lie in [0,1]");
    if (noise_level < 0.0) throw invalid_argument_error("phantom: noise level must be >= 0");
    const double margin =
        tumor_radius_max * (1.0 + kBoundaryWobble) + kDilationHeadroom + 3.0;
    if (2.0 * margin >= static_cast<double>(canvas))
        throw invalid_argument_error("phantom: tumor radius " + std::to_string(tumor_radius_max) +
                                     " exceeds canvas headroom (canvas " + std::to_string(canvas) + ")");
}

Manifest generate_phantom(const PhantomConfig& config, const std::string& out_dir) {
    config.validate();
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "tensors", ec);
    if (ec) throw io_error("phantom: cannot create output directory " + out_dir + ": " + ec.message());

    Manifest manifest;
    manifest.root = out_dir;

    const std::int64_t n = config.canvas;
    const double margin = config.tumor_radius_max * (1.0 + kBoundaryWobble) + kDilationHeadroom + 3.0;

    for (int cls = 0; cls <= 1; ++cls) {
        for (int pat = 0; pat < config.patients_per_class; ++pat) {
            Rng rng = rng_stream(config.seed, {0x9a117ULL, static_cast<std::uint64_t>(cls),
                                               static_cast<std::uint64_t>(pat)});
            PatientGeometry geo;
            geo.cx = rng.range(margin, static_cast<double>(n) - 1.0 - margin);
            geo.cy = rng.range(margin, static_cast<double>(n) - 1.0 - margin);
            geo.ra = rng.range(config.tumor_radius_min, config.tumor_radius_max);
            geo.rb = rng.range(config.tumor_radius_min, config.tumor_radius_max);
            geo.tilt = rng.range(0.0, kTwoPi);
            geo.wobble_phase = rng.range(0.0, kTwoPi);
            geo.stripe_dir = rng.range(0.0, kTwoPi);
            geo.stripe_wavelength = rng.range(6.0, 9.0);
            geo.stripe_phase[0] = rng.range(0.0, kTwoPi);
            geo.stripe_phase[1] = rng.range(0.0, kTwoPi);

            const std::string pid = (cls == 1 ? "C" : "N") + std::to_string(pat + 100).substr(1);

            for (int s = 0; s < config.slices_per_patient; ++s) {
                const double cx = geo.cx + rng.range(-1.5, 1.5);
                const double cy = geo.cy + rng.range(-1.5, 1.5);
                const double ra = std::max(2.0, geo.ra + rng.range(-0.8, 0.8));
                const double rb = std::max(2.0, geo.rb + rng.range(-0.8, 0.8));
                const double tilt = geo.tilt + rng.range(-0.1, 0.1);
                const double wobble = kBoundaryWobble * config.signal_strength * (cls == 1 ? 1.0 : 0.0);

                Tensor mask({n, n});
                for (std::int64_t r = 0; r < n; ++r) {
                    for (std::int64_t c = 0; c < n; ++c) {
                        const double x = static_cast<double>(c) - cx;
                        const double y = static_cast<double>(r) - cy;
                        const double xr = std::cos(tilt) * x + std::sin(tilt) * y;
                        const double yr = -std::sin(tilt) * x + std::cos(tilt) * y;
                        const double u = xr / ra, v = yr / rb;
                        const double rho = std::sqrt(u * u + v * v);
                        const double phi = std::atan2(v, u);
                        const double edge = 1.0 + wobble * std::sin(5.0 * phi + geo.wobble_phase);
                        mask.data[static_cast<std::size_t>(r * n + c)] = rho <= edge ? 1.0f : 0.0f;
                    }
                }

                Tensor channels[2] = {Tensor({n, n}), Tensor({n, n})};
                const double stripe_amp = kStripeAmplitude * config.signal_strength * (cls == 1 ? 1.0 : 0.0);
                const double kx = std::cos(geo.stripe_dir) * kTwoPi / geo.stripe_wavelength;
                const double ky = std::sin(geo.stripe_dir) * kTwoPi / geo.stripe_wavelength;
                for (std::int64_t r = 0; r < n; ++r) {
                    for (std::int64_t c = 0; c < n; ++c) {
                        if (mask.data[static_cast<std::size_t>(r * n + c)] != 1.0f) continue;
                        for (int ch = 0; ch < 2; ++ch) {
                            const double stripes =
                                stripe_amp *
                                std::sin(kx * static_cast<double>(c) + ky * static_cast<double>(r) +
                                         geo.stripe_phase[ch]);
                            const double value =
                                1.0 * (1.0 + stripes) + config.noise_level * rng.normal();
                            channels[ch].data[static_cast<std::size_t>(r * n + c)] =
                                static_cast<float>(value);
                        }
                    }
                }

                SliceRecord rec;
                rec.patient_id = pid;
                rec.slice_index = s;
                rec.label = cls;
                const std::string stem = "tensors/" + pid + "_s" + std::to_string(s);
                rec.t1c_path = stem + "_t1c.tsr";
                rec.t2_path = stem + "_t2.tsr";
                rec.mask_path = stem + "_mask.tsr";
                write_tensor_file(channels[0], (fs::path(out_dir) / rec.t1c_path).string());
                write_tensor_file(channels[1], (fs::path(out_dir) / rec.t2_path).string());
                write_tensor_file(mask, (fs::path(out_dir) / rec.mask_path).string());
                manifest.records.push_back(std::move(rec));
            }
        }
    }
    write_manifest(manifest, (fs::path(out_dir) / "manifest.csv").string());
    return manifest;
}

} // namespace codelnet
