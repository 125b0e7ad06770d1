#include "codelnet/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "codelnet/errors.hpp"

namespace codelnet {

void AugmentParams::validate(std::int64_t canvas) const {
    if (max_shift < 0 || max_shift >= canvas / 2)
        throw invalid_argument_error("augment: max_shift " + std::to_string(max_shift) +
                                     " must lie in [0, canvas/2) for canvas " + std::to_string(canvas));
    if (max_rotation < 0.0 || max_rotation > 180.0)
        throw invalid_argument_error("augment: max_rotation must lie in [0, 180]");
    if (flip_probability < 0.0 || flip_probability > 1.0)
        throw invalid_argument_error("augment: flip probability must lie in [0, 1]");
}

ChannelMode channel_mode_from_string(const std::string& s) {
    if (s == "t1c") return ChannelMode::t1c;
    if (s == "t2") return ChannelMode::t2;
    if (s == "both") return ChannelMode::both;
    throw invalid_argument_error("channels must be t1c|t2|both, got '" + s + "'");
}

const char* channel_mode_token(ChannelMode mode) {
    switch (mode) {
        case ChannelMode::t1c: return "t1c";
        case ChannelMode::t2: return "t2";
        default: return "both";
    }
}

int channel_count(ChannelMode mode) { return mode == ChannelMode::both ? 2 : 1; }

Tensor zscore(const Tensor& image) {
    const std::int64_t n = image.numel();
    if (n == 0) throw invalid_argument_error("zscore: empty image");
    double sum = 0.0;
    for (float v : image.data) sum += static_cast<double>(v);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (float v : image.data) {
        const double d = static_cast<double>(v) - mean;
        ss += d * d;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(n)); // population std
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw invalid_argument_error("zscore: degenerate image (sigma = 0 or non-finite)");
    Tensor out;
    out.shape = image.shape;
    out.data.resize(image.data.size());
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        out.data[i] = static_cast<float>((static_cast<double>(image.data[i]) - mean) / sigma);
    }
    return out;
}

namespace {

void require_binary(const Tensor& mask, const char* op) {
    for (float v : mask.data) {
        if (v != 0.0f && v != 1.0f)
            throw invalid_argument_error(std::string(op) + ": mask must be binary (values in {0,1})");
    }
}

} // namespace

Tensor dilate_mask(const Tensor& mask, int radius) {
    if (mask.rank() != 2) throw invalid_argument_error("dilate_mask: mask must be rank 2 [H,W]");
    if (radius < 0) throw invalid_argument_error("dilate_mask: radius must be >= 0");
    require_binary(mask, "dilate_mask");
    const std::int64_t h = mask.dim(0), w = mask.dim(1);
    Tensor cur = mask;
    Tensor next;
    next.shape = mask.shape;
    next.data.resize(mask.data.size());
    for (int it = 0; it < radius; ++it) {
        for (std::int64_t r = 0; r < h; ++r) {
            for (std::int64_t c = 0; c < w; ++c) {
                float v = 0.0f;
                for (std::int64_t dr = -1; dr <= 1 && v == 0.0f; ++dr) {
                    for (std::int64_t dc = -1; dc <= 1; ++dc) {
                        const std::int64_t rr = r + dr, cc = c + dc;
                        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                        if (cur.data[static_cast<std::size_t>(rr * w + cc)] == 1.0f) {
                            v = 1.0f;
                            break;
                        }
                    }
                }
                next.data[static_cast<std::size_t>(r * w + c)] = v;
            }
        }
        std::swap(cur.data, next.data);
    }
    return cur;
}

Tensor mask_and_embed(const std::vector<Tensor>& channels, const Tensor& mask, std::int64_t canvas) {
    if (channels.empty()) throw invalid_argument_error("mask_and_embed: no channels");
    if (mask.rank() != 2) throw invalid_argument_error("mask_and_embed: mask must be rank 2 [H,W]");
    require_binary(mask, "mask_and_embed");
    for (const Tensor& ch : channels) {
        if (ch.shape != mask.shape)
            throw dimension_error("mask_and_embed: channel shape " + Tensor::shape_string(ch.shape) +
                                  " != mask shape " + Tensor::shape_string(mask.shape));
    }
    const std::int64_t h = mask.dim(0), w = mask.dim(1);
    std::int64_t r0 = h, r1 = -1, c0 = w, c1 = -1;
    for (std::int64_t r = 0; r < h; ++r) {
        for (std::int64_t c = 0; c < w; ++c) {
            if (mask.data[static_cast<std::size_t>(r * w + c)] == 1.0f) {
                r0 = std::min(r0, r);
                r1 = std::max(r1, r);
                c0 = std::min(c0, c);
                c1 = std::max(c1, c);
            }
        }
    }
    if (r1 < 0) throw invalid_argument_error("mask_and_embed: mask is empty");
    const std::int64_t eh = r1 - r0 + 1, ew = c1 - c0 + 1;
    if (eh > canvas || ew > canvas)
        throw invalid_argument_error("mask_and_embed: tumor extent " + std::to_string(eh) + "x" +
                                     std::to_string(ew) + " exceeds canvas " + std::to_string(canvas));
    const std::int64_t off_r = (canvas - eh) / 2;
    const std::int64_t off_c = (canvas - ew) / 2;

    Tensor out({static_cast<std::int64_t>(channels.size()), canvas, canvas});
    for (std::size_t ch = 0; ch < channels.size(); ++ch) {
        float* dst = out.data.data() + static_cast<std::int64_t>(ch) * canvas * canvas;
        const float* src = channels[ch].data.data();
        const float* m = mask.data.data();
        for (std::int64_t r = r0; r <= r1; ++r) {
            for (std::int64_t c = c0; c <= c1; ++c) {
                if (m[r * w + c] == 1.0f) {
                    dst[(off_r + r - r0) * canvas + (off_c + c - c0)] = src[r * w + c];
                }
            }
        }
    }
    return out;
}

AugmentDraw draw_augment(const AugmentParams& params, Rng& rng) {
    AugmentDraw d;
    d.dx = static_cast<int>(rng.range_int(-params.max_shift, params.max_shift));
    d.dy = static_cast<int>(rng.range_int(-params.max_shift, params.max_shift));
    d.angle_deg = rng.range(-params.max_rotation, params.max_rotation);
    d.flip_h = rng.next_double() < params.flip_probability;
    d.flip_v = rng.next_double() < params.flip_probability;
    return d;
}

namespace {

// inverse-map rotation about the canvas center, bilinear, zero fill
void rotate_plane(const float* src, float* dst, std::int64_t h, std::int64_t w, double angle_deg) {
    const double rad = angle_deg * 0.017453292519943295;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = static_cast<double>(h - 1) / 2.0;
    const double cx = static_cast<double>(w - 1) / 2.0;
    for (std::int64_t r = 0; r < h; ++r) {
        const double y = static_cast<double>(r) - cy;
        for (std::int64_t c = 0; c < w; ++c) {
            const double x = static_cast<double>(c) - cx;
            const double xs = cs * x + sn * y + cx;
            const double ys = -sn * x + cs * y + cy;
            const double xf = std::floor(xs), yf = std::floor(ys);
            const std::int64_t x0 = static_cast<std::int64_t>(xf), y0 = static_cast<std::int64_t>(yf);
            const double wx = xs - xf, wy = ys - yf;
            double v = 0.0;
            for (int dy = 0; dy <= 1; ++dy) {
                for (int dx = 0; dx <= 1; ++dx) {
                    const std::int64_t yy = y0 + dy, xx = x0 + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    const double weight = (dx ? wx : 1.0 - wx) * (dy ? wy : 1.0 - wy);
                    v += weight * static_cast<double>(src[yy * w + xx]);
                }
            }
            dst[r * w + c] = static_cast<float>(v);
        }
    }
}

void translate_plane(const float* src, float* dst, std::int64_t h, std::int64_t w, int dx, int dy) {
    for (std::int64_t r = 0; r < h; ++r) {
        const std::int64_t sr = r - dy;
        for (std::int64_t c = 0; c < w; ++c) {
            const std::int64_t sc = c - dx;
            dst[r * w + c] =
                (sr >= 0 && sr < h && sc >= 0 && sc < w) ? src[sr * w + sc] : 0.0f;
        }
    }
}

void flip_plane(const float* src, float* dst, std::int64_t h, std::int64_t w, bool flip_h, bool flip_v) {
    for (std::int64_t r = 0; r < h; ++r) {
        const std::int64_t sr = flip_v ? h - 1 - r : r;
        for (std::int64_t c = 0; c < w; ++c) {
            const std::int64_t sc = flip_h ? w - 1 - c : c;
            dst[r * w + c] = src[sr * w + sc];
        }
    }
}

} // namespace

Tensor apply_augment(const Tensor& image, const AugmentDraw& draw) {
    if (image.rank() != 3) throw invalid_argument_error("apply_augment: image must be rank 3 [C,H,W]");
    const std::int64_t ch = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor out;
    out.shape = image.shape;
    out.data.resize(image.data.size());
    std::vector<float> tmp(static_cast<std::size_t>(h * w));
    for (std::int64_t c = 0; c < ch; ++c) {
        const float* src = image.data.data() + c * h * w;
        float* dst = out.data.data() + c * h * w;
        rotate_plane(src, tmp.data(), h, w, draw.angle_deg);
        std::vector<float> tmp2(static_cast<std::size_t>(h * w));
        translate_plane(tmp.data(), tmp2.data(), h, w, draw.dx, draw.dy);
        flip_plane(tmp2.data(), dst, h, w, draw.flip_h, draw.flip_v);
    }
    return out;
}

SliceSample augment_sample(const SliceSample& sample, const AugmentParams& params, Rng& rng,
                           const std::string& tag) {
    params.validate(sample.image.dim(1));
    SliceSample out;
    out.image = apply_augment(sample.image, draw_augment(params, rng));
    out.label = sample.label;
    out.patient_id = sample.patient_id;
    out.slice_index = sample.slice_index;
    out.augmentation_tag = tag;
    return out;
}

namespace {

void shuffle_samples(std::vector<SliceSample>& samples, Rng& rng) {
    for (std::size_t i = samples.size(); i > 1; --i) {
        std::swap(samples[i - 1], samples[static_cast<std::size_t>(rng.below(i))]);
    }
}

} // namespace

std::vector<SliceSample> build_epoch_training_set(const std::vector<SliceSample>& records, int k,
                                                  std::int64_t epoch, std::uint64_t master_seed,
                                                  const AugmentParams& params) {
    if (k < 0) throw invalid_argument_error("augmentation fold must be >= 0");
    std::vector<SliceSample> out;
    if (k == 0) {
        out = records;
    } else {
        out.reserve(records.size() * static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < records.size(); ++i) {
            for (int j = 0; j < k; ++j) {
                Rng rng = rng_stream(master_seed, {0xa06ULL, static_cast<std::uint64_t>(epoch),
                                                   static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
                const std::string tag =
                    "e" + std::to_string(epoch) + ".s" + std::to_string(i) + ".c" + std::to_string(j);
                out.push_back(augment_sample(records[i], params, rng, tag));
            }
        }
    }
    Rng shuffle_rng = rng_stream(master_seed, {0x5f0ff1eULL, static_cast<std::uint64_t>(epoch)});
    shuffle_samples(out, shuffle_rng);
    return out;
}

SliceSample canonicalize(const Manifest& manifest, const SliceRecord& record, ChannelMode mode,
                         std::int64_t canvas) {
    std::vector<Tensor> channels;
    if (mode == ChannelMode::t1c || mode == ChannelMode::both)
        channels.push_back(zscore(read_tensor_file(resolve_record_path(manifest, record.t1c_path))));
    if (mode == ChannelMode::t2 || mode == ChannelMode::both)
        channels.push_back(zscore(read_tensor_file(resolve_record_path(manifest, record.t2_path))));
    Tensor mask = read_tensor_file(resolve_record_path(manifest, record.mask_path));
    Tensor dilated = dilate_mask(mask, 5);

    SliceSample sample;
    sample.image = mask_and_embed(channels, dilated, canvas);
    sample.label = record.label;
    sample.patient_id = record.patient_id;
    sample.slice_index = record.slice_index;
    sample.augmentation_tag = "orig";
    return sample;
}

std::vector<SliceSample> canonicalize_all(const Manifest& manifest, const std::vector<SliceRecord>& records,
                                          ChannelMode mode, std::int64_t canvas) {
    std::vector<SliceSample> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(canonicalize(manifest, r, mode, canvas));
    return out;
}

} // namespace codelnet
