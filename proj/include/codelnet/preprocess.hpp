#ifndef CODELNET_PREPROCESS_HPP
#define CODELNET_PREPROCESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "codelnet/data.hpp"
#include "codelnet/rng.hpp"
#include "codelnet/tensor.hpp"

namespace codelnet {

// A slice in canonical network-ready form: channels z-scored, masked,
// centered on a zero canvas.
struct SliceSample {
    Tensor image; // [C, canvas, canvas]
    int label = 0;
    std::string patient_id;
    int slice_index = 0;
    std::string augmentation_tag; // "orig" or "e<epoch>.s<sample>.c<copy>"
};

struct AugmentParams {
    int max_shift = 20;          // pixels, per axis
    double max_rotation = 20.0;  // degrees
    double flip_probability = 0.5;

    void validate(std::int64_t canvas) const;
};

enum class ChannelMode { t1c, t2, both };
ChannelMode channel_mode_from_string(const std::string& s);
const char* channel_mode_token(ChannelMode mode);
int channel_count(ChannelMode mode);

// z = (X - mu) / sigma with whole-image population statistics; constant
// images are degenerate input.
Tensor zscore(const Tensor& image);

// `radius` iterations of 3x3 8-connected binary dilation (Chebyshev ball),
// clipped at the borders.
Tensor dilate_mask(const Tensor& mask, int radius = 5);

// Zeroes each channel outside the (dilated) mask, crops to the mask bounding
// box and centers the crop on a zero canvas; all channels share placement.
Tensor mask_and_embed(const std::vector<Tensor>& channels, const Tensor& mask, std::int64_t canvas);

struct AugmentDraw {
    int dx = 0;
    int dy = 0;
    double angle_deg = 0.0;
    bool flip_h = false;
    bool flip_v = false;
};

AugmentDraw draw_augment(const AugmentParams& params, Rng& rng);

// rotation (bilinear, zero fill, about the canvas center), then integer
// translation, then flips; one draw applied to every channel
Tensor apply_augment(const Tensor& image, const AugmentDraw& draw);

SliceSample augment_sample(const SliceSample& sample, const AugmentParams& params, Rng& rng,
                           const std::string& tag);

// k = 0: the originals, shuffled. k >= 1: k independently augmented copies
// per record, shuffled; draws derive from (master_seed, epoch, sample, copy).
std::vector<SliceSample> build_epoch_training_set(const std::vector<SliceSample>& records, int k,
                                                  std::int64_t epoch, std::uint64_t master_seed,
                                                  const AugmentParams& params);

// Full canonical pipeline for one record: load tensors, z-score the selected
// channels, dilate the mask, embed on the canvas.
SliceSample canonicalize(const Manifest& manifest, const SliceRecord& record, ChannelMode mode,
                         std::int64_t canvas);
std::vector<SliceSample> canonicalize_all(const Manifest& manifest, const std::vector<SliceRecord>& records,
                                          ChannelMode mode, std::int64_t canvas);

} // namespace codelnet

#endif
