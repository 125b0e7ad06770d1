#ifndef CODELNET_PHANTOM_HPP
#define CODELNET_PHANTOM_HPP

#include <cstdint>
#include <string>

#include "codelnet/data.hpp"

namespace codelnet {

// Synthetic two-channel, two-class dataset. Class 1 (codeleted) carries a
// textural cue - internal striping plus an irregular boundary - scaled by
// signal_strength; class 0 has a smooth interior. The cue is spatial, not an
// intensity shift, so a pixel-mean classifier stays near chance.
struct PhantomConfig {
    int patients_per_class = 30;
    int slices_per_patient = 3;
    std::int64_t canvas = 64;
    double tumor_radius_min = 9.0;
    double tumor_radius_max = 14.0;
    double signal_strength = 1.0; // 0 = classes statistically identical
    double noise_level = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Writes tensors under <out_dir>/tensors and the manifest at
// <out_dir>/manifest.csv; returns the manifest. Deterministic per seed.
Manifest generate_phantom(const PhantomConfig& config, const std::string& out_dir);

} // namespace codelnet

#endif
