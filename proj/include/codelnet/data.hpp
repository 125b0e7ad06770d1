#ifndef CODELNET_DATA_HPP
#define CODELNET_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "codelnet/tensor.hpp"

namespace codelnet {

inline constexpr int kLabelNondeleted = 0;
inline constexpr int kLabelCodeleted = 1; // positive class

int label_from_token(const std::string& token); // "nondeleted" | "codeleted"
const char* label_token(int label);

// One labeled two-channel slice; tensor paths are relative to the manifest root.
struct SliceRecord {
    std::string patient_id;
    int slice_index = 0;
    int label = kLabelNondeleted;
    std::string t1c_path;
    std::string t2_path;
    std::string mask_path;

    std::string key() const { return patient_id + ":" + std::to_string(slice_index); }
};

struct Manifest {
    std::vector<SliceRecord> records;
    std::string root; // directory resolved against the record paths
};

// Manifest text format: one record per line,
//   patient_id,slice_index,label,t1c_path,t2_path,mask_path
// '#' starts a comment. Validates label vocabulary, (patient,slice) key
// uniqueness, file existence and shape agreement; errors carry line numbers.
Manifest parse_manifest(const std::string& path);
void write_manifest(const Manifest& manifest, const std::string& path);

std::string resolve_record_path(const Manifest& manifest, const std::string& rel);

// Tensor file: magic "TSR1", rank u32, dims u32 each, raw little-endian
// float32 data, row-major.
void write_tensor_file(const Tensor& tensor, const std::string& path);
Tensor read_tensor_file(const std::string& path);
std::vector<std::int64_t> read_tensor_shape(const std::string& path); // header only

enum class Grouping { patient, slice };
Grouping grouping_from_string(const std::string& s);

struct SplitSpec {
    int test_per_class = 9;          // slices per class held out for test
    int train_per_class = 0;         // balanced per-epoch draw per class; 0 = largest equal count
    double validation_fraction = 0.2;
    Grouping grouping = Grouping::patient;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<SliceRecord> test;
    std::vector<SliceRecord> pool;
};

// Deterministic in spec.seed. With patient grouping all slices of a patient
// land on the same side; infeasible exact counts raise a split error with
// the nearest feasible suggestion.
Split split_dataset(const Manifest& manifest, const SplitSpec& spec);

struct PoolSplit {
    std::vector<SliceRecord> train;
    std::vector<SliceRecord> validation;
};

// Carves the fixed validation set out of the pool once, before training.
PoolSplit carve_validation(const std::vector<SliceRecord>& pool, double fraction, Grouping grouping,
                           std::uint64_t seed);

// Exactly per_class records of each class, without replacement, drawn from a
// stream derived from (master_seed, epoch).
std::vector<SliceRecord> balanced_sample(const std::vector<SliceRecord>& pool, int per_class,
                                         std::int64_t epoch, std::uint64_t master_seed);

// Index-level sampler shared by the training loop.
std::vector<std::size_t> balanced_sample_indices(const std::vector<int>& labels, int per_class,
                                                 std::int64_t epoch, std::uint64_t master_seed);

std::vector<std::size_t> class_counts(const std::vector<int>& labels);

} // namespace codelnet

#endif
