#include "codelnet/data.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "codelnet/errors.hpp"
#include "codelnet/rng.hpp"

namespace fs = std::filesystem;

namespace codelnet {

int label_from_token(const std::string& token) {
    if (token == "nondeleted") return kLabelNondeleted;
    if (token == "codeleted") return kLabelCodeleted;
    throw io_error("unknown label token '" + token + "' (expected nondeleted|codeleted)");
}

const char* label_token(int label) {
    switch (label) {
        case kLabelNondeleted: return "nondeleted";
        case kLabelCodeleted: return "codeleted";
        default: throw invalid_argument_error("label out of range: " + std::to_string(label));
    }
}

std::string resolve_record_path(const Manifest& manifest, const std::string& rel) {
    if (rel.empty()) return rel;
    fs::path p(rel);
    if (p.is_absolute() || manifest.root.empty()) return rel;
    return (fs::path(manifest.root) / p).string();
}

// --------------------------------------------------------------------------
// tensor files

namespace {

constexpr char kTensorMagic[4] = {'T', 'S', 'R', '1'};
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4) throw io_error("tensor file truncated: " + path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

void write_tensor_file(const Tensor& tensor, const std::string& path) {
    if (tensor.rank() < 1) throw invalid_argument_error("tensor file: rank 0 tensors are not writable");
    if (tensor.rank() > static_cast<int>(kMaxRank))
        throw invalid_argument_error("tensor file: rank " + std::to_string(tensor.rank()) + " exceeds limit " +
                                     std::to_string(kMaxRank));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open tensor file for writing: " + path);
    os.write(kTensorMagic, 4);
    put_u32(os, static_cast<std::uint32_t>(tensor.rank()));
    for (std::int64_t d : tensor.shape) put_u32(os, static_cast<std::uint32_t>(d));
    for (float f : tensor.data) {
        std::uint32_t v;
        std::memcpy(&v, &f, 4);
        put_u32(os, v);
    }
    if (!os) throw io_error("failed writing tensor file: " + path);
}

std::vector<std::int64_t> read_tensor_shape(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open tensor file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kTensorMagic, 4) != 0)
        throw io_error("bad tensor magic in " + path);
    const std::uint32_t rank = get_u32(is, path);
    if (rank < 1 || rank > kMaxRank)
        throw io_error("tensor file " + path + ": rank " + std::to_string(rank) + " outside [1," +
                       std::to_string(kMaxRank) + "]");
    std::vector<std::int64_t> shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t d = get_u32(is, path);
        if (d == 0) throw io_error("tensor file " + path + ": zero dimension");
        shape.push_back(static_cast<std::int64_t>(d));
    }
    return shape;
}

Tensor read_tensor_file(const std::string& path) {
    std::vector<std::int64_t> shape = read_tensor_shape(path);
    std::ifstream is(path, std::ios::binary);
    is.seekg(static_cast<std::streamoff>(4 + 4 + 4 * shape.size()));
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    Tensor t(shape);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::uint32_t v = get_u32(is, path);
        std::memcpy(&t.data[static_cast<std::size_t>(i)], &v, 4);
    }
    char extra;
    if (is.read(&extra, 1) && is.gcount() == 1)
        throw io_error("tensor file " + path + ": payload longer than header declares");
    return t;
}

// --------------------------------------------------------------------------
// manifest

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    for (auto& f : fields) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.pop_back();
    }
    return fields;
}

} // namespace

Manifest parse_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open manifest: " + path);
    Manifest manifest;
    manifest.root = fs::path(path).parent_path().string();

    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string at = path + ":" + std::to_string(lineno) + ": ";
        std::string trimmed = line;
        while (!trimmed.empty() && (trimmed.back() == '\r' || trimmed.back() == ' ')) trimmed.pop_back();
        if (trimmed.empty() || trimmed[0] == '#') continue;

        std::vector<std::string> fields = split_fields(trimmed);
        if (fields.size() != 6)
            throw io_error(at + "expected 6 comma-separated fields, got " + std::to_string(fields.size()));

        SliceRecord rec;
        rec.patient_id = fields[0];
        try {
            rec.slice_index = std::stoi(fields[1]);
        } catch (const std::exception&) {
            throw io_error(at + "bad slice index '" + fields[1] + "'");
        }
        try {
            rec.label = label_from_token(fields[2]);
        } catch (const Error& e) {
            throw io_error(at + e.what());
        }
        rec.t1c_path = fields[3];
        rec.t2_path = fields[4];
        rec.mask_path = fields[5];

        if (!seen.insert(rec.key()).second)
            throw io_error(at + "duplicate record key " + rec.key());

        std::vector<std::int64_t> shapes[3];
        const std::string* paths[3] = {&rec.t1c_path, &rec.t2_path, &rec.mask_path};
        const char* names[3] = {"t1c", "t2", "mask"};
        for (int i = 0; i < 3; ++i) {
            const std::string full = resolve_record_path(manifest, *paths[i]);
            if (!fs::exists(full)) throw io_error(at + std::string(names[i]) + " tensor missing: " + full);
            try {
                shapes[i] = read_tensor_shape(full);
            } catch (const Error& e) {
                throw io_error(at + e.what());
            }
            if (shapes[i].size() != 2)
                throw io_error(at + std::string(names[i]) + " tensor must be rank 2 [H,W], got rank " +
                               std::to_string(shapes[i].size()));
        }
        if (shapes[1] != shapes[0] || shapes[2] != shapes[0])
            throw io_error(at + "record " + rec.key() + ": t1c/t2/mask shapes disagree");

        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open manifest for writing: " + path);
    os << "# patient_id,slice_index,label,t1c_path,t2_path,mask_path\n";
    for (const auto& r : manifest.records) {
        os << r.patient_id << "," << r.slice_index << "," << label_token(r.label) << "," << r.t1c_path << ","
           << r.t2_path << "," << r.mask_path << "\n";
    }
    if (!os) throw io_error("failed writing manifest: " + path);
}

// --------------------------------------------------------------------------
// splitting and sampling

Grouping grouping_from_string(const std::string& s) {
    if (s == "patient") return Grouping::patient;
    if (s == "slice") return Grouping::slice;
    throw invalid_argument_error("grouping must be patient|slice, got '" + s + "'");
}

namespace {

struct Group {
    std::vector<std::size_t> members; // indices into the record list
    int label = 0;
};

std::vector<Group> make_groups(const std::vector<SliceRecord>& records, Grouping grouping) {
    std::vector<Group> groups;
    if (grouping == Grouping::slice) {
        for (std::size_t i = 0; i < records.size(); ++i) groups.push_back(Group{{i}, records[i].label});
        return groups;
    }
    std::map<std::string, std::size_t> by_patient;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = by_patient.emplace(records[i].patient_id, groups.size());
        if (inserted) {
            groups.push_back(Group{{}, records[i].label});
        } else if (groups[it->second].label != records[i].label) {
            throw io_error("patient " + records[i].patient_id + " carries conflicting labels");
        }
        groups[it->second].members.push_back(i);
    }
    return groups;
}

void shuffle_indices(std::vector<std::size_t>& ix, Rng& rng) {
    for (std::size_t i = ix.size(); i > 1; --i) {
        std::swap(ix[i - 1], ix[static_cast<std::size_t>(rng.below(i))]);
    }
}

// Picks groups (in shuffled order) until exactly `target` slices of the class
// are taken; returns false if the exact count cannot be hit.
bool pick_exact(const std::vector<Group>& groups, const std::vector<std::size_t>& order, int target,
                std::vector<std::size_t>& chosen_groups) {
    int remaining = target;
    for (std::size_t gi : order) {
        if (remaining == 0) break;
        const int size = static_cast<int>(groups[gi].members.size());
        if (size <= remaining) {
            chosen_groups.push_back(gi);
            remaining -= size;
        }
    }
    return remaining == 0;
}

} // namespace

Split split_dataset(const Manifest& manifest, const SplitSpec& spec) {
    if (spec.test_per_class < 0) throw invalid_argument_error("test_per_class must be >= 0");
    std::vector<Group> groups = make_groups(manifest.records, spec.grouping);

    Split split;
    std::vector<bool> in_test(manifest.records.size(), false);
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<std::size_t> order;
        std::size_t available = 0;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            if (groups[gi].label == cls) {
                order.push_back(gi);
                available += groups[gi].members.size();
            }
        }
        if (available < static_cast<std::size_t>(spec.test_per_class)) {
            throw split_error("class " + std::string(label_token(cls)) + " has only " + std::to_string(available) +
                              " slices, cannot hold out " + std::to_string(spec.test_per_class));
        }
        Rng rng = rng_stream(spec.seed, {0x5b117ULL, static_cast<std::uint64_t>(cls)});
        shuffle_indices(order, rng);
        std::vector<std::size_t> chosen;
        if (!pick_exact(groups, order, spec.test_per_class, chosen)) {
            // with uniform group sizes the feasible counts are its multiples
            const std::size_t gsize = groups[order.front()].members.size();
            const int lower = static_cast<int>(spec.test_per_class / gsize * gsize);
            throw split_error("cannot select exactly " + std::to_string(spec.test_per_class) + " " +
                              label_token(cls) + " test slices with " +
                              (spec.grouping == Grouping::patient ? std::string("patient") : std::string("slice")) +
                              " grouping; nearest feasible counts are " + std::to_string(lower) + " or " +
                              std::to_string(lower + static_cast<int>(gsize)));
        }
        for (std::size_t gi : chosen) {
            for (std::size_t m : groups[gi].members) in_test[m] = true;
        }
    }
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        (in_test[i] ? split.test : split.pool).push_back(manifest.records[i]);
    }
    return split;
}

PoolSplit carve_validation(const std::vector<SliceRecord>& pool, double fraction, Grouping grouping,
                           std::uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0)
        throw invalid_argument_error("validation fraction must be in [0,1), got " + std::to_string(fraction));
    std::vector<Group> groups = make_groups(pool, grouping);
    std::vector<bool> in_val(pool.size(), false);
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<std::size_t> order;
        std::size_t class_slices = 0;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            if (groups[gi].label == cls) {
                order.push_back(gi);
                class_slices += groups[gi].members.size();
            }
        }
        Rng rng = rng_stream(seed, {0x7a11da7eULL, static_cast<std::uint64_t>(cls)});
        shuffle_indices(order, rng);
        const auto target = static_cast<std::size_t>(fraction * static_cast<double>(class_slices) + 0.5);
        std::size_t taken = 0;
        for (std::size_t gi : order) {
            if (taken >= target) break;
            for (std::size_t m : groups[gi].members) in_val[m] = true;
            taken += groups[gi].members.size();
        }
    }
    PoolSplit out;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        (in_val[i] ? out.validation : out.train).push_back(pool[i]);
    }
    return out;
}

std::vector<std::size_t> class_counts(const std::vector<int>& labels) {
    std::vector<std::size_t> counts(2, 0);
    for (int l : labels) {
        if (l < 0 || l > 1) throw invalid_argument_error("label outside {0,1}: " + std::to_string(l));
        ++counts[static_cast<std::size_t>(l)];
    }
    return counts;
}

std::vector<std::size_t> balanced_sample_indices(const std::vector<int>& labels, int per_class,
                                                 std::int64_t epoch, std::uint64_t master_seed) {
    if (per_class < 1) throw invalid_argument_error("balanced_sample: per-class count must be >= 1");
    std::vector<std::size_t> out;
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<std::size_t> ix;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) ix.push_back(i);
        }
        if (ix.size() < static_cast<std::size_t>(per_class)) {
            throw split_error("balanced_sample: class " + std::string(label_token(cls)) + " has " +
                              std::to_string(ix.size()) + " records, need " + std::to_string(per_class));
        }
        Rng rng = rng_stream(master_seed, {0xba1a7cedULL, static_cast<std::uint64_t>(epoch),
                                           static_cast<std::uint64_t>(cls)});
        shuffle_indices(ix, rng);
        out.insert(out.end(), ix.begin(), ix.begin() + per_class);
    }
    return out;
}

std::vector<SliceRecord> balanced_sample(const std::vector<SliceRecord>& pool, int per_class,
                                         std::int64_t epoch, std::uint64_t master_seed) {
    std::vector<int> labels;
    labels.reserve(pool.size());
    for (const auto& r : pool) labels.push_back(r.label);
    std::vector<SliceRecord> out;
    for (std::size_t i : balanced_sample_indices(labels, per_class, epoch, master_seed)) out.push_back(pool[i]);
    return out;
}

} // namespace codelnet
