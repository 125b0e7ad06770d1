#include "codelnet/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "codelnet/errors.hpp"
#include "codelnet/rng.hpp"

namespace codelnet {

NetworkConfig desk_scale_config(std::int64_t input_channels, std::int64_t canvas, std::int64_t filters,
                                std::vector<std::int64_t> fc_sizes) {
    NetworkConfig cfg;
    cfg.input_channels = input_channels;
    cfg.canvas = canvas;
    cfg.fc_sizes = std::move(fc_sizes);
    for (int denom : {2, 4, 8}) {
        ConvStage stage;
        stage.filters = filters;
        stage.kernel = Window{canvas / denom, canvas / denom};
        stage.stride = Stride{1, 1};
        stage.pool = Window{2, 2};
        cfg.branches.push_back(BranchSpec{{stage}});
    }
    return cfg;
}

NetworkConfig full_scale_config(std::int64_t input_channels) {
    NetworkConfig cfg;
    cfg.input_channels = input_channels;
    cfg.canvas = 205;
    cfg.fc_sizes = {64};
    // global branch: 128 filters of 200x200, stride 1
    cfg.branches.push_back(BranchSpec{{ConvStage{128, Window{200, 200}, Stride{1, 1}, Window{2, 2}}}});
    // mid and local branches
    cfg.branches.push_back(BranchSpec{{ConvStage{64, Window{50, 50}, Stride{5, 5}, Window{4, 4}}}});
    cfg.branches.push_back(BranchSpec{{ConvStage{32, Window{20, 20}, Stride{5, 5}, Window{2, 2}}}});
    return cfg;
}

std::vector<std::vector<StageShape>> branch_shapes(const NetworkConfig& config) {
    std::vector<std::vector<StageShape>> all;
    for (std::size_t b = 0; b < config.branches.size(); ++b) {
        std::vector<StageShape> shapes;
        std::int64_t c = config.input_channels;
        std::int64_t h = config.canvas, w = config.canvas;
        const auto& branch = config.branches[b];
        for (std::size_t s = 0; s < branch.stages.size(); ++s) {
            const ConvStage& st = branch.stages[s];
            const std::string where = "branch " + std::to_string(b) + " stage " + std::to_string(s);
            if (st.filters < 1) throw invalid_argument_error(where + ": filter count must be >= 1");
            if (st.kernel.h > h || st.kernel.w > w) {
                throw invalid_argument_error(where + ": kernel " + std::to_string(st.kernel.h) + "x" +
                                             std::to_string(st.kernel.w) + " exceeds incoming " +
                                             std::to_string(h) + "x" + std::to_string(w));
            }
            h = conv_out_dim(h, st.kernel.h, st.stride.h);
            w = conv_out_dim(w, st.kernel.w, st.stride.w);
            if (st.pool) {
                if (st.pool->h > h || st.pool->w > w) {
                    throw invalid_argument_error(where + ": pool window " + std::to_string(st.pool->h) + "x" +
                                                 std::to_string(st.pool->w) + " exceeds conv output " +
                                                 std::to_string(h) + "x" + std::to_string(w));
                }
                h = conv_out_dim(h, st.pool->h, st.pool->h);
                w = conv_out_dim(w, st.pool->w, st.pool->w);
            }
            c = st.filters;
            shapes.push_back(StageShape{c, h, w});
        }
        all.push_back(std::move(shapes));
    }
    return all;
}

std::int64_t concat_width(const NetworkConfig& config) {
    std::int64_t total = 0;
    for (const auto& shapes : branch_shapes(config)) {
        const StageShape& last = shapes.back();
        total += last.channels * last.height * last.width;
    }
    return total;
}

namespace {

void validate_config(const NetworkConfig& config) {
    if (config.input_channels != 1 && config.input_channels != 2)
        throw invalid_argument_error("network: input_channels must be 1 or 2");
    if (config.canvas < 1) throw invalid_argument_error("network: canvas must be >= 1");
    if (config.classes != 2) throw invalid_argument_error("network: this classifier is binary (classes = 2)");
    if (config.branches.empty()) throw invalid_argument_error("network: at least one branch required");
    for (std::size_t b = 0; b < config.branches.size(); ++b) {
        if (config.branches[b].stages.empty())
            throw invalid_argument_error("branch " + std::to_string(b) + ": needs at least one stage");
    }
    for (std::int64_t fc : config.fc_sizes) {
        if (fc < 1) throw invalid_argument_error("network: fc widths must be >= 1");
    }
}

Tensor init_uniform(Rng& rng, std::vector<std::int64_t> shape, std::int64_t fan_in, std::int64_t fan_out) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t.data) v = static_cast<float>(rng.range(-bound, bound));
    return t;
}

} // namespace

Parameter& Network::param(const std::string& name) {
    for (auto& p : parameters) {
        if (p.name == name) return p;
    }
    throw invalid_argument_error("network: no parameter named '" + name + "'");
}

const Parameter& Network::param(const std::string& name) const {
    for (const auto& p : parameters) {
        if (p.name == name) return p;
    }
    throw invalid_argument_error("network: no parameter named '" + name + "'");
}

void Network::zero_grads() {
    for (auto& p : parameters) {
        p.tensor.ensure_grad();
        p.tensor.zero_grad();
    }
}

std::int64_t Network::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : parameters) n += p.tensor.numel();
    return n;
}

Network build_network(const NetworkConfig& config) {
    validate_config(config);
    branch_shapes(config); // geometry check, throws naming the stage

    Network net;
    net.config = config;
    Rng rng = rng_stream(config.init_seed, {0x1417ULL});

    for (std::size_t b = 0; b < config.branches.size(); ++b) {
        std::int64_t c = config.input_channels;
        for (std::size_t s = 0; s < config.branches[b].stages.size(); ++s) {
            const ConvStage& st = config.branches[b].stages[s];
            const std::string base = "branch" + std::to_string(b) + ".conv" + std::to_string(s);
            const std::int64_t fan_in = c * st.kernel.h * st.kernel.w;
            const std::int64_t fan_out = st.filters * st.kernel.h * st.kernel.w;
            net.parameters.push_back(
                Parameter{init_uniform(rng, {st.filters, c, st.kernel.h, st.kernel.w}, fan_in, fan_out),
                          base + ".weight", true});
            net.parameters.push_back(Parameter{Tensor({st.filters}), base + ".bias", true});
            c = st.filters;
        }
    }

    std::int64_t width = concat_width(config);
    for (std::size_t j = 0; j < config.fc_sizes.size(); ++j) {
        const std::int64_t out = config.fc_sizes[j];
        const std::string base = "fc" + std::to_string(j);
        net.parameters.push_back(Parameter{init_uniform(rng, {width, out}, width, out), base + ".weight", true});
        net.parameters.push_back(Parameter{Tensor({out}), base + ".bias", true});
        width = out;
    }
    net.parameters.push_back(
        Parameter{init_uniform(rng, {width, config.classes}, width, config.classes), "out.weight", true});
    net.parameters.push_back(Parameter{Tensor({config.classes}), "out.bias", true});
    return net;
}

ForwardTrace forward_trace(const Network& net, const Tensor& batch) {
    const NetworkConfig& cfg = net.config;
    if (batch.rank() != 4)
        throw dimension_error("forward: batch must be rank 4 [N,C,H,W], got " + Tensor::shape_string(batch.shape));
    if (batch.dim(1) != cfg.input_channels)
        throw dimension_error("forward: batch has " + std::to_string(batch.dim(1)) + " channels, network expects " +
                              std::to_string(cfg.input_channels) + " (axis 1)");
    if (batch.dim(2) != cfg.canvas || batch.dim(3) != cfg.canvas)
        throw dimension_error("forward: batch spatial dims " + std::to_string(batch.dim(2)) + "x" +
                              std::to_string(batch.dim(3)) + " != canvas " + std::to_string(cfg.canvas));

    ForwardTrace trace;
    trace.input = batch;

    for (std::size_t b = 0; b < cfg.branches.size(); ++b) {
        std::vector<ForwardTrace::Stage> stages;
        stages.reserve(cfg.branches[b].stages.size());
        const Tensor* x = &trace.input;
        for (std::size_t s = 0; s < cfg.branches[b].stages.size(); ++s) {
            const ConvStage& st = cfg.branches[b].stages[s];
            const std::string base = "branch" + std::to_string(b) + ".conv" + std::to_string(s);
            ForwardTrace::Stage stage;
            stage.pre = conv2d_forward(*x, net.param(base + ".weight").tensor, net.param(base + ".bias").tensor,
                                       st.stride);
            stage.post = relu_forward(stage.pre);
            if (st.pool) {
                stage.has_pool = true;
                stage.pooled = maxpool2d_forward(stage.post, *st.pool, Stride{st.pool->h, st.pool->w});
            }
            stages.push_back(std::move(stage));
            ForwardTrace::Stage& back = stages.back();
            x = back.has_pool ? &back.pooled : &back.post;
        }
        trace.branches.push_back(std::move(stages));
        trace.branch_flat.push_back(flatten_to_2d(trace.branches.back().back().has_pool
                                                      ? trace.branches.back().back().pooled
                                                      : trace.branches.back().back().post));
    }

    std::vector<const Tensor*> flats;
    for (const auto& f : trace.branch_flat) flats.push_back(&f);
    trace.concat = concat_forward(flats);

    trace.fc_pre.reserve(cfg.fc_sizes.size());
    trace.fc_post.reserve(cfg.fc_sizes.size());
    const Tensor* x = &trace.concat;
    for (std::size_t j = 0; j < cfg.fc_sizes.size(); ++j) {
        const std::string base = "fc" + std::to_string(j);
        trace.fc_pre.push_back(dense_forward(*x, net.param(base + ".weight").tensor, net.param(base + ".bias").tensor));
        trace.fc_post.push_back(relu_forward(trace.fc_pre.back()));
        x = &trace.fc_post.back();
    }
    trace.logits = dense_forward(*x, net.param("out.weight").tensor, net.param("out.bias").tensor);
    trace.probs = softmax_forward(trace.logits);
    return trace;
}

Tensor forward(const Network& net, const Tensor& batch, bool /*training*/) {
    return forward_trace(net, batch).probs;
}

namespace {

// moves a tensor's grad buffer out as a value tensor
Tensor take_grad(Tensor& t) {
    if (!t.has_grad()) throw numeric_error("backward: missing upstream gradient");
    Tensor g;
    g.shape = t.shape;
    g.data = std::move(t.grad);
    t.grad.clear();
    return g;
}

} // namespace

void backward(Network& net, ForwardTrace& trace, const std::vector<int>& labels) {
    const NetworkConfig& cfg = net.config;
    Tensor grad = softmax_nll_backward(trace.probs, labels);

    // classifier head
    Tensor& head_in = cfg.fc_sizes.empty() ? trace.concat : trace.fc_post.back();
    dense_backward(head_in, net.param("out.weight").tensor, net.param("out.bias").tensor, grad, true);
    for (std::size_t jj = cfg.fc_sizes.size(); jj-- > 0;) {
        const std::string base = "fc" + std::to_string(jj);
        Tensor g_post = take_grad(trace.fc_post[jj]);
        relu_backward(trace.fc_pre[jj], g_post);
        Tensor g_pre = take_grad(trace.fc_pre[jj]);
        Tensor& in = jj == 0 ? trace.concat : trace.fc_post[jj - 1];
        dense_backward(in, net.param(base + ".weight").tensor, net.param(base + ".bias").tensor, g_pre, true);
    }

    Tensor g_concat = take_grad(trace.concat);
    std::vector<Tensor*> flats;
    for (auto& f : trace.branch_flat) flats.push_back(&f);
    concat_backward(flats, g_concat);

    for (std::size_t b = 0; b < cfg.branches.size(); ++b) {
        auto& stages = trace.branches[b];
        // re-route the flat gradient onto the branch's last activation
        Tensor* last = stages.back().has_pool ? &stages.back().pooled : &stages.back().post;
        last->grad = std::move(trace.branch_flat[b].grad);
        trace.branch_flat[b].grad.clear();

        for (std::size_t s = stages.size(); s-- > 0;) {
            const ConvStage& st = cfg.branches[b].stages[s];
            const std::string base = "branch" + std::to_string(b) + ".conv" + std::to_string(s);
            ForwardTrace::Stage& stage = stages[s];
            if (stage.has_pool) {
                Tensor g_pool = take_grad(stage.pooled);
                maxpool2d_backward(stage.post, *st.pool, Stride{st.pool->h, st.pool->w}, g_pool);
            }
            Tensor g_post = take_grad(stage.post);
            relu_backward(stage.pre, g_post);
            Tensor g_pre = take_grad(stage.pre);
            Tensor& in = s == 0 ? trace.input : (stages[s - 1].has_pool ? stages[s - 1].pooled : stages[s - 1].post);
            const bool need_input_grad = s > 0;
            conv2d_backward(in, net.param(base + ".weight").tensor, net.param(base + ".bias").tensor, st.stride,
                            g_pre, need_input_grad);
        }
    }
}

std::vector<Prediction> predict(const Network& net, const Tensor& batch) {
    Tensor probs = forward(net, batch);
    std::vector<Prediction> out;
    const std::int64_t n = probs.dim(0), k = probs.dim(1);
    for (std::int64_t i = 0; i < n; ++i) {
        int best = 0;
        for (std::int64_t j = 1; j < k; ++j) {
            if (probs.data[static_cast<std::size_t>(i * k + j)] >
                probs.data[static_cast<std::size_t>(i * k + best)])
                best = static_cast<int>(j);
        }
        out.push_back(Prediction{best, probs.data[static_cast<std::size_t>(i * k + best)]});
    }
    return out;
}

// --------------------------------------------------------------------------
// weights file

namespace {

constexpr char kWeightsMagic[4] = {'C', 'D', 'W', '1'};
constexpr std::uint16_t kWeightsVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(os, v);
}

bool get_bytes(std::istream& is, void* dst, std::size_t n) {
    is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(is.gcount()) == n;
}

std::uint16_t get_u16(std::istream& is, const std::string& path) {
    unsigned char b[2];
    if (!get_bytes(is, b, 2)) throw io_error("weights file truncated: " + path);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!get_bytes(is, b, 4)) throw io_error("weights file truncated: " + path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

float get_f32(std::istream& is, const std::string& path) {
    std::uint32_t v = get_u32(is, path);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

} // namespace

void save_weights(const Network& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open weights file for writing: " + path);
    os.write(kWeightsMagic, 4);
    put_u16(os, kWeightsVersion);
    put_u32(os, static_cast<std::uint32_t>(net.parameters.size()));
    for (const auto& p : net.parameters) {
        put_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_u32(os, static_cast<std::uint32_t>(p.tensor.rank()));
        for (std::int64_t d : p.tensor.shape) put_u32(os, static_cast<std::uint32_t>(d));
        for (float f : p.tensor.data) put_f32(os, f);
    }
    if (!os) throw io_error("failed writing weights file: " + path);
}

Network load_weights(const std::string& path, const NetworkConfig& config) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open weights file: " + path);
    char magic[4];
    if (!get_bytes(is, magic, 4) || std::memcmp(magic, kWeightsMagic, 4) != 0)
        throw io_error("bad weights magic in " + path);
    const std::uint16_t version = get_u16(is, path);
    if (version != kWeightsVersion)
        throw io_error("unsupported weights version " + std::to_string(version) + " in " + path);

    Network net = build_network(config);
    const std::uint32_t count = get_u32(is, path);
    if (count != net.parameters.size()) {
        throw mismatch_error("weights file holds " + std::to_string(count) + " parameters, config expects " +
                             std::to_string(net.parameters.size()));
    }
    for (auto& p : net.parameters) {
        const std::uint32_t name_len = get_u32(is, path);
        std::string name(name_len, '\0');
        if (!get_bytes(is, name.data(), name_len)) throw io_error("weights file truncated: " + path);
        if (name != p.name)
            throw mismatch_error("weights parameter '" + name + "' does not match config parameter '" + p.name +
                                 "'");
        const std::uint32_t rank = get_u32(is, path);
        if (rank != static_cast<std::uint32_t>(p.tensor.rank()))
            throw mismatch_error("parameter '" + name + "': rank " + std::to_string(rank) +
                                 " does not match config rank " + std::to_string(p.tensor.rank()));
        for (std::int64_t d : p.tensor.shape) {
            const std::uint32_t dim = get_u32(is, path);
            if (dim != static_cast<std::uint32_t>(d))
                throw mismatch_error("parameter '" + name + "': shape entry " + std::to_string(dim) +
                                     " does not match config entry " + std::to_string(d));
        }
        for (auto& f : p.tensor.data) f = get_f32(is, path);
    }
    // no partial network escapes: any throw above abandons the object
    char extra;
    if (is.read(&extra, 1) && is.gcount() == 1) throw io_error("trailing bytes after weights data: " + path);
    return net;
}

} // namespace codelnet
