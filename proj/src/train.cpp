#include "dgf/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace dgf {

namespace {

// %.17g so config text survives save -> load -> save byte-identically.
std::string format_full(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Tensor mask_tensor(const Mask& mask) {
    Tensor t(1, mask.height(), mask.width(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) t[i] = mask[i] ? 1.0 : 0.0;
    return t;
}

// Mean of |node| over mask-true pixels (or all pixels without a mask).
ad::NodeId masked_mean_abs(ad::Tape& t, ad::NodeId node, const Tensor* mask_t) {
    ad::NodeId a = ad::abs(t, node);
    double count = static_cast<double>(t.value(node).size());
    if (mask_t) {
        count = 0.0;
        for (std::size_t i = 0; i < mask_t->size(); ++i) count += (*mask_t)[i];
        if (count == 0.0) throw contract_error("loss mask is empty");
        a = ad::mul(t, a, t.constant(*mask_t));
    }
    return ad::mul_scalar(t, ad::sum_all(t, a), 1.0 / count);
}

ad::NodeId l1_loss(ad::Tape& t, ad::NodeId pred, ad::NodeId target,
                   const Tensor* mask_t) {
    return masked_mean_abs(t, ad::sub(t, pred, target), mask_t);
}

// Finite-difference image gradients, L1-compared on the shared grid.
ad::NodeId grad_diff_loss(ad::Tape& t, ad::NodeId pred, ad::NodeId target,
                          const Tensor* mask_t) {
    const Shape s = t.value(pred).shape();
    auto dx = [&](ad::NodeId n) {
        return ad::sub(t, ad::crop(t, n, 0, 1, s.h, s.w - 1),
                       ad::crop(t, n, 0, 0, s.h, s.w - 1));
    };
    auto dy = [&](ad::NodeId n) {
        return ad::sub(t, ad::crop(t, n, 1, 0, s.h - 1, s.w),
                       ad::crop(t, n, 0, 0, s.h - 1, s.w));
    };
    Tensor mask_dx, mask_dy;
    const Tensor* mx = nullptr;
    const Tensor* my = nullptr;
    if (mask_t) {
        mask_dx = Tensor(1, s.h, s.w - 1);
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w - 1; ++x)
                mask_dx.at(0, y, x) = mask_t->at(0, y, x) * mask_t->at(0, y, x + 1);
        mask_dy = Tensor(1, s.h - 1, s.w);
        for (int y = 0; y < s.h - 1; ++y)
            for (int x = 0; x < s.w; ++x)
                mask_dy.at(0, y, x) = mask_t->at(0, y, x) * mask_t->at(0, y + 1, x);
        mx = &mask_dx;
        my = &mask_dy;
    }
    ad::NodeId lx = masked_mean_abs(t, ad::sub(t, dx(pred), dx(target)), mx);
    ad::NodeId ly = masked_mean_abs(t, ad::sub(t, dy(pred), dy(target)), my);
    return ad::add(t, lx, ly);
}

// Differentiable SSIM over valid 11x11 Gaussian windows; returns 1 - mean.
ad::NodeId ssim_loss(ad::Tape& t, ad::NodeId pred, ad::NodeId target,
                     const Tensor* mask_t) {
    const Shape s = t.value(pred).shape();
    constexpr int kRadius = 5;
    constexpr double kSigma = 1.5;
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    if (s.h < 2 * kRadius + 1 || s.w < 2 * kRadius + 1)
        throw contract_error("ssim loss needs images of at least 11x11");

    Tensor kernel(1, 2 * kRadius + 1, 2 * kRadius + 1);
    double sum = 0.0;
    for (int y = -kRadius; y <= kRadius; ++y)
        for (int x = -kRadius; x <= kRadius; ++x) {
            double w = std::exp(-(x * x + y * y) / (2.0 * kSigma * kSigma));
            kernel.at(0, y + kRadius, x + kRadius) = w;
            sum += w;
        }
    for (std::size_t i = 0; i < kernel.size(); ++i) kernel[i] /= sum;
    ad::NodeId kw = t.constant(kernel);
    ad::NodeId kb = t.constant(Tensor(1, 1, 1, 0.0));
    auto smooth = [&](ad::NodeId n) {
        return ad::conv2d(t, n, kw, kb, 1, ad::Padding::valid);
    };

    ad::NodeId mu_p = smooth(pred);
    ad::NodeId mu_t = smooth(target);
    ad::NodeId mu_pp = smooth(ad::mul(t, pred, pred));
    ad::NodeId mu_tt = smooth(ad::mul(t, target, target));
    ad::NodeId mu_pt = smooth(ad::mul(t, pred, target));
    ad::NodeId var_p = ad::sub(t, mu_pp, ad::mul(t, mu_p, mu_p));
    ad::NodeId var_t = ad::sub(t, mu_tt, ad::mul(t, mu_t, mu_t));
    ad::NodeId cov = ad::sub(t, mu_pt, ad::mul(t, mu_p, mu_t));

    ad::NodeId num = ad::mul(
        t, ad::add_scalar(t, ad::mul_scalar(t, ad::mul(t, mu_p, mu_t), 2.0), c1),
        ad::add_scalar(t, ad::mul_scalar(t, cov, 2.0), c2));
    ad::NodeId den = ad::mul(
        t,
        ad::add_scalar(t, ad::add(t, ad::mul(t, mu_p, mu_p), ad::mul(t, mu_t, mu_t)), c1),
        ad::add_scalar(t, ad::add(t, var_p, var_t), c2));
    ad::NodeId ssim_map = ad::div(t, num, den);

    const Shape ms = t.value(ssim_map).shape();
    double count = static_cast<double>(ms.count());
    ad::NodeId sum_node;
    if (mask_t) {
        Tensor inner(1, ms.h, ms.w);
        count = 0.0;
        for (int y = 0; y < ms.h; ++y)
            for (int x = 0; x < ms.w; ++x) {
                double m = mask_t->at(0, y + kRadius, x + kRadius);
                inner.at(0, y, x) = m;
                count += m;
            }
        if (count == 0.0) throw contract_error("loss mask is empty in the valid region");
        sum_node = ad::sum_all(t, ad::mul(t, ssim_map, t.constant(inner)));
    } else {
        sum_node = ad::sum_all(t, ssim_map);
    }
    ad::NodeId mean = ad::mul_scalar(t, sum_node, 1.0 / count);
    return ad::add_scalar(t, ad::mul_scalar(t, mean, -1.0), 1.0);
}

}  // namespace

ad::NodeId loss_node(ad::Tape& tape, ad::NodeId pred, ad::NodeId target,
                     const LossSpec& spec, const Mask* mask) {
    if (!(tape.value(pred).shape() == tape.value(target).shape()))
        throw contract_error("loss pred/target shape mismatch");
    Tensor mt;
    const Tensor* mask_t = nullptr;
    if (mask) {
        if (mask->width() != tape.value(pred).shape().w ||
            mask->height() != tape.value(pred).shape().h)
            throw contract_error("loss mask dimensions mismatch");
        mt = mask_tensor(*mask);
        mask_t = &mt;
    }
    switch (spec.kind) {
        case LossSpec::Kind::l1:
            return l1_loss(tape, pred, target, mask_t);
        case LossSpec::Kind::ssim:
            return ssim_loss(tape, pred, target, mask_t);
        case LossSpec::Kind::l1_grad_diff: {
            if (spec.grad_weight < 0.0)
                throw config_error("gradient-difference weight must be >= 0");
            ad::NodeId l1 = l1_loss(tape, pred, target, mask_t);
            ad::NodeId gd = grad_diff_loss(tape, pred, target, mask_t);
            return ad::add(tape, l1, ad::mul_scalar(tape, gd, spec.grad_weight));
        }
    }
    throw contract_error("unreachable loss kind");
}

std::string LossSpec::to_text() const {
    switch (kind) {
        case Kind::l1: return "l1";
        case Kind::ssim: return "ssim";
        case Kind::l1_grad_diff: return "l1+grad:" + format_full(grad_weight);
    }
    return "?";
}

LossSpec LossSpec::from_text(const std::string& s) {
    LossSpec spec;
    if (s == "l1") {
        spec.kind = Kind::l1;
    } else if (s == "ssim") {
        spec.kind = Kind::ssim;
    } else if (s.rfind("l1+grad:", 0) == 0) {
        spec.kind = Kind::l1_grad_diff;
        spec.grad_weight = std::stod(s.substr(8));
        if (spec.grad_weight < 0.0)
            throw config_error("gradient-difference weight must be >= 0");
    } else {
        throw config_error("unknown loss '" + s + "'");
    }
    return spec;
}

// --- Adam ----------------------------------------------------------------

OptimizerState OptimizerState::init(
    const std::vector<std::pair<std::string, Tensor>>& params, double lr) {
    OptimizerState st;
    st.lr = lr;
    for (const auto& [name, t] : params) {
        st.m.emplace_back(name, Tensor(t.shape(), 0.0));
        st.v.emplace_back(name, Tensor(t.shape(), 0.0));
    }
    return st;
}

void adam_step(std::vector<std::pair<std::string, Tensor>>& params,
               const std::vector<Tensor>& grads, OptimizerState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw contract_error("adam_step parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!(grads[i].shape() == params[i].second.shape()))
            throw contract_error("adam_step gradient shape mismatch for " +
                                 params[i].first);
        if (!grads[i].all_finite())
            throw numeric_error("non-finite gradient for " + params[i].first +
                                "; step aborted");
    }
    state.step += 1;
    const double b1 = state.adam.beta1, b2 = state.adam.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i].second;
        Tensor& m = state.m[i].second;
        Tensor& v = state.v[i].second;
        const Tensor& g = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            double m_hat = m[j] / bc1;
            double v_hat = v[j] / bc2;
            p[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.adam.epsilon);
        }
    }
}

// --- training loop ---------------------------------------------------------

namespace {

// Training compares the full predicted image against the ground truth; the
// head mask only gates evaluation metrics. A masked loss would leave the
// background unconstrained and let it bleed into windowed metrics.
double forward_loss(const Network& net, const ImagePair& pair, const TrainConfig& cfg) {
    ad::Tape tape;
    ad::NodeId input = tape.constant(Tensor::from_image(pair.input));
    ad::NodeId guide = tape.constant(Tensor::from_image(pair.guide));
    PipelineResult r = forward_pipeline(tape, &net, cfg.variant, pair.meta.task,
                                        input, guide, cfg.gf, false);
    ad::NodeId target = tape.constant(Tensor::from_image(pair.ground_truth));
    ad::NodeId l = loss_node(tape, r.prediction, target, cfg.loss, nullptr);
    return tape.value(l)[0];
}

}  // namespace

double validation_loss(const Network& net, const std::vector<ImagePair>& val_set,
                       const TrainConfig& cfg) {
    double acc = 0.0;
    for (const auto& pair : val_set) acc += forward_loss(net, pair, cfg);
    return acc / static_cast<double>(val_set.size());
}

Checkpoint train(const std::vector<ImagePair>& dataset,
                 const std::vector<ImagePair>& val_set,
                 const GeneratorConfig& gen_config, const TrainConfig& cfg) {
    if (dataset.empty() || val_set.empty())
        throw config_error("training needs non-empty train and validation sets");
    if (cfg.min_lr > cfg.initial_lr)
        throw config_error("min_lr must be <= initial_lr");
    if (cfg.initial_lr > 1e-2 || cfg.min_lr < 1e-6)
        throw config_error("learning rate must stay within [1e-6, 1e-2]");
    if (cfg.variant == Variant::only_gf)
        throw config_error("onlyGF has no trainable parameters");
    if (cfg.max_iterations < 0 || cfg.validation_cadence < 1 ||
        cfg.plateau_patience < 1)
        throw config_error("invalid training loop configuration");
    if (cfg.decay_factor <= 0.0 || cfg.decay_factor >= 1.0)
        throw config_error("decay factor must be in (0, 1)");

    Network net = build_generator(gen_config);
    OptimizerState opt = OptimizerState::init(net.parameters(), cfg.initial_lr);

    Checkpoint cp;
    cp.generator = gen_config;
    cp.train = cfg;
    cp.task = dataset.front().meta.task;

    double best_val = validation_loss(net, val_set, cfg);
    auto best_params = net.parameters();
    cp.val_history.push_back(best_val);
    cp.train_history.push_back(best_val);

    std::mt19937_64 order_rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // triggers reshuffle on first use

    int plateau = 0;
    double last_train_loss = 0.0;
    std::vector<double> recent;

    auto evaluate = [&](int iteration) {
        double val = validation_loss(net, val_set, cfg);
        cp.val_history.push_back(val);
        cp.train_history.push_back(last_train_loss);
        if (val < best_val) {
            best_params = net.parameters();
            // plateau counting uses the relative threshold; best tracking is strict
            if (val < best_val * (1.0 - cfg.improvement_rtol))
                plateau = 0;
            else
                ++plateau;
            best_val = val;
        } else {
            ++plateau;
        }
        if (plateau >= cfg.plateau_patience) {
            opt.lr = std::max(opt.lr * cfg.decay_factor, cfg.min_lr);
            plateau = 0;
        }
        (void)iteration;
    };

    for (int it = 1; it <= cfg.max_iterations; ++it) {
        if (cursor >= order.size()) {
            std::shuffle(order.begin(), order.end(), order_rng);
            cursor = 0;
        }
        const ImagePair& pair = dataset[order[cursor++]];

        ad::Tape tape;
        ad::NodeId input = tape.constant(Tensor::from_image(pair.input));
        ad::NodeId guide = tape.constant(Tensor::from_image(pair.guide));
        PipelineResult r = forward_pipeline(tape, &net, cfg.variant, pair.meta.task,
                                            input, guide, cfg.gf, true);
        ad::NodeId target = tape.constant(Tensor::from_image(pair.ground_truth));
        ad::NodeId l = loss_node(tape, r.prediction, target, cfg.loss, nullptr);
        last_train_loss = tape.value(l)[0];
        recent.push_back(last_train_loss);
        if (recent.size() > 8) recent.erase(recent.begin());
        if (!std::isfinite(last_train_loss) || last_train_loss > 1e6) {
            std::ostringstream trace;
            trace << "training diverged at iteration " << it << "; recent losses:";
            for (double v : recent) trace << ' ' << v;
            throw numeric_error(trace.str());
        }

        tape.backward(l);
        std::vector<Tensor> grads;
        grads.reserve(r.param_nodes.size());
        for (ad::NodeId id : r.param_nodes) grads.push_back(tape.grad(id));
        adam_step(net.parameters(), grads, opt);

        if (it % cfg.validation_cadence == 0) evaluate(it);
    }
    if (cfg.max_iterations > 0 && cfg.max_iterations % cfg.validation_cadence != 0)
        evaluate(cfg.max_iterations);

    cp.parameters = std::move(best_params);
    cp.optimizer = std::move(opt);
    cp.best_val_loss = best_val;
    return cp;
}

// --- checkpoint IO -----------------------------------------------------------

std::string TrainConfig::canonical_text() const {
    std::ostringstream out;
    out << "train.decay_factor = " << format_full(decay_factor) << '\n';
    out << "train.gf_epsilon = " << format_full(gf.epsilon) << '\n';
    out << "train.gf_radius = " << gf.window.radius << '\n';
    out << "train.improvement_rtol = " << format_full(improvement_rtol) << '\n';
    out << "train.initial_lr = " << format_full(initial_lr) << '\n';
    out << "train.loss = " << loss.to_text() << '\n';
    out << "train.max_iterations = " << max_iterations << '\n';
    out << "train.min_lr = " << format_full(min_lr) << '\n';
    out << "train.patience = " << plateau_patience << '\n';
    out << "train.seed = " << seed << '\n';
    out << "train.validation_cadence = " << validation_cadence << '\n';
    out << "train.variant = " << to_string(variant) << '\n';
    return out.str();
}

namespace {

TrainConfig train_config_from_text(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 3);
        if (key == "train.decay_factor") cfg.decay_factor = std::stod(value);
        else if (key == "train.gf_epsilon") cfg.gf.epsilon = std::stod(value);
        else if (key == "train.gf_radius") cfg.gf.window.radius = std::stoi(value);
        else if (key == "train.improvement_rtol") cfg.improvement_rtol = std::stod(value);
        else if (key == "train.initial_lr") cfg.initial_lr = std::stod(value);
        else if (key == "train.loss") cfg.loss = LossSpec::from_text(value);
        else if (key == "train.max_iterations") cfg.max_iterations = std::stoi(value);
        else if (key == "train.min_lr") cfg.min_lr = std::stod(value);
        else if (key == "train.patience") cfg.plateau_patience = std::stoi(value);
        else if (key == "train.seed") cfg.seed = std::stoull(value);
        else if (key == "train.validation_cadence") cfg.validation_cadence = std::stoi(value);
        else if (key == "train.variant") cfg.variant = variant_from_string(value);
    }
    return cfg;
}

constexpr char kCheckpointMagic[4] = {'D', 'G', 'F', 'C'};

void append_u16(std::string& buf, std::uint16_t v) {
    char b[2];
    std::memcpy(b, &v, 2);
    buf.append(b, 2);
}
void append_u32(std::string& buf, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf.append(b, 4);
}

void append_block(std::string& buf, const std::string& name, const Tensor& t) {
    if (name.size() > 0xffff) throw contract_error("block name too long");
    append_u16(buf, static_cast<std::uint16_t>(name.size()));
    buf.append(name);
    append_u32(buf, static_cast<std::uint32_t>(t.shape().c));
    append_u32(buf, static_cast<std::uint32_t>(t.shape().h));
    append_u32(buf, static_cast<std::uint32_t>(t.shape().w));
    buf.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
}

struct Reader {
    const std::string& bytes;
    const std::string& path;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (bytes.size() - pos < n)
            throw io_error(path + ": truncated " + what + " at byte " +
                           std::to_string(pos));
    }
    std::uint16_t u16() {
        need(2, "field");
        std::uint16_t v;
        std::memcpy(&v, bytes.data() + pos, 2);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4, "field");
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + pos, 4);
        pos += 4;
        return v;
    }
    std::string str(std::size_t n) {
        need(n, "string");
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
    Tensor tensor(std::uint32_t c, std::uint32_t h, std::uint32_t w) {
        if (c == 0 || h == 0 || w == 0 ||
            static_cast<std::uint64_t>(c) * h * w > (1ull << 28))
            throw io_error(path + ": block dimension overflow at byte " +
                           std::to_string(pos));
        Tensor t(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
        need(t.size() * sizeof(double), "payload");
        std::memcpy(t.data(), bytes.data() + pos, t.size() * sizeof(double));
        pos += t.size() * sizeof(double);
        return t;
    }
};

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
    std::vector<std::string> lines;
    {
        std::istringstream gen(cp.generator.canonical_text());
        std::istringstream tr(cp.train.canonical_text());
        std::string line;
        while (std::getline(gen, line)) lines.push_back(line);
        while (std::getline(tr, line)) lines.push_back(line);
        lines.push_back("state.best_val = " + format_full(cp.best_val_loss));
        lines.push_back("state.lr = " + format_full(cp.optimizer.lr));
        lines.push_back("state.step = " + std::to_string(cp.optimizer.step));
        lines.push_back("task = " + to_string(cp.task));
    }
    std::sort(lines.begin(), lines.end());
    std::string cfg_text;
    for (const auto& l : lines) {
        cfg_text += l;
        cfg_text += '\n';
    }

    std::string buf;
    buf.append(kCheckpointMagic, 4);
    append_u32(buf, cp.version);
    append_u32(buf, static_cast<std::uint32_t>(cfg_text.size()));
    buf.append(cfg_text);

    std::uint32_t n_blocks =
        static_cast<std::uint32_t>(cp.parameters.size() + cp.optimizer.m.size() +
                                   cp.optimizer.v.size() + 2);
    append_u32(buf, n_blocks);
    for (const auto& [name, t] : cp.parameters) append_block(buf, "param." + name, t);
    for (const auto& [name, t] : cp.optimizer.m) append_block(buf, "adam.m." + name, t);
    for (const auto& [name, t] : cp.optimizer.v) append_block(buf, "adam.v." + name, t);

    auto history_tensor = [](const std::vector<double>& h) {
        Tensor t(1, 1, std::max<int>(1, static_cast<int>(h.size())), 0.0);
        for (std::size_t i = 0; i < h.size(); ++i) t[i] = h[i];
        return t;
    };
    append_block(buf, "hist.val", history_tensor(cp.val_history));
    append_block(buf, "hist.train", history_tensor(cp.train_history));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw io_error(path + ": short write");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path + ": cannot open");
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    Reader r{bytes, path};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw io_error(path + ": bad magic at byte 0");
    r.pos = 4;
    std::uint32_t version = r.u32();
    if (version != 1)
        throw io_error(path + ": unsupported checkpoint version " +
                       std::to_string(version));
    std::uint32_t cfg_len = r.u32();
    std::string cfg_text = r.str(cfg_len);

    Checkpoint cp;
    cp.version = version;
    cp.generator = GeneratorConfig::from_text(cfg_text);
    cp.train = train_config_from_text(cfg_text);
    {
        std::istringstream ci(cfg_text);
        std::string line;
        while (std::getline(ci, line)) {
            auto eq = line.find(" = ");
            if (eq == std::string::npos) continue;
            std::string key = line.substr(0, eq);
            std::string value = line.substr(eq + 3);
            if (key == "state.best_val") cp.best_val_loss = std::stod(value);
            else if (key == "state.lr") cp.optimizer.lr = std::stod(value);
            else if (key == "state.step") cp.optimizer.step = std::stoll(value);
            else if (key == "task") cp.task = task_from_string(value);
        }
    }

    std::uint32_t n_blocks = r.u32();
    std::vector<double> hist_val, hist_train;
    for (std::uint32_t b = 0; b < n_blocks; ++b) {
        std::uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        std::uint32_t c = r.u32(), h = r.u32(), w = r.u32();
        Tensor t = r.tensor(c, h, w);
        if (name.rfind("param.", 0) == 0) {
            cp.parameters.emplace_back(name.substr(6), std::move(t));
        } else if (name.rfind("adam.m.", 0) == 0) {
            cp.optimizer.m.emplace_back(name.substr(7), std::move(t));
        } else if (name.rfind("adam.v.", 0) == 0) {
            cp.optimizer.v.emplace_back(name.substr(7), std::move(t));
        } else if (name == "hist.val") {
            hist_val.assign(t.data(), t.data() + t.size());
        } else if (name == "hist.train") {
            hist_train.assign(t.data(), t.data() + t.size());
        } else {
            throw io_error(path + ": unknown block '" + name + "'");
        }
    }
    if (r.pos != bytes.size())
        throw io_error(path + ": trailing bytes at byte " + std::to_string(r.pos));
    cp.val_history = std::move(hist_val);
    cp.train_history = std::move(hist_train);
    return cp;
}

Network network_from_checkpoint(const Checkpoint& cp) {
    Network net = build_generator(cp.generator);
    if (net.parameters().size() != cp.parameters.size())
        throw io_error("checkpoint parameter blocks do not match the architecture");
    for (std::size_t i = 0; i < cp.parameters.size(); ++i) {
        auto& [name, t] = net.parameters()[i];
        const auto& [cp_name, cp_t] = cp.parameters[i];
        if (name != cp_name || !(t.shape() == cp_t.shape()))
            throw io_error("checkpoint parameter '" + cp_name +
                           "' does not match expected '" + name + "'");
        t = cp_t;
    }
    return net;
}

}  // namespace dgf
