#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dgf/train.hpp"
#include "test_support.hpp"

using namespace dgf;
using namespace dgf_test;

namespace {

GeneratorConfig small_unet() {
    GeneratorConfig cfg;
    cfg.architecture = Architecture::unet_mini;
    cfg.encoder_depth = 2;
    cfg.base_channels = 4;
    cfg.seed = 3;
    return cfg;
}

std::vector<ImagePair> sr_pairs(std::uint64_t seed, int n, int size = 32) {
    PhantomSpec spec;
    spec.seed = seed;
    spec.size = size;
    return make_dataset(spec, Task::super_resolution, std::nullopt, n);
}

TrainConfig quick_config(int iterations, double lr = 1e-3) {
    TrainConfig cfg;
    cfg.initial_lr = lr;
    cfg.min_lr = 1e-6;
    cfg.max_iterations = iterations;
    cfg.validation_cadence = 50;
    cfg.variant = Variant::without_gf;
    cfg.loss.kind = LossSpec::Kind::l1;
    cfg.seed = 11;
    cfg.gf = GuidedFilterParams{WindowSpec{2}, 1e-4};
    return cfg;
}

double scalar_loss(ad::Tape& t, ad::NodeId node) { return t.value(node)[0]; }

}  // namespace

TEST_CASE("l1 loss trivial values") {
    ad::Tape t;
    Tensor a(1, 6, 6, 0.4);
    ad::NodeId pa = t.constant(a);
    LossSpec l1;
    l1.kind = LossSpec::Kind::l1;
    CHECK(scalar_loss(t, loss_node(t, pa, t.constant(a), l1, nullptr)) == 0.0);

    Tensor b(1, 6, 6, 0.5);
    double v = scalar_loss(t, loss_node(t, pa, t.constant(b), l1, nullptr));
    CHECK(v == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("masked l1 averages only mask pixels") {
    ad::Tape t;
    Tensor a(1, 4, 4, 0.0), b(1, 4, 4, 0.0);
    b.at(0, 0, 0) = 1.0;  // inside mask
    b.at(0, 3, 3) = 9.0;  // outside mask
    Mask m(4, 4, false);
    m.set(0, 0, true);
    m.set(1, 0, true);
    LossSpec l1;
    l1.kind = LossSpec::Kind::l1;
    double v = scalar_loss(t, loss_node(t, t.constant(a), t.constant(b), l1, &m));
    CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ssim loss vanishes on identical images") {
    ad::Tape t;
    Tensor a = Tensor::from_image(random_image(16, 16, 2));
    LossSpec spec;
    spec.kind = LossSpec::Kind::ssim;
    double v = scalar_loss(t, loss_node(t, t.constant(a), t.constant(a), spec, nullptr));
    CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("loss gradients pass central differences") {
    for (auto kind : {LossSpec::Kind::l1, LossSpec::Kind::ssim,
                      LossSpec::Kind::l1_grad_diff}) {
        LossSpec spec;
        spec.kind = kind;
        spec.grad_weight = 0.5;
        Tensor pred = Tensor::from_image(random_image(12, 12, 5));
        Tensor target = Tensor::from_image(random_image(12, 12, 6));
        Mask m(12, 12, true);
        m.set(0, 0, false);

        ad::Tape t;
        ad::NodeId p = t.variable(pred);
        ad::NodeId l = loss_node(t, p, t.constant(target), spec, &m);
        t.backward(l);
        std::vector<Tensor> analytic{t.grad(p)};

        auto f = [&](const std::vector<Tensor>& xs, ad::EvalProbe* probe) {
            ad::Tape t2;
            t2.reset_forward_probes();
            ad::NodeId p2 = t2.variable(xs[0]);
            ad::NodeId l2 = loss_node(t2, p2, t2.constant(target), spec, &m);
            if (probe) {
            probe->kink_gap = t2.min_kink_gap();
            probe->fingerprint = t2.activation_fingerprint();
        }
            return t2.value(l2)[0];
        };
        auto res = ad::grad_check(f, {pred}, analytic, 1e-5, 30, 7);
        INFO(spec.to_text());
        CHECK(res.max_rel_error < 1e-4);
    }
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
    std::vector<std::pair<std::string, Tensor>> params;
    params.emplace_back("w", Tensor(1, 2, 2, 0.7));
    OptimizerState st = OptimizerState::init(params, 1e-3);
    std::vector<Tensor> grads{Tensor(1, 2, 2, 0.0)};
    adam_step(params, grads, st);
    CHECK(st.step == 1);
    for (std::size_t i = 0; i < params[0].second.size(); ++i)
        CHECK(params[0].second[i] == 0.7);
}

TEST_CASE("adam first step matches the hand-evaluated update") {
    std::vector<std::pair<std::string, Tensor>> params;
    params.emplace_back("w", Tensor(1, 1, 1, 0.0));
    OptimizerState st = OptimizerState::init(params, 1e-3);
    std::vector<Tensor> grads{Tensor(1, 1, 1, 1.0)};
    adam_step(params, grads, st);
    // bias corrections cancel at step 1: update = -lr * 1 / (1 + eps)
    double expected = -1e-3 * 1.0 / (1.0 + 1e-8);
    CHECK(params[0].second[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam rejects non-finite gradients without partial updates") {
    std::vector<std::pair<std::string, Tensor>> params;
    params.emplace_back("a", Tensor(1, 1, 2, 1.0));
    params.emplace_back("b", Tensor(1, 1, 2, 2.0));
    OptimizerState st = OptimizerState::init(params, 1e-3);
    std::vector<Tensor> grads{Tensor(1, 1, 2, 0.5), Tensor(1, 1, 2, 0.5)};
    grads[1][1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(adam_step(params, grads, st), numeric_error);
    CHECK(params[0].second[0] == 1.0);
    CHECK(st.step == 0);
}

TEST_CASE("zero iterations returns the initialized weights") {
    auto pairs = sr_pairs(21, 3);
    std::vector<ImagePair> train_set(pairs.begin(), pairs.begin() + 2);
    std::vector<ImagePair> val_set(pairs.begin() + 2, pairs.end());
    TrainConfig cfg = quick_config(0);
    Checkpoint cp = train(train_set, val_set, small_unet(), cfg);
    Network fresh = build_generator(small_unet());
    REQUIRE(cp.parameters.size() == fresh.parameters().size());
    for (std::size_t i = 0; i < cp.parameters.size(); ++i)
        for (std::size_t j = 0; j < cp.parameters[i].second.size(); ++j)
            CHECK(cp.parameters[i].second[j] == fresh.parameters()[i].second[j]);
    CHECK(cp.optimizer.step == 0);
}

TEST_CASE("overfitting one pair shrinks the training loss") {
    auto pairs = sr_pairs(22, 2);
    std::vector<ImagePair> train_set{pairs[0]};
    std::vector<ImagePair> val_set{pairs[0]};
    TrainConfig cfg = quick_config(600, 2e-3);
    cfg.validation_cadence = 100;
    Checkpoint cp = train(train_set, val_set, small_unet(), cfg);
    REQUIRE(cp.val_history.size() >= 2);
    double initial = cp.val_history.front();
    CHECK(cp.best_val_loss < 0.1 * initial);
}

TEST_CASE("deterministic training") {
    auto pairs = sr_pairs(23, 3);
    std::vector<ImagePair> train_set(pairs.begin(), pairs.begin() + 2);
    std::vector<ImagePair> val_set(pairs.begin() + 2, pairs.end());
    TrainConfig cfg = quick_config(40);
    Checkpoint a = train(train_set, val_set, small_unet(), cfg);
    Checkpoint b = train(train_set, val_set, small_unet(), cfg);
    REQUIRE(a.parameters.size() == b.parameters.size());
    for (std::size_t i = 0; i < a.parameters.size(); ++i)
        for (std::size_t j = 0; j < a.parameters[i].second.size(); ++j)
            CHECK(a.parameters[i].second[j] == b.parameters[i].second[j]);
    CHECK(a.best_val_loss == b.best_val_loss);
}

TEST_CASE("the plateau schedule never leaves [min_lr, initial_lr]") {
    auto pairs = sr_pairs(24, 3);
    std::vector<ImagePair> train_set(pairs.begin(), pairs.begin() + 2);
    std::vector<ImagePair> val_set(pairs.begin() + 2, pairs.end());
    TrainConfig cfg;  // paper-default rates 1e-5 -> 1e-6
    cfg.max_iterations = 120;
    cfg.validation_cadence = 10;
    cfg.plateau_patience = 2;
    cfg.variant = Variant::without_gf;
    cfg.loss.kind = LossSpec::Kind::l1;
    cfg.seed = 1;
    Checkpoint cp = train(train_set, val_set, small_unet(), cfg);
    CHECK(cp.optimizer.lr <= 1e-5);
    CHECK(cp.optimizer.lr >= 1e-6);
    // best checkpoint is never worse than the final evaluation
    CHECK(cp.best_val_loss <= cp.val_history.back() + 1e-15);
}

TEST_CASE("withGF training only updates the generator") {
    auto pairs = sr_pairs(25, 2);
    std::vector<ImagePair> train_set{pairs[0]};
    std::vector<ImagePair> val_set{pairs[1]};
    TrainConfig cfg = quick_config(10);
    cfg.variant = Variant::with_gf;
    Checkpoint cp = train(train_set, val_set, small_unet(), cfg);
    CHECK(cp.train.gf.window.radius == 2);  // untouched hyperparameter
    CHECK(cp.optimizer.step == 10);
}

TEST_CASE("divergence is reported as a numeric error") {
    auto pairs = sr_pairs(26, 2);
    std::vector<ImagePair> train_set{pairs[0]};
    std::vector<ImagePair> val_set{pairs[1]};
    // an absurd loss scale cannot diverge, but a huge constant shift can:
    // corrupt the ground truth to force loss > 1e6
    train_set[0].ground_truth = Image2D(32, 32, 2e6);
    TrainConfig cfg = quick_config(5);
    CHECK_THROWS_AS(train(train_set, val_set, small_unet(), cfg), numeric_error);
}

TEST_CASE("checkpoint round trip is byte-identical and restores inference") {
    TempDir dir("ckpt");
    auto pairs = sr_pairs(27, 3);
    std::vector<ImagePair> train_set(pairs.begin(), pairs.begin() + 2);
    std::vector<ImagePair> val_set(pairs.begin() + 2, pairs.end());
    TrainConfig cfg = quick_config(30);
    Checkpoint cp = train(train_set, val_set, small_unet(), cfg);

    std::string p1 = dir.file("a.dgfc");
    std::string p2 = dir.file("b.dgfc");
    save_checkpoint(cp, p1);
    Checkpoint loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);
    CHECK(read_file_bytes(p1) == read_file_bytes(p2));

    Network before = network_from_checkpoint(cp);
    Network after = network_from_checkpoint(loaded);
    Image2D pred_before = run_inference(&before, cfg.variant, pairs[2], cfg.gf);
    Image2D pred_after = run_inference(&after, cfg.variant, pairs[2], cfg.gf);
    CHECK(max_abs_diff(pred_before, pred_after) == 0.0);
}

TEST_CASE("corrupt checkpoints are rejected") {
    TempDir dir("ckpt_bad");
    auto pairs = sr_pairs(28, 2);
    TrainConfig cfg = quick_config(0);
    Checkpoint cp = train({pairs[0]}, {pairs[1]}, small_unet(), cfg);
    std::string path = dir.file("cp.dgfc");
    save_checkpoint(cp, path);

    std::string bytes = read_file_bytes(path);
    {
        std::ofstream out(dir.file("trunc.dgfc"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(dir.file("trunc.dgfc")), io_error);

    {
        std::string wrong = bytes;
        wrong[4] = 9;  // version
        std::ofstream out(dir.file("ver.dgfc"), std::ios::binary);
        out.write(wrong.data(), static_cast<std::streamsize>(wrong.size()));
    }
    CHECK_THROWS_AS(load_checkpoint(dir.file("ver.dgfc")), io_error);
}
