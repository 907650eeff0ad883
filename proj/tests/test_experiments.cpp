#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dgf/experiments.hpp"
#include "test_support.hpp"

using namespace dgf;
using namespace dgf_test;

namespace {

struct Fixture {
    std::vector<ImagePair> train_set, val_set, test_set;
    Checkpoint cp_with, cp_without;

    Fixture() {
        PhantomSpec spec;
        spec.seed = 31;
        spec.size = 32;
        auto pairs = make_dataset(spec, Task::super_resolution, std::nullopt, 4);
        train_set.assign(pairs.begin(), pairs.begin() + 2);
        val_set.assign(pairs.begin() + 2, pairs.begin() + 3);
        PhantomSpec held;
        held.seed = 131;
        held.size = 32;
        test_set = make_dataset(held, Task::super_resolution, std::nullopt, 2);

        GeneratorConfig gen;
        gen.encoder_depth = 2;
        gen.base_channels = 4;
        gen.seed = 8;
        TrainConfig cfg;
        cfg.initial_lr = 1e-3;
        cfg.max_iterations = 60;
        cfg.validation_cadence = 30;
        cfg.loss.kind = LossSpec::Kind::l1;
        cfg.seed = 5;
        cfg.gf = GuidedFilterParams{WindowSpec{2}, 1e-4};
        cfg.variant = Variant::with_gf;
        cp_with = train(train_set, val_set, gen, cfg);
        cfg.variant = Variant::without_gf;
        cp_without = train(train_set, val_set, gen, cfg);
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("robustness sweep: sigma 0 equals the clean evaluation, full grid") {
    const auto& f = fixture();
    std::vector<double> sigmas{0.0, 0.1};
    SweepResult sweep = robustness_sweep(f.cp_with, f.cp_without, f.test_set,
                                         sigmas, 99);
    REQUIRE(sweep.rows.size() == sigmas.size() * 2);

    Network net_with = network_from_checkpoint(f.cp_with);
    double clean = 0.0;
    for (const auto& pair : f.test_set) {
        Image2D pred = run_inference(&net_with, Variant::with_gf, pair,
                                     f.cp_with.train.gf);
        clean += ssim_masked(pred, pair.ground_truth, pair.mask);
    }
    clean /= static_cast<double>(f.test_set.size());

    bool found = false;
    for (const auto& row : sweep.rows)
        if (row.param == 0.0 && row.variant == "withGF") {
            CHECK(row.value == doctest::Approx(clean).epsilon(1e-12));
            found = true;
        }
    CHECK(found);
}

TEST_CASE("robustness sweep rejects unsorted grids and wrong variants") {
    const auto& f = fixture();
    CHECK_THROWS_AS(robustness_sweep(f.cp_with, f.cp_without, f.test_set,
                                     {0.2, 0.1}, 1),
                    config_error);
    CHECK_THROWS_AS(robustness_sweep(f.cp_without, f.cp_with, f.test_set,
                                     {0.0, 0.1}, 1),
                    config_error);
}

TEST_CASE("content preservation sweep emits n+1 rows") {
    const auto& f = fixture();
    std::vector<int> radii{2, 4};
    SweepResult sweep =
        content_preservation_sweep(f.cp_with, f.cp_without, f.test_set, radii);
    REQUIRE(sweep.rows.size() == radii.size() + 1);
    CHECK(sweep.rows.back().variant == "withoutGF");
    for (const auto& row : sweep.rows) {
        CHECK(row.metric == "lowfreq_ssim");
        CHECK(row.value <= 1.0);
        CHECK(row.value >= -1.0);
    }
}

TEST_CASE("sweep CSVs are byte-stable across runs") {
    const auto& f = fixture();
    TempDir dir("sweep");
    std::vector<double> sigmas{0.0, 0.05};
    robustness_sweep(f.cp_with, f.cp_without, f.test_set, sigmas, 7)
        .write_csv(dir.file("a.csv"));
    robustness_sweep(f.cp_with, f.cp_without, f.test_set, sigmas, 7)
        .write_csv(dir.file("b.csv"));
    std::string a = read_file_bytes(dir.file("a.csv"));
    CHECK(a == read_file_bytes(dir.file("b.csv")));
    CHECK(a.rfind("sweep_kind,param,variant,metric,value\n", 0) == 0);
}

TEST_CASE("attack with zero iterations leaves inputs and prediction clean") {
    const auto& f = fixture();
    AttackSpec spec;
    spec.iterations = 0;
    spec.target = Variant::with_gf;
    AttackResult res = train_attack(f.cp_with, f.test_set[0], spec);
    CHECK(res.trace.empty());
    for (std::size_t i = 0; i < res.residual_input.size(); ++i)
        CHECK(res.residual_input[i] == 0.0);

    auto [pred, deviation] = apply_attack(f.cp_with, f.test_set[0], res, 1.0);
    Network net = network_from_checkpoint(f.cp_with);
    Image2D clean = run_inference(&net, Variant::with_gf, f.test_set[0],
                                  f.cp_with.train.gf);
    CHECK(max_abs_diff(pred, clean) == 0.0);
    CHECK(deviation ==
          doctest::Approx(mae_masked(clean, f.test_set[0].ground_truth,
                                     f.test_set[0].mask))
              .epsilon(1e-12));
}

TEST_CASE("attack trains a nonzero residual and never touches the weights") {
    const auto& f = fixture();
    Network before = network_from_checkpoint(f.cp_with);
    double checksum_before = parameter_checksum(before);

    AttackSpec spec;
    spec.iterations = 20;
    spec.lambda = 0.01;
    spec.target = Variant::with_gf;
    AttackResult res = train_attack(f.cp_with, f.test_set[0], spec);
    CHECK(res.trace.size() == 20);
    double norm = 0.0;
    for (std::size_t i = 0; i < res.residual_input.size(); ++i)
        norm += res.residual_input[i] * res.residual_input[i];
    CHECK(norm > 0.0);

    Network after = network_from_checkpoint(f.cp_with);
    CHECK(parameter_checksum(after) == checksum_before);
    // trace CSV schema
    TempDir dir("attack");
    res.write_trace_csv(dir.file("trace.csv"));
    std::string text = read_file_bytes(dir.file("trace.csv"));
    CHECK(text.rfind("iteration,objective,deviation,res_norm\n", 0) == 0);
}

TEST_CASE("a dominant norm penalty drives the residuals to zero") {
    const auto& f = fixture();
    AttackSpec spec;
    spec.iterations = 250;
    spec.lambda = 1e6;
    spec.target = Variant::with_gf;
    AttackResult res = train_attack(f.cp_with, f.test_set[0], spec);
    double norm_i = 0.0, norm_g = 0.0;
    for (std::size_t i = 0; i < res.residual_input.size(); ++i)
        norm_i += res.residual_input[i] * res.residual_input[i];
    for (std::size_t i = 0; i < res.residual_guide.size(); ++i)
        norm_g += res.residual_guide[i] * res.residual_guide[i];
    CHECK(std::sqrt(norm_i) < 1e-3);
    CHECK(std::sqrt(norm_g) < 1e-3);
}

TEST_CASE("apply_attack at lambda 0 is exactly the clean pipeline") {
    const auto& f = fixture();
    AttackSpec spec;
    spec.iterations = 10;
    spec.target = Variant::without_gf;
    AttackResult res = train_attack(f.cp_without, f.test_set[0], spec);
    auto [pred, deviation] = apply_attack(f.cp_without, f.test_set[0], res, 0.0);
    Network net = network_from_checkpoint(f.cp_without);
    Image2D clean = run_inference(&net, Variant::without_gf, f.test_set[0],
                                  f.cp_without.train.gf);
    CHECK(max_abs_diff(pred, clean) == 0.0);
    CHECK(deviation == doctest::Approx(mae_masked(clean,
                                                  f.test_set[0].ground_truth,
                                                  f.test_set[0].mask))
                           .epsilon(1e-12));
}

TEST_CASE("ablation report has one row per variant and image") {
    const auto& f = fixture();
    MetricReport report = ablation_run(f.test_set, Task::super_resolution, f.cp_with,
                                       f.cp_without, f.cp_with.train.gf);
    REQUIRE(report.rows.size() == f.test_set.size() * 4);
    std::size_t with_rows = 0;
    for (const auto& row : report.rows) {
        CHECK(std::isfinite(row.mae));
        CHECK(std::isfinite(row.ssim));
        CHECK(std::isfinite(row.lowfreq_ssim));
        if (row.variant == "withGF") ++with_rows;
    }
    CHECK(with_rows == f.test_set.size());
}

TEST_CASE("onlyGF denoising with a clean self-guide is near-exact smoothing") {
    PhantomSpec spec;
    spec.seed = 55;
    spec.size = 32;
    ImagePair pair = make_dataset(spec, Task::denoising, std::nullopt, 1)[0];
    pair.guide = pair.ground_truth;  // the clean image guides itself
    GuidedFilterParams p{WindowSpec{2}, 1e-6};
    Image2D pred = run_inference(nullptr, Variant::only_gf, pair, p);
    double mae = mae_masked(pred, pair.ground_truth, pair.mask);
    CHECK(mae < 5e-3);  // bounded by the double-smoothing residual
}

TEST_CASE("noise level sweep covers the grid for denoising pairs") {
    PhantomSpec spec;
    spec.seed = 41;
    spec.size = 32;
    auto pairs = make_dataset(spec, Task::denoising,
                              NoiseSpec::poisson(1000, 3), 3);
    std::vector<ImagePair> train_set{pairs[0]}, val_set{pairs[1]},
        test_set{pairs[2]};
    GeneratorConfig gen;
    gen.encoder_depth = 2;
    gen.base_channels = 4;
    gen.seed = 8;
    TrainConfig cfg;
    cfg.initial_lr = 1e-3;
    cfg.max_iterations = 20;
    cfg.validation_cadence = 10;
    cfg.loss.kind = LossSpec::Kind::l1;
    cfg.seed = 5;
    cfg.variant = Variant::with_gf;
    Checkpoint with = train(train_set, val_set, gen, cfg);
    cfg.variant = Variant::without_gf;
    Checkpoint without = train(train_set, val_set, gen, cfg);

    SweepResult sweep = noise_level_sweep(with, without, test_set,
                                          {4000.0, 1000.0}, 9);
    CHECK(sweep.rows.size() == 2 * 4);
    CHECK_THROWS_AS(noise_level_sweep(with, without, fixture().test_set,
                                      {1000.0}, 9),
                    config_error);
}
