#include "dgf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dgf {

void SweepResult::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out << "sweep_kind,param,variant,metric,value\n";
    for (const auto& r : rows)
        out << r.sweep_kind << ',' << format_g9(r.param) << ',' << r.variant << ','
            << r.metric << ',' << format_g9(r.value) << '\n';
    if (!out) throw io_error(path + ": short write");
}

void AttackResult::write_trace_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out << "iteration,objective,deviation,res_norm\n";
    for (const auto& p : trace)
        out << p.iteration << ',' << format_g9(p.objective) << ','
            << format_g9(p.deviation) << ',' << format_g9(p.res_norm) << '\n';
    if (!out) throw io_error(path + ": short write");
}

namespace {

Image2D upsampled_input(const ImagePair& pair) {
    Tensor low = Tensor::from_image(pair.input);
    return ad::bilinear_resize(low, pair.ground_truth.height(),
                               pair.ground_truth.width())
        .to_image();
}

const Image2D& lowfreq_reference(const ImagePair& pair, const Image2D& i_up) {
    return pair.meta.task == Task::super_resolution ? i_up : pair.ground_truth;
}

void require_variant(const Checkpoint& cp, Variant v, const char* what) {
    if (cp.train.variant != v)
        throw config_error(std::string(what) + " needs a " + to_string(v) +
                           " checkpoint, got " + to_string(cp.train.variant));
}

}  // namespace

SweepResult robustness_sweep(const Checkpoint& cp_with, const Checkpoint& cp_without,
                             const std::vector<ImagePair>& test_set,
                             const std::vector<double>& sigmas,
                             std::uint64_t noise_seed) {
    require_variant(cp_with, Variant::with_gf, "robustness sweep");
    require_variant(cp_without, Variant::without_gf, "robustness sweep");
    if (test_set.empty()) throw config_error("robustness sweep needs test pairs");
    for (std::size_t i = 1; i < sigmas.size(); ++i)
        if (sigmas[i] < sigmas[i - 1])
            throw config_error("sigma grid must be sorted ascending");

    Network net_with = network_from_checkpoint(cp_with);
    Network net_without = network_from_checkpoint(cp_without);

    struct Cell {
        double ssim_with = 0.0, ssim_without = 0.0;
    };
    const int n_pairs = static_cast<int>(test_set.size());
    const int n_cells = static_cast<int>(sigmas.size()) * n_pairs;
    std::vector<Cell> cells(n_cells);

    parallel_for(n_cells, [&](int cell) {
        const int si = cell / n_pairs;
        const int pi = cell % n_pairs;
        ImagePair corrupted = test_set[pi];
        if (sigmas[si] > 0.0) {
            NoiseSpec noise = NoiseSpec::gaussian(
                sigmas[si], derive_seed(noise_seed, static_cast<std::uint64_t>(cell)));
            corrupted.guide = apply_noise(corrupted.guide, noise);
        }
        Image2D p_with = run_inference(&net_with, Variant::with_gf, corrupted,
                                       cp_with.train.gf);
        Image2D p_without = run_inference(&net_without, Variant::without_gf,
                                          corrupted, cp_without.train.gf);
        cells[cell].ssim_with =
            ssim_masked(p_with, corrupted.ground_truth, corrupted.mask);
        cells[cell].ssim_without =
            ssim_masked(p_without, corrupted.ground_truth, corrupted.mask);
    });

    SweepResult result;
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        double acc_with = 0.0, acc_without = 0.0;
        for (int pi = 0; pi < n_pairs; ++pi) {
            acc_with += cells[si * n_pairs + pi].ssim_with;
            acc_without += cells[si * n_pairs + pi].ssim_without;
        }
        result.rows.push_back({"robustness", sigmas[si], "withGF", "ssim",
                               acc_with / n_pairs});
        result.rows.push_back({"robustness", sigmas[si], "withoutGF", "ssim",
                               acc_without / n_pairs});
    }
    return result;
}

SweepResult content_preservation_sweep(const Checkpoint& cp_with,
                                       const Checkpoint& cp_without,
                                       const std::vector<ImagePair>& test_set,
                                       const std::vector<int>& radii) {
    require_variant(cp_with, Variant::with_gf, "content preservation sweep");
    require_variant(cp_without, Variant::without_gf, "content preservation sweep");
    if (test_set.empty()) throw config_error("sweep needs test pairs");

    Network net_with = network_from_checkpoint(cp_with);
    Network net_without = network_from_checkpoint(cp_without);
    const int n_pairs = static_cast<int>(test_set.size());
    const int n_radii = static_cast<int>(radii.size());

    // one slot per (radius, pair) plus a trailing withoutGF column
    std::vector<double> lf(static_cast<std::size_t>(n_radii + 1) * n_pairs, 0.0);
    parallel_for((n_radii + 1) * n_pairs, [&](int cell) {
        const int ri = cell / n_pairs;
        const int pi = cell % n_pairs;
        const ImagePair& pair = test_set[pi];
        Image2D i_up = upsampled_input(pair);
        const Image2D& ref = lowfreq_reference(pair, i_up);
        Image2D pred;
        if (ri < n_radii) {
            GuidedFilterParams params = cp_with.train.gf;
            params.window.radius = radii[ri];
            pred = run_inference(&net_with, Variant::with_gf, pair, params);
        } else {
            pred = run_inference(&net_without, Variant::without_gf, pair,
                                 cp_without.train.gf);
        }
        lf[cell] = lowfreq_ssim(pred, ref, pair.mask);
    });

    SweepResult result;
    for (int ri = 0; ri < n_radii; ++ri) {
        double acc = 0.0;
        for (int pi = 0; pi < n_pairs; ++pi) acc += lf[ri * n_pairs + pi];
        result.rows.push_back({"radius", static_cast<double>(radii[ri]), "withGF",
                               "lowfreq_ssim", acc / n_pairs});
    }
    double acc = 0.0;
    for (int pi = 0; pi < n_pairs; ++pi) acc += lf[n_radii * n_pairs + pi];
    result.rows.push_back({"radius", 0.0, "withoutGF", "lowfreq_ssim", acc / n_pairs});
    return result;
}

SweepResult noise_level_sweep(const Checkpoint& cp_with, const Checkpoint& cp_without,
                              const std::vector<ImagePair>& test_set,
                              const std::vector<double>& photon_levels,
                              std::uint64_t noise_seed) {
    require_variant(cp_with, Variant::with_gf, "noise sweep");
    require_variant(cp_without, Variant::without_gf, "noise sweep");
    if (test_set.empty()) throw config_error("noise sweep needs test pairs");
    for (const auto& pair : test_set)
        if (pair.meta.task != Task::denoising)
            throw config_error("noise sweep needs denoising pairs");

    Network net_with = network_from_checkpoint(cp_with);
    Network net_without = network_from_checkpoint(cp_without);
    const int n_pairs = static_cast<int>(test_set.size());
    const int n_cells = static_cast<int>(photon_levels.size()) * n_pairs;

    struct Cell {
        double ssim_with, ssim_without, lf_with, lf_without;
    };
    std::vector<Cell> cells(n_cells);
    parallel_for(n_cells, [&](int cell) {
        const int li = cell / n_pairs;
        const int pi = cell % n_pairs;
        ImagePair noisy = test_set[pi];
        NoiseSpec noise = NoiseSpec::poisson(
            photon_levels[li], derive_seed(noise_seed, static_cast<std::uint64_t>(cell)));
        noisy.input = apply_noise(noisy.ground_truth, noise);
        Image2D p_with = run_inference(&net_with, Variant::with_gf, noisy,
                                       cp_with.train.gf);
        Image2D p_without = run_inference(&net_without, Variant::without_gf, noisy,
                                          cp_without.train.gf);
        cells[cell] = {ssim_masked(p_with, noisy.ground_truth, noisy.mask),
                       ssim_masked(p_without, noisy.ground_truth, noisy.mask),
                       lowfreq_ssim(p_with, noisy.ground_truth, noisy.mask),
                       lowfreq_ssim(p_without, noisy.ground_truth, noisy.mask)};
    });

    SweepResult result;
    for (std::size_t li = 0; li < photon_levels.size(); ++li) {
        Cell acc{};
        for (int pi = 0; pi < n_pairs; ++pi) {
            const Cell& c = cells[li * n_pairs + pi];
            acc.ssim_with += c.ssim_with;
            acc.ssim_without += c.ssim_without;
            acc.lf_with += c.lf_with;
            acc.lf_without += c.lf_without;
        }
        const double p = photon_levels[li];
        result.rows.push_back({"noise", p, "withGF", "ssim", acc.ssim_with / n_pairs});
        result.rows.push_back(
            {"noise", p, "withoutGF", "ssim", acc.ssim_without / n_pairs});
        result.rows.push_back(
            {"noise", p, "withGF", "lowfreq_ssim", acc.lf_with / n_pairs});
        result.rows.push_back(
            {"noise", p, "withoutGF", "lowfreq_ssim", acc.lf_without / n_pairs});
    }
    return result;
}

// --- adversarial attack -----------------------------------------------------

AttackResult train_attack(const Checkpoint& cp, const ImagePair& pair,
                          const AttackSpec& spec) {
    if (spec.lambda < 0.0) throw config_error("attack lambda must be >= 0");
    if (spec.iterations < 0) throw config_error("attack iterations must be >= 0");
    if (spec.target == Variant::only_gf)
        throw config_error("attack target must be withGF or withoutGF");
    require_variant(cp, spec.target, "attack");

    Network net = network_from_checkpoint(cp);

    std::vector<std::pair<std::string, Tensor>> residuals;
    residuals.emplace_back("e_i", Tensor(1, pair.input.height(), pair.input.width(), 0.0));
    residuals.emplace_back("e_g", Tensor(1, pair.guide.height(), pair.guide.width(), 0.0));
    OptimizerState opt = OptimizerState::init(residuals, spec.initial_lr);

    AttackResult result;
    double best_objective = 1e300;
    int plateau = 0;

    for (int it = 1; it <= spec.iterations; ++it) {
        ad::Tape tape;
        ad::NodeId e_i = tape.variable(residuals[0].second);
        ad::NodeId e_g = tape.variable(residuals[1].second);
        ad::NodeId input =
            ad::add(tape, tape.constant(Tensor::from_image(pair.input)), e_i);
        ad::NodeId guide =
            ad::add(tape, tape.constant(Tensor::from_image(pair.guide)), e_g);
        PipelineResult r = forward_pipeline(tape, &net, spec.target, pair.meta.task,
                                            input, guide, cp.train.gf, false);
        ad::NodeId target = tape.constant(Tensor::from_image(pair.ground_truth));
        LossSpec l1;
        l1.kind = LossSpec::Kind::l1;
        ad::NodeId deviation = loss_node(tape, r.prediction, target, l1, &pair.mask);
        ad::NodeId norm = ad::add(tape, ad::l2_norm(tape, e_i), ad::l2_norm(tape, e_g));
        ad::NodeId objective = ad::add(tape, ad::mul_scalar(tape, deviation, -1.0),
                                       ad::mul_scalar(tape, norm, spec.lambda));

        const double obj_value = tape.value(objective)[0];
        const double dev_value = tape.value(deviation)[0];
        const double norm_value = tape.value(norm)[0];
        if (!std::isfinite(obj_value)) {
            std::ostringstream trace;
            trace << "attack diverged at iteration " << it;
            throw numeric_error(trace.str());
        }
        result.trace.push_back({it, obj_value, dev_value, norm_value});

        tape.backward(objective);
        std::vector<Tensor> grads{tape.grad(e_i), tape.grad(e_g)};
        adam_step(residuals, grads, opt);

        if (obj_value < best_objective - 1e-12) {
            best_objective = obj_value;
            plateau = 0;
        } else if (++plateau >= spec.plateau_patience) {
            opt.lr = std::max(opt.lr * spec.decay_factor, spec.min_lr);
            plateau = 0;
        }
    }

    result.residual_input = residuals[0].second.to_image();
    result.residual_guide = residuals[1].second.to_image();
    for (double scale : {0.0, 0.25, 0.5, 1.0, 2.0}) {
        auto [pred, deviation] = apply_attack(cp, pair, result, scale);
        (void)pred;
        result.deviation_curve.emplace_back(scale, deviation);
    }
    return result;
}

namespace {

Image2D scaled_residual(const Image2D& residual, double lambda_adv) {
    double max_abs = 0.0;
    for (std::size_t i = 0; i < residual.size(); ++i)
        max_abs = std::max(max_abs, std::abs(residual[i]));
    Image2D out = residual;
    if (max_abs == 0.0) return out;  // untrained residual stays zero
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = out[i] / max_abs * lambda_adv;
    return out;
}

}  // namespace

std::pair<Image2D, double> apply_attack(const Checkpoint& cp, const ImagePair& pair,
                                        const AttackResult& result,
                                        double lambda_adversarial) {
    if (lambda_adversarial < 0.0)
        throw config_error("lambda_adversarial must be >= 0");
    Network net = network_from_checkpoint(cp);
    ImagePair attacked = pair;
    Image2D ei = scaled_residual(result.residual_input, lambda_adversarial);
    Image2D eg = scaled_residual(result.residual_guide, lambda_adversarial);
    if (!ei.same_dims(pair.input) || !eg.same_dims(pair.guide))
        throw contract_error("attack residual dimensions mismatch");
    for (std::size_t i = 0; i < attacked.input.size(); ++i)
        attacked.input[i] += ei[i];
    for (std::size_t i = 0; i < attacked.guide.size(); ++i)
        attacked.guide[i] += eg[i];
    Image2D pred = run_inference(&net, cp.train.variant, attacked, cp.train.gf);
    double deviation = mae_masked(pred, pair.ground_truth, pair.mask);
    return {std::move(pred), deviation};
}

// --- ablation ---------------------------------------------------------------

MetricReport ablation_run(const std::vector<ImagePair>& test_set, Task task,
                          const Checkpoint& cp_with, const Checkpoint& cp_without,
                          const GuidedFilterParams& only_gf_params) {
    require_variant(cp_with, Variant::with_gf, "ablation");
    require_variant(cp_without, Variant::without_gf, "ablation");
    if (test_set.empty()) throw config_error("ablation needs test pairs");

    Network net_with = network_from_checkpoint(cp_with);
    Network net_without = network_from_checkpoint(cp_without);
    for (const auto& pair : test_set)
        if (pair.meta.task != task)
            throw config_error("test pair task does not match the requested task");

    static const char* kVariants[] = {"baseline", "onlyGF", "withGF", "withoutGF"};
    const int n_pairs = static_cast<int>(test_set.size());
    std::vector<MetricRow> rows(static_cast<std::size_t>(n_pairs) * 4);

    parallel_for(n_pairs, [&](int pi) {
        const ImagePair& pair = test_set[pi];
        Image2D i_up = upsampled_input(pair);
        const Image2D& lf_ref = lowfreq_reference(pair, i_up);
        for (int vi = 0; vi < 4; ++vi) {
            Image2D pred;
            switch (vi) {
                case 0:
                    pred = task == Task::super_resolution ? i_up : pair.input;
                    break;
                case 1:
                    pred = run_inference(nullptr, Variant::only_gf, pair, only_gf_params);
                    break;
                case 2:
                    pred = run_inference(&net_with, Variant::with_gf, pair,
                                         cp_with.train.gf);
                    break;
                default:
                    pred = run_inference(&net_without, Variant::without_gf, pair,
                                         cp_without.train.gf);
            }
            MetricRow row;
            row.id = std::to_string(pi);
            row.variant = kVariants[vi];
            row.task = to_string(task);
            row.mae = mae_masked(pred, pair.ground_truth, pair.mask);
            row.ssim = ssim_masked(pred, pair.ground_truth, pair.mask);
            row.lowfreq_ssim = lowfreq_ssim(pred, lf_ref, pair.mask);
            rows[static_cast<std::size_t>(pi) * 4 + vi] = std::move(row);
        }
    });

    MetricReport report;
    report.rows = std::move(rows);
    return report;
}

double parameter_checksum(const Network& net) {
    double acc = 0.0;
    for (const auto& [name, t] : net.parameters())
        for (std::size_t i = 0; i < t.size(); ++i) acc += t[i];
    return acc;
}

}  // namespace dgf
