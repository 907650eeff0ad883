// Command-line front end: dataset generation, training, inference,
// evaluation, sweeps, adversarial attack, and guidance-map inspection.
// All metric output goes through the CSV writers; stdout carries only
// progress and file locations.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dgf/config.hpp"

namespace {

using namespace dgf;

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig::from_config(KeyValueConfig::parse_text("", "."));
    return RunConfig::from_config(KeyValueConfig::parse_file(path));
}

std::vector<ImagePair> generate_pairs(const RunConfig& rc) {
    return make_dataset(rc.phantom, rc.task, rc.noise, rc.data_count);
}

void split_train_val(const std::vector<ImagePair>& all, int val_count,
                     std::vector<ImagePair>& train_set, std::vector<ImagePair>& val_set) {
    if (val_count < 1 || val_count >= static_cast<int>(all.size()))
        throw config_error("data.val_count must leave at least one training pair");
    train_set.assign(all.begin(), all.end() - val_count);
    val_set.assign(all.end() - val_count, all.end());
}

const ImagePair& pair_at(const std::vector<ImagePair>& pairs, int index) {
    if (index < 0 || index >= static_cast<int>(pairs.size()))
        throw config_error("pair index " + std::to_string(index) +
                           " out of range (dataset has " +
                           std::to_string(pairs.size()) + " pairs)");
    return pairs[index];
}

int cmd_gen(const std::string& config_path, const std::string& out_dir) {
    RunConfig rc = load_run_config(config_path);
    save_dataset(generate_pairs(rc), out_dir);
    std::cout << "wrote dataset to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_path) {
    RunConfig rc = load_run_config(config_path);
    std::vector<ImagePair> all = load_dataset(data_dir);
    std::vector<ImagePair> train_set, val_set;
    split_train_val(all, rc.val_count, train_set, val_set);
    Checkpoint cp = train(train_set, val_set, rc.generator, rc.train);
    save_checkpoint(cp, out_path);
    std::cout << "wrote checkpoint to " << out_path << "\n";
    return 0;
}

int cmd_infer(const std::string& checkpoint_path, const std::string& config_path,
              const std::string& data_dir, int index, const std::string& variant_name,
              const std::string& out_path) {
    Variant variant = variant_from_string(variant_name);
    const bool no_checkpoint = checkpoint_path.empty() || checkpoint_path == "none";
    if (variant == Variant::only_gf && !no_checkpoint)
        throw config_error("onlyGF takes no checkpoint; pass --checkpoint none");
    if (variant != Variant::only_gf && no_checkpoint)
        throw config_error("variant " + variant_name + " needs --checkpoint");

    Image2D pred;
    if (variant == Variant::only_gf) {
        RunConfig rc = load_run_config(config_path);
        std::vector<ImagePair> pairs = load_dataset(data_dir);
        pred = run_inference(nullptr, variant, pair_at(pairs, index), rc.gf);
    } else {
        Checkpoint cp = load_checkpoint(checkpoint_path);
        if (cp.train.variant != variant)
            throw config_error("checkpoint was trained as " +
                               to_string(cp.train.variant) + ", not " + variant_name);
        Network net = network_from_checkpoint(cp);
        std::vector<ImagePair> pairs = load_dataset(data_dir);
        pred = run_inference(&net, variant, pair_at(pairs, index), cp.train.gf);
    }
    write_image(pred, out_path);
    std::cout << "wrote prediction to " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& with_path, const std::string& without_path,
             const std::string& config_path, const std::string& data_dir,
             const std::string& out_csv) {
    RunConfig rc = load_run_config(config_path);
    Checkpoint cp_with = load_checkpoint(with_path);
    Checkpoint cp_without = load_checkpoint(without_path);
    std::vector<ImagePair> pairs = load_dataset(data_dir);
    MetricReport report =
        ablation_run(pairs, pairs.front().meta.task, cp_with, cp_without, rc.gf);
    report.write_csv(out_csv);
    std::cout << "wrote metrics to " << out_csv << "\n";
    return 0;
}

int cmd_sweep(const std::string& kind, const std::string& with_path,
              const std::string& without_path, const std::string& config_path,
              const std::string& data_dir, const std::string& out_csv) {
    RunConfig rc = load_run_config(config_path);
    Checkpoint cp_with = load_checkpoint(with_path);
    Checkpoint cp_without = load_checkpoint(without_path);
    std::vector<ImagePair> pairs = load_dataset(data_dir);

    SweepResult result;
    if (kind == "robustness") {
        result = robustness_sweep(cp_with, cp_without, pairs, rc.sweep_sigmas,
                                  derive_seed(rc.seed, 0x5eed));
    } else if (kind == "radius") {
        result = content_preservation_sweep(cp_with, cp_without, pairs, rc.sweep_radii);
    } else if (kind == "noise") {
        result = noise_level_sweep(
            cp_with, cp_without, pairs,
            {kPoissonPhotonsLow, kPoissonPhotonsMedium, kPoissonPhotonsStrong},
            derive_seed(rc.seed, 0xa01));
    } else {
        throw config_error("sweep kind must be radius | noise | robustness");
    }
    result.write_csv(out_csv);
    std::cout << "wrote sweep to " << out_csv << "\n";
    return 0;
}

int cmd_attack(const std::string& checkpoint_path, const std::string& config_path,
               const std::string& data_dir, int index, const std::string& out_dir) {
    RunConfig rc = load_run_config(config_path);
    Checkpoint cp = load_checkpoint(checkpoint_path);
    std::vector<ImagePair> pairs = load_dataset(data_dir);
    const ImagePair& pair = pair_at(pairs, index);

    AttackSpec spec = rc.attack;
    spec.target = cp.train.variant;
    AttackResult result = train_attack(cp, pair, spec);

    std::filesystem::create_directories(out_dir);
    write_image_dgf1(result.residual_input, out_dir + "/residual_input.dgf1");
    write_image_dgf1(result.residual_guide, out_dir + "/residual_guide.dgf1");
    result.write_trace_csv(out_dir + "/trace.csv");

    SweepResult curve;
    for (const auto& [scale, deviation] : result.deviation_curve)
        curve.rows.push_back({"attack", scale, to_string(cp.train.variant), "mae",
                              deviation});
    curve.write_csv(out_dir + "/deviation_curve.csv");
    std::cout << "wrote attack artifacts to " << out_dir << "\n";
    return 0;
}

int cmd_inspect(const std::string& checkpoint_path, const std::string& data_dir,
                int index, const std::string& out_dir) {
    Checkpoint cp = load_checkpoint(checkpoint_path);
    if (cp.train.variant != Variant::with_gf)
        throw config_error("inspect needs a withGF checkpoint");
    Network net = network_from_checkpoint(cp);
    std::vector<ImagePair> pairs = load_dataset(data_dir);
    const ImagePair& pair = pair_at(pairs, index);

    const bool sr = pair.meta.task == Task::super_resolution;
    Tensor input = Tensor::from_image(pair.input);
    Tensor guide = Tensor::from_image(pair.guide);
    Tensor i_up = sr ? ad::bilinear_resize(input, pair.ground_truth.height(),
                                           pair.ground_truth.width())
                     : input;

    auto guidance = [&](const Tensor& in_t, const Tensor& g_t) {
        ad::Tape tape;
        ad::NodeId in_node = tape.constant(in_t);
        ad::NodeId g_node = tape.constant(g_t);
        ad::NodeId up_node = -1;
        ad::NodeId net_input = in_node;
        if (net.config().architecture == Architecture::wdsr_mini) {
            up_node = tape.constant(ad::bilinear_resize(
                in_t, pair.ground_truth.height(), pair.ground_truth.width()));
        } else if (sr) {
            net_input = tape.constant(ad::bilinear_resize(
                in_t, pair.ground_truth.height(), pair.ground_truth.width()));
        }
        auto fb = net.forward(tape, net_input, g_node, up_node, false);
        return tape.value(fb.output).to_image();
    };

    std::filesystem::create_directories(out_dir);
    Tensor zero_in(input.shape(), 0.0);
    Tensor zero_guide(guide.shape(), 0.0);
    write_image_dgf1(guidance(input, guide), out_dir + "/guidance_full.dgf1");
    write_image_dgf1(guidance(input, zero_guide), out_dir + "/guidance_no_guide.dgf1");
    write_image_dgf1(guidance(zero_in, guide), out_dir + "/guidance_no_input.dgf1");
    write_image_dgf1(i_up.to_image(), out_dir + "/input_upsampled.dgf1");
    std::cout << "wrote guidance maps to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-modal deep guided filtering pipeline"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_path, checkpoint_path;
    std::string with_path, without_path, variant_name = "withGF", sweep_kind;
    int index = 0;

    auto* gen = app.add_subcommand("gen", "generate a phantom dataset");
    gen->add_option("--config", config_path, "run config file");
    gen->add_option("--out", out_path, "output dataset directory")->required();

    auto* train_cmd = app.add_subcommand("train", "train a guidance-map generator");
    train_cmd->add_option("--config", config_path, "run config file");
    train_cmd->add_option("--data", data_dir, "dataset directory")->required();
    train_cmd->add_option("--out", out_path, "checkpoint output path")->required();

    auto* infer = app.add_subcommand("infer", "run inference on one pair");
    infer->add_option("--checkpoint", checkpoint_path,
                      "checkpoint path ('none' for onlyGF)");
    infer->add_option("--config", config_path, "run config file (onlyGF params)");
    infer->add_option("--data", data_dir, "dataset directory")->required();
    infer->add_option("--index", index, "pair index");
    infer->add_option("--variant", variant_name, "withGF | withoutGF | onlyGF");
    infer->add_option("--out", out_path, "prediction output image")->required();

    auto* eval = app.add_subcommand("eval", "ablation metrics CSV");
    eval->add_option("--with", with_path, "withGF checkpoint")->required();
    eval->add_option("--without", without_path, "withoutGF checkpoint")->required();
    eval->add_option("--config", config_path, "run config file");
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--out", out_path, "metrics CSV path")->required();

    auto* sweep = app.add_subcommand("sweep", "parameter sweeps");
    sweep->add_option("kind", sweep_kind, "radius | noise | robustness")->required();
    sweep->add_option("--with", with_path, "withGF checkpoint")->required();
    sweep->add_option("--without", without_path, "withoutGF checkpoint")->required();
    sweep->add_option("--config", config_path, "run config file");
    sweep->add_option("--data", data_dir, "dataset directory")->required();
    sweep->add_option("--out", out_path, "sweep CSV path")->required();

    auto* attack = app.add_subcommand("attack", "train an adversarial attack");
    attack->add_option("--checkpoint", checkpoint_path, "target checkpoint")->required();
    attack->add_option("--config", config_path, "run config file");
    attack->add_option("--data", data_dir, "dataset directory")->required();
    attack->add_option("--index", index, "pair index");
    attack->add_option("--out", out_path, "output directory")->required();

    auto* inspect = app.add_subcommand("inspect", "guidance-map shutout dumps");
    inspect->add_option("--checkpoint", checkpoint_path, "withGF checkpoint")->required();
    inspect->add_option("--data", data_dir, "dataset directory")->required();
    inspect->add_option("--index", index, "pair index");
    inspect->add_option("--out", out_path, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(config_path, out_path);
        if (train_cmd->parsed()) return cmd_train(config_path, data_dir, out_path);
        if (infer->parsed())
            return cmd_infer(checkpoint_path, config_path, data_dir, index,
                             variant_name, out_path);
        if (eval->parsed())
            return cmd_eval(with_path, without_path, config_path, data_dir, out_path);
        if (sweep->parsed())
            return cmd_sweep(sweep_kind, with_path, without_path, config_path,
                             data_dir, out_path);
        if (attack->parsed())
            return cmd_attack(checkpoint_path, config_path, data_dir, index, out_path);
        if (inspect->parsed())
            return cmd_inspect(checkpoint_path, data_dir, index, out_path);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const contract_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
