#include "dgf/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace dgf {

std::vector<ImagePair> make_dataset(const PhantomSpec& spec, Task task,
                                    const std::optional<NoiseSpec>& noise, int n) {
    if (n < 1) throw config_error("dataset needs at least one pair");
    if (task == Task::super_resolution && spec.size % kSrFactor != 0)
        throw config_error("SR phantoms need a size divisible by 4");

    std::vector<ImagePair> pairs;
    pairs.reserve(n);
    for (int k = 0; k < n; ++k) {
        PhantomSpec per = spec;
        per.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(k));
        Phantom ph = make_phantom(per);

        ImagePair pair;
        pair.guide = std::move(ph.modality_b);
        pair.ground_truth = std::move(ph.modality_a);
        pair.mask = std::move(ph.support);
        pair.meta.task = task;
        pair.meta.seed = per.seed;

        if (task == Task::super_resolution) {
            // Top-left sample of each 4x4 block.
            const int lw = spec.size / kSrFactor, lh = spec.size / kSrFactor;
            Image2D low(lw, lh);
            for (int y = 0; y < lh; ++y)
                for (int x = 0; x < lw; ++x)
                    low.at(x, y) = pair.ground_truth.at(x * kSrFactor, y * kSrFactor);
            pair.input = std::move(low);
            pair.meta.degradation = "nn-downsample-4";
        } else {
            if (noise) {
                NoiseSpec per_noise = *noise;
                per_noise.seed = derive_seed(noise->seed, static_cast<std::uint64_t>(k));
                pair.input = apply_noise(pair.ground_truth, per_noise);
                std::ostringstream tag;
                if (noise->kind == NoiseSpec::Kind::poisson)
                    tag << "poisson:" << format_g9(noise->photons_at_white);
                else
                    tag << "gaussian:" << format_g9(noise->sigma);
                pair.meta.degradation = tag.str();
            } else {
                pair.input = pair.ground_truth;
                pair.meta.degradation = "none";
            }
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

namespace {

std::string pair_file(int index, const char* role) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "pair%03d_%s.dgf1", index, role);
    return buf;
}

}  // namespace

void save_dataset(const std::vector<ImagePair>& pairs, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error(dir + ": cannot create directory");

    std::ofstream manifest(dir + "/manifest.csv", std::ios::binary | std::ios::trunc);
    if (!manifest) throw io_error(dir + "/manifest.csv: cannot open for writing");
    manifest << "id,task,input,guide,ground_truth,mask,seed,degradation\n";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        int idx = static_cast<int>(i);
        std::string fi = pair_file(idx, "input");
        std::string fg = pair_file(idx, "guide");
        std::string fl = pair_file(idx, "label");
        std::string fm = pair_file(idx, "mask");
        write_image_dgf1(p.input, dir + "/" + fi);
        write_image_dgf1(p.guide, dir + "/" + fg);
        write_image_dgf1(p.ground_truth, dir + "/" + fl);
        write_image_dgf1(mask_to_image(p.mask), dir + "/" + fm);
        manifest << idx << ',' << to_string(p.meta.task) << ',' << fi << ',' << fg
                 << ',' << fl << ',' << fm << ',' << p.meta.seed << ','
                 << p.meta.degradation << '\n';
    }
    if (!manifest) throw io_error(dir + "/manifest.csv: short write");
}

std::vector<ImagePair> load_dataset(const std::string& dir) {
    std::ifstream manifest(dir + "/manifest.csv");
    if (!manifest) throw io_error(dir + "/manifest.csv: cannot open");
    std::string line;
    if (!std::getline(manifest, line))
        throw io_error(dir + "/manifest.csv: empty manifest");

    std::vector<ImagePair> pairs;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        if (cols.size() != 8)
            throw io_error(dir + "/manifest.csv: malformed row '" + line + "'");
        ImagePair p;
        p.meta.task = task_from_string(cols[1]);
        p.input = read_image(dir + "/" + cols[2]);
        p.guide = read_image(dir + "/" + cols[3]);
        p.ground_truth = read_image(dir + "/" + cols[4]);
        p.mask = mask_from_image(read_image(dir + "/" + cols[5]));
        p.meta.seed = std::stoull(cols[6]);
        p.meta.degradation = cols[7];
        pairs.push_back(std::move(p));
    }
    if (pairs.empty()) throw io_error(dir + "/manifest.csv: no pairs listed");
    return pairs;
}

}  // namespace dgf
