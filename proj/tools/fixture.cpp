// Writes a small synthetic workspace (features, manifests, labels and
// recipes) that exercises every featdist command.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "featdist/featdist.hpp"
#include "featdist/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string write_set(const featdist::FeatureMatrix& x, const fs::path& dir, const std::string& dataset,
                      const std::string& extractor, const std::string& layer, std::uint64_t seed) {
    const std::string stem = dataset + "_" + extractor + "_" + layer;
    const auto m = featdist::save_features(x, dir / (stem + ".npy"), dataset, extractor, layer,
                                           static_cast<std::int64_t>(seed));
    featdist::write_manifest(m, dir / (stem + ".json"));
    return stem + ".json";
}

void write_json(const ordered_json& j, const fs::path& file) {
    std::ofstream out(file);
    out << j.dump(2) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic featdist workspace"};
    std::string out_dir = "featdist-fixture";
    std::size_t n = 2000;
    std::size_t d = 32;
    std::uint64_t seed = 7;
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("-n", n, "Rows per real/syn feature set")->check(CLI::Range(2, 1000000));
    app.add_option("-d", d, "Feature dimension")->check(CLI::Range(1, 100000));
    app.add_option("--seed", seed, "Base seed");
    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path dir(out_dir);
        fs::create_directories(dir);

        ordered_json real = ordered_json::array();
        ordered_json syn = ordered_json::array();
        std::uint64_t stream = 0;
        for (const std::string extractor : {"convnext", "swav", "clip_vit"}) {
            for (const std::string layer : {"layer1", "layer2"}) {
                const auto rs = featdist::derive_seed(seed, stream++);
                const auto ss = featdist::derive_seed(seed, stream++);
                real.push_back(write_set(featdist::synthetic::isotropic(n, d, 0.0, rs), dir, "real", extractor, layer, rs));
                syn.push_back(write_set(featdist::synthetic::isotropic(n, d, 0.1, ss), dir, "model", extractor, layer, ss));
            }
        }
        ordered_json recipe = {
            {"model_id", "synthetic-model"},
            {"real", real},
            {"syn", syn},
            {"metrics", {"fd", "cka"}},
            {"kernel", {{"kind", "rbf"}, {"bandwidth_fraction", 1.0}}},
            {"normalization", "none"},
            {"seed", seed},
        };
        write_json(recipe, dir / "recipe_evaluate.json");

        featdist::synthetic::ClassConditionalParams p;
        p.n_real = n;
        p.n_pool = 4 * n;
        p.seed = seed;
        const auto cc = featdist::synthetic::class_conditional(p);
        const auto real_manifest = write_set(cc.real, dir, "real", "inception", "pool3", seed);
        const auto pool_manifest = write_set(cc.pool, dir, "pool", "inception", "pool3", seed);
        featdist::save_labels(dir / "real_inception_pool3.npy.labels.npy", cc.real_labels);
        featdist::save_labels(dir / "pool_inception_pool3.npy.labels.npy", cc.pool_labels);
        ordered_json attack = {
            {"model_id", "synthetic-pool"},
            {"real", {real_manifest}},
            {"syn", {pool_manifest}},
            {"metrics", {"fd", "cka"}},
            {"kernel", {{"kind", "rbf"}, {"bandwidth_fraction", 1.0}}},
            {"seed", seed},
            {"attack", {{"m", n}, {"num_classes", cc.num_classes}, {"noise_repeats", 5}}},
            {"sweep", {{"sizes", {n / 4, n / 2, n, 2 * n, 4 * n}}}},
        };
        write_json(attack, dir / "recipe_pool.json");
        std::cout << "wrote " << dir.string() << "/recipe_evaluate.json and recipe_pool.json\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
