// odam: generate toy data, train, evaluate and sweep outlier ratios.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "odam/cli.hpp"
#include "odam/textio.hpp"

namespace {

std::vector<double> parse_ratios(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : odam::split_list(s)) {
        const auto v = odam::parse_real(item);
        if (!v) throw odam::UsageError("bad ratio '" + item + "'");
        out.push_back(*v);
    }
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (const auto& item : odam::split_list(s)) {
        const auto v = odam::parse_int(item);
        if (!v || *v < 0) throw odam::UsageError("bad seed '" + item + "'");
        out.push_back(static_cast<std::uint64_t>(*v));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Outlier-aware domain-adaptive metric learning on synthetic cluster data"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "run", mode, directions, ratios, seeds = "1,2,3,4,5";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> data;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value configuration file");
        cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
        cmd->add_option("--seed", seed, "seed for data generation and training");
    };

    auto* gen = app.add_subcommand("gen", "write source.data and target.data");
    add_common(gen);

    auto* train = app.add_subcommand("train", "train one model on a source/target pair");
    add_common(train);
    train->add_option("--mode", mode, "siamese | siamese-da | siamese-da-out | da-outlier-detection");
    train->add_option("data", data, "source and target dataset files")->expected(2)->required();

    auto* eval = app.add_subcommand("eval", "evaluate the checkpoint in --out on a source/target pair");
    add_common(eval);
    eval->add_option("--directions", directions, "comma list of t2s, s2s, t2t");
    eval->add_option("data", data, "source and target dataset files")->expected(2)->required();

    auto* sweep = app.add_subcommand("sweep", "train and evaluate over outlier ratios and seeds");
    add_common(sweep);
    sweep->add_option("--ratios", ratios, "comma list of outlier ratios")->required();
    sweep->add_option("--seeds", seeds, "comma list of seeds")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        odam::RunConfig config = config_path.empty() ? odam::RunConfig{} : odam::load_config(config_path);
        if (seed) config.set_seed(*seed);
        if (!mode.empty()) {
            const auto m = odam::parse_mode(mode);
            if (!m) throw odam::UsageError("unknown mode '" + mode + "'");
            config.train.mode = *m;
        }
        if (!directions.empty()) config.directions = odam::parse_directions(directions);

        if (gen->parsed()) {
            odam::cmd_gen(config, out_dir, std::cout);
        } else if (train->parsed()) {
            odam::cmd_train(config, data[0], data[1], out_dir, std::cout);
        } else if (eval->parsed()) {
            odam::cmd_eval(config, out_dir, data[0], data[1], std::cout);
        } else if (sweep->parsed()) {
            odam::cmd_sweep(config, parse_ratios(ratios), parse_seeds(seeds), out_dir, std::cout);
        }
    } catch (const odam::UsageError& e) {
        std::cerr << "odam: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "odam: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
