#include "inrcodec/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace inrcodec;

namespace {

std::vector<int> parse_shape(const std::string& text) {
    std::vector<int> dims;
    std::string token;
    for (char c : text + "x") {
        if (c == 'x' || c == ',') {
            if (!token.empty()) dims.push_back(std::stoi(token));
            token.clear();
        } else {
            token += c;
        }
    }
    if (dims.empty()) throw CLI::ValidationError("--patch-shape", "expected dimensions like 32x32");
    return dims;
}

void add_model_flags(CLI::App* app, RunConfig& cfg) {
    app->add_option("--modality", cfg.modality, "image, audio, sphere or volume");
    app->add_option("--depth", cfg.depth, "number of sine layers");
    app->add_option("--width", cfg.width, "hidden units per layer");
    app->add_option("--latent-dim", cfg.latent_dim, "modulation latent size");
    app->add_option("--omega0", cfg.omega0, "sine frequency scale");
    app->add_option("--modulation", cfg.modulation, "shift, scale, scale_and_shift or none");
}

void add_fit_flags(CLI::App* app, RunConfig& cfg) {
    app->add_option("--inner-lr", cfg.inner_lr, "inner-loop learning rate");
    app->add_option("--inner-steps", cfg.inner_steps, "inner-loop steps (default 3 train / 10 encode)");
    app->add_option("--outer-lr", cfg.outer_lr, "outer-loop learning rate");
    app->add_option("--batch-size", cfg.batch_size, "signals per outer step");
    app->add_option("--epochs", cfg.epochs, "training epochs");
    app->add_option("--seed", cfg.seed, "run seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"implicit-network compression toolkit"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string patch_text, bits_text;

    CLI::App* train = app.add_subcommand("train", "meta-learn a base network and write a checkpoint");
    train->add_option("--train-dir", cfg.train_dir, "directory of training files")->required();
    train->add_option("--val-dir", cfg.val_dir, "directory of validation files");
    add_model_flags(train, cfg);
    add_fit_flags(train, cfg);
    train->add_option("--patch-shape", patch_text, "training patch shape, e.g. 32x32");
    train->add_option("--bits", bits_text, "quantizer bit width for calibration");
    train->add_option("--out", cfg.out, "output directory")->required();

    CLI::App* encode = app.add_subcommand("encode", "compress one signal against a checkpoint");
    encode->add_option("--checkpoint", cfg.checkpoints, "checkpoint file")->required();
    encode->add_option("--input", cfg.input, "signal file to compress")->required();
    encode->add_option("--inner-steps", cfg.inner_steps, "adaptation steps (default 10)");
    encode->add_option("--inner-lr", cfg.inner_lr, "adaptation learning rate");
    encode->add_option("--out", cfg.out, "output compressed file")->required();

    CLI::App* decode = app.add_subcommand("decode", "reconstruct a signal from a compressed file");
    decode->add_option("--checkpoint", cfg.checkpoints, "checkpoint file")->required();
    decode->add_option("--input", cfg.input, "compressed file")->required();
    decode->add_option("--out", cfg.out, "output signal file")->required();

    CLI::App* sweep = app.add_subcommand("rd-sweep", "rate-distortion table over bit widths");
    sweep->add_option("--checkpoint", cfg.checkpoints, "checkpoint file(s)")->required();
    sweep->add_option("--train-dir", cfg.train_dir, "calibration files")->required();
    sweep->add_option("--val-dir", cfg.val_dir, "evaluation files")->required();
    sweep->add_option("--bits", bits_text, "comma-separated bit widths, e.g. 3,4,5,6,7,8");
    sweep->add_option("--inner-steps", cfg.inner_steps, "adaptation steps (default 10)");
    sweep->add_option("--inner-lr", cfg.inner_lr, "adaptation learning rate");
    sweep->add_option("--out", cfg.out, "output directory")->required();

    CLI::App* ablate = app.add_subcommand("ablate", "train shift/scale/scale_and_shift variants");
    ablate->add_option("--train-dir", cfg.train_dir, "directory of training files")->required();
    ablate->add_option("--val-dir", cfg.val_dir, "directory of validation files")->required();
    add_model_flags(ablate, cfg);
    add_fit_flags(ablate, cfg);
    ablate->add_option("--patch-shape", patch_text, "training patch shape");
    ablate->add_option("--out", cfg.out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!patch_text.empty()) cfg.patch_shape = parse_shape(patch_text);
        if (!bits_text.empty()) cfg.bits = parse_shape(bits_text);
        if (train->parsed()) return cmd_train(cfg);
        if (encode->parsed()) return cmd_encode(cfg);
        if (decode->parsed()) return cmd_decode(cfg);
        if (sweep->parsed()) return cmd_rd_sweep(cfg);
        if (ablate->parsed()) return cmd_ablate(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
