#include "inrcodec/commands.hpp"
#include "inrcodec/digest.hpp"
#include "testutil.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace inrcodec;
using namespace testutil;

namespace {

void write_texture_pgms(const std::string& dir, int count, int size, uint64_t seed) {
    std::filesystem::create_directories(dir);
    auto textures = make_textures(count, size, size, seed);
    for (int i = 0; i < count; i++) {
        char name[32];
        std::snprintf(name, sizeof(name), "t%03d.pgm", i);
        Signal s = textures[(size_t)i];
        s.raw_min = 0;
        s.raw_max = 255;
        save_signal(s, dir + "/" + name);
    }
}

RunConfig tiny_train_config(const TempDir& dir) {
    RunConfig cfg;
    cfg.train_dir = dir.str("train");
    cfg.val_dir = dir.str("val");
    cfg.depth = 2;
    cfg.width = 8;
    cfg.latent_dim = 4;
    cfg.omega0 = 10.0;
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.seed = 7;
    cfg.patch_shape = {8, 8};
    cfg.bits = {5};
    cfg.out = dir.str("out");
    return cfg;
}

std::vector<uint8_t> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("cmd_train: writes checkpoint and per-epoch metrics, deterministic") {
    TempDir dir("cmdtrain");
    write_texture_pgms(dir.str("train"), 8, 8, 100);
    write_texture_pgms(dir.str("val"), 2, 8, 200);
    RunConfig cfg = tiny_train_config(dir);

    CHECK(cmd_train(cfg) == 0);
    auto ckpt = slurp(dir.str("out") + "/checkpoint.ckpt");

    std::ifstream metrics(dir.str("out") + "/metrics.csv");
    std::string header, row1, row2, extra;
    std::getline(metrics, header);
    CHECK(header == "epoch,outer_step,train_loss,val_psnr_db");
    CHECK(std::getline(metrics, row1).good());
    CHECK(std::getline(metrics, row2).good());
    CHECK_FALSE(std::getline(metrics, extra).good());  // one row per epoch

    // identical run under a fresh output directory gives an identical checkpoint
    RunConfig cfg2 = cfg;
    cfg2.out = dir.str("out2");
    CHECK(cmd_train(cfg2) == 0);
    CHECK(slurp(dir.str("out2") + "/checkpoint.ckpt") == ckpt);
}

TEST_CASE("cmd_train: zero epochs calibrates from the initialized network") {
    TempDir dir("cmdtrain0");
    write_texture_pgms(dir.str("train"), 4, 8, 300);
    RunConfig cfg = tiny_train_config(dir);
    cfg.val_dir.clear();
    cfg.epochs = 0;
    cfg.inner_steps = 0;  // zero-step modulations: all-zero latents, degenerate sigma
    CHECK(cmd_train(cfg) == 0);
    ModelCheckpoint cp = load_checkpoint(dir.str("out") + "/checkpoint.ckpt");
    for (long i = 0; i < cp.qp.sigma.size(); i++) {
        CHECK(cp.qp.sigma[i] == 0.0);
        CHECK(cp.qp.mu[i] == 0.0);
    }
    // smoothing only: symbol 0 observed for every patch, the rest are floor counts
    CHECK(cp.fm.counts[0] > 1);
    CHECK(cp.fm.counts[1] == 1);
}

TEST_CASE("cmd_train: empty dataset fails, unreadable files are reported") {
    TempDir dir("cmdtrainbad");
    std::filesystem::create_directories(dir.str("train"));
    RunConfig cfg = tiny_train_config(dir);
    cfg.val_dir.clear();
    CHECK_THROWS_AS(cmd_train(cfg), ValueError);

    // one valid texture plus one corrupt file: completes but reports failure
    write_texture_pgms(dir.str("train"), 2, 8, 400);
    std::ofstream(dir.str("train") + "/broken.pgm") << "not a pgm";
    RunConfig cfg2 = tiny_train_config(dir);
    cfg2.val_dir.clear();
    cfg2.out = dir.str("out_b");
    cfg2.epochs = 1;
    CHECK(cmd_train(cfg2) == 1);
}

TEST_CASE("cmd_train: output directory lock") {
    TempDir dir("cmdlock");
    write_texture_pgms(dir.str("train"), 2, 8, 500);
    RunConfig cfg = tiny_train_config(dir);
    cfg.val_dir.clear();
    cfg.epochs = 0;
    std::filesystem::create_directories(cfg.out);
    std::ofstream(cfg.out + "/.lock") << "";
    CHECK_THROWS_AS(cmd_train(cfg), IoError);
}

TEST_CASE("cmd_encode/cmd_decode: pgm in, pgm out, identical dimensions") {
    TempDir dir("cmdcodec");
    write_texture_pgms(dir.str("train"), 6, 8, 600);
    RunConfig train_cfg = tiny_train_config(dir);
    train_cfg.val_dir.clear();
    train_cfg.epochs = 1;
    REQUIRE(cmd_train(train_cfg) == 0);

    RunConfig enc;
    enc.checkpoints = {dir.str("out") + "/checkpoint.ckpt"};
    enc.input = dir.str("train") + "/t000.pgm";
    enc.out = dir.str("t0.cpp+");
    CHECK(cmd_encode(enc) == 0);

    RunConfig dec = enc;
    dec.input = dir.str("t0.cpp+");
    dec.out = dir.str("t0_out.pgm");
    CHECK(cmd_decode(dec) == 0);

    Signal in = load_signal(enc.input, Modality::kImage);
    Signal out = load_signal(dec.out, Modality::kImage);
    CHECK(in.feature_shape == out.feature_shape);
    CHECK(in.channels == out.channels);

    // zero adaptation steps: every patch carries the zero-latent symbols
    RunConfig enc0 = enc;
    enc0.inner_steps = 0;
    enc0.out = dir.str("t0_s0.cpp+");
    CHECK(cmd_encode(enc0) == 0);
    ModelCheckpoint cp = load_checkpoint(enc.checkpoints[0]);
    CompressedObject obj = load_object(enc0.out);
    SymbolStream syms = ac_decode(obj.payload, (size_t)obj.patch_count * obj.latent_dim, cp.fm);
    SymbolStream zero_syms = quantize(zero_modulations(cp.cfg), cp.qp);
    REQUIRE(!zero_syms.empty());
    for (size_t i = 0; i < syms.size(); i++) CHECK(syms[i] == zero_syms[i % zero_syms.size()]);
}

TEST_CASE("cmd_rd_sweep: row cardinality and bound columns") {
    TempDir dir("cmdsweep");
    write_texture_pgms(dir.str("train"), 6, 8, 700);
    write_texture_pgms(dir.str("val"), 3, 8, 701);
    RunConfig train_cfg = tiny_train_config(dir);
    train_cfg.epochs = 1;
    REQUIRE(cmd_train(train_cfg) == 0);

    RunConfig sweep;
    sweep.checkpoints = {dir.str("out") + "/checkpoint.ckpt"};
    sweep.train_dir = dir.str("train");
    sweep.val_dir = dir.str("val");
    sweep.bits = {3, 4, 5, 6, 7, 8};
    sweep.inner_steps = 3;
    sweep.out = dir.str("sweep");
    CHECK(cmd_rd_sweep(sweep) == 0);

    std::ifstream csv(dir.str("sweep") + "/rd_sweep.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "checkpoint,bits,psnr_fp_db,bpp_fp,psnr_quant_db,bpp_quant_raw,bpp_entropy,bpp_entropy_per_value");
    int rows = 0;
    while (std::getline(csv, line)) {
        rows++;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        REQUIRE(fields.size() == 8);
        double raw = std::stod(fields[5]), ec = std::stod(fields[6]);
        // entropy-coded size stays within coder overhead of the raw packing
        double patches = 1.0;  // 8x8 signal, 8x8 patches
        CHECK(ec <= raw + 64.0 * patches / 64.0 + 1e-9);
    }
    CHECK(rows == 6);
}

TEST_CASE("cmd_ablate: exactly three rows") {
    TempDir dir("cmdablate");
    write_texture_pgms(dir.str("train"), 4, 8, 800);
    write_texture_pgms(dir.str("val"), 2, 8, 801);
    RunConfig cfg = tiny_train_config(dir);
    cfg.epochs = 1;
    cfg.out = dir.str("ablate");
    CHECK(cmd_ablate(cfg) == 0);

    std::ifstream csv(dir.str("ablate") + "/ablate.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "modulation,val_psnr_db");
    std::vector<std::string> rows;
    while (std::getline(csv, line)) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].starts_with("shift,"));
    CHECK(rows[1].starts_with("scale,"));
    CHECK(rows[2].starts_with("scale_and_shift,"));
}
