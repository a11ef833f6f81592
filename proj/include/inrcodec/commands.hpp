#pragma once

#include "inrcodec/codec.hpp"

#include <string>
#include <vector>

namespace inrcodec {

struct RunConfig {
    std::string train_dir;
    std::string val_dir;
    std::string modality = "image";
    std::string modulation = "shift";
    int depth = 5;
    int width = 64;
    int latent_dim = 32;
    double omega0 = 50.0;
    double inner_lr = 1e-2;
    int inner_steps = -1;  // -1: per-command default (3 for training, 10 for encoding)
    double outer_lr = 3e-6;
    int batch_size = 16;
    int epochs = 1;
    long max_outer_steps = 0;  // 0: run all epochs
    std::vector<int> patch_shape;
    std::vector<int> bits = {5};
    uint64_t seed = 0;
    std::string out;  // directory for train/rd-sweep/ablate, file for encode/decode
    std::vector<std::string> checkpoints;
    std::string input;

    int train_inner_steps() const { return inner_steps >= 0 ? inner_steps : 3; }
    int encode_inner_steps() const { return inner_steps >= 0 ? inner_steps : 10; }
};

// Exit status 0 iff all requested work completed; failing files are listed on
// standard error.
int cmd_train(const RunConfig& cfg);
int cmd_encode(const RunConfig& cfg);
int cmd_decode(const RunConfig& cfg);
int cmd_rd_sweep(const RunConfig& cfg);
int cmd_ablate(const RunConfig& cfg);

// Shared helpers (also used by the test suites).
std::vector<std::string> list_files_sorted(const std::string& dir);
std::vector<Signal> load_dir(const std::string& dir, Modality modality, std::vector<std::string>* failures);
SirenConfig siren_config_from(const RunConfig& cfg, Modality modality, int channels);

// Adapts every patch of every signal and returns the modulation corpus.
std::vector<Modulations> adapt_corpus(const SirenConfig& cfg, const BaseParams& theta,
                                      const std::vector<Signal>& signals, const std::vector<int>& patch_shape,
                                      const InnerConfig& inner);

// Calibrates quantizer and frequency model from training-set modulations.
void calibrate_checkpoint(ModelCheckpoint& cp, const std::vector<Signal>& train_set, const InnerConfig& inner,
                          int bits);

}  // namespace inrcodec
