#include "inrcodec/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace inrcodec {

namespace {

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

std::string fmt_psnr(double psnr) { return fmt("%.6f", std::min(psnr, kPsnrCapDb)); }

// Exclusive ownership of an output directory for the process lifetime.
class DirLock {
  public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
        fs::create_directories(dir);
        std::FILE* f = std::fopen(path_.c_str(), "wx");  // fails if the lock exists
        if (!f) throw IoError("output directory '" + dir.string() + "' is locked by another run");
        std::fclose(f);
    }
    ~DirLock() { std::error_code ec; fs::remove(path_, ec); }

  private:
    fs::path path_;
};

Modality parse_modality(const RunConfig& cfg) { return modality_from_name(cfg.modality); }

void require(bool ok, const std::string& message) {
    if (!ok) throw ValueError(message);
}

std::vector<int> effective_patch_shape(const RunConfig& cfg, const Signal& first) {
    // Sphere signals are single unpatched datapoints: their coordinates are
    // intrinsic and cannot be remapped to a patch-local frame.
    if (first.modality == Modality::kSphereGrid) return first.feature_shape;
    if (!cfg.patch_shape.empty()) return cfg.patch_shape;
    return first.feature_shape;
}

}  // namespace

std::vector<std::string> list_files_sorted(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<Signal> load_dir(const std::string& dir, Modality modality, std::vector<std::string>* failures) {
    std::vector<Signal> signals;
    for (const std::string& path : list_files_sorted(dir)) {
        try {
            signals.push_back(load_signal(path, modality));
        } catch (const Error& e) {
            if (failures) failures->push_back(path + ": " + e.what());
        }
    }
    return signals;
}

SirenConfig siren_config_from(const RunConfig& cfg, Modality modality, int channels) {
    SirenConfig sc;
    sc.in_dim = coord_dim_for(modality, modality == Modality::kAudio ? 1 : (modality == Modality::kVolume ? 3 : 2));
    sc.out_dim = channels;
    sc.depth = cfg.depth;
    sc.width = cfg.width;
    sc.latent_dim = cfg.latent_dim;
    sc.omega0 = cfg.omega0;
    sc.modulation = modulation_kind_from_name(cfg.modulation);
    if (sc.modulation == ModulationKind::kNone) sc.latent_dim = 0;
    sc.validate();
    return sc;
}

std::vector<Modulations> adapt_corpus(const SirenConfig& cfg, const BaseParams& theta,
                                      const std::vector<Signal>& signals, const std::vector<int>& patch_shape,
                                      const InnerConfig& inner) {
    std::vector<Modulations> corpus;
    for (const Signal& s : signals) {
        auto [patches, layout] = partition(s, patch_shape);
        for (const Signal& p : patches) corpus.push_back(inner_adapt(cfg, theta, p, inner));
    }
    return corpus;
}

void calibrate_checkpoint(ModelCheckpoint& cp, const std::vector<Signal>& train_set, const InnerConfig& inner,
                          int bits) {
    auto corpus = adapt_corpus(cp.cfg, cp.theta, train_set, cp.patch_shape, inner);
    cp.qp = calibrate(corpus, bits);
    SymbolStream symbols;
    for (const Modulations& m : corpus) {
        SymbolStream s = quantize(m, cp.qp);
        symbols.insert(symbols.end(), s.begin(), s.end());
    }
    cp.fm = build_freq(symbols, bits);
}

int cmd_train(const RunConfig& cfg) {
    Modality modality = parse_modality(cfg);
    DirLock lock(cfg.out);

    std::vector<std::string> failures;
    std::vector<Signal> train_set = load_dir(cfg.train_dir, modality, &failures);
    std::vector<Signal> val_set;
    if (!cfg.val_dir.empty()) val_set = load_dir(cfg.val_dir, modality, &failures);
    for (const auto& f : failures) std::cerr << "unreadable: " << f << "\n";
    require(!train_set.empty(), "empty training dataset");

    SirenConfig sc = siren_config_from(cfg, modality, train_set[0].channels);
    for (const Signal& s : train_set)
        require(s.channels == sc.out_dim, "training files disagree on channel count");

    std::vector<int> patch_shape = effective_patch_shape(cfg, train_set[0]);

    InnerConfig inner{cfg.train_inner_steps(), cfg.inner_lr};
    OuterConfig outer;
    outer.lr = cfg.outer_lr;
    outer.batch_size = cfg.batch_size;
    outer.epochs = cfg.epochs;
    outer.seed = cfg.seed;
    outer.max_outer_steps = cfg.max_outer_steps;

    std::ofstream metrics(fs::path(cfg.out) / "metrics.csv", std::ios::trunc);
    metrics << "epoch,outer_step,train_loss,val_psnr_db\n";
    TrainOptions options;
    options.patch_shape = patch_shape;
    options.on_epoch = [&](const EpochLog& log) {
        metrics << log.epoch << "," << log.outer_step << "," << fmt("%.9g", log.train_loss) << ","
                << fmt_psnr(log.val_psnr_db) << "\n";
        metrics.flush();
    };

    TrainState state = train(train_set, val_set, sc, inner, outer, options);

    ModelCheckpoint cp;
    cp.cfg = sc;
    cp.theta = state.theta;
    cp.modality = modality;
    cp.patch_shape = patch_shape;
    cp.sample_rate = (uint32_t)train_set[0].sample_rate;
    calibrate_checkpoint(cp, train_set, inner, cfg.bits.at(0));
    save_checkpoint(cp, (fs::path(cfg.out) / "checkpoint.ckpt").string());

    return failures.empty() ? 0 : 1;
}

int cmd_encode(const RunConfig& cfg) {
    require(cfg.checkpoints.size() == 1, "encode needs exactly one --checkpoint");
    ModelCheckpoint cp = load_checkpoint(cfg.checkpoints[0]);
    Signal signal = load_signal(cfg.input, cp.modality);
    InnerConfig inner{cfg.encode_inner_steps(), cfg.inner_lr};
    EncodeResult res = encode(signal, cp, inner);
    save_object(res.obj, cfg.out);
    std::string line = fmt_psnr(res.psnr_db) + "," + fmt("%.6f", res.rate.bpp);
    if (signal.modality == Modality::kAudio && !std::isnan(res.rate.kbps)) line += "," + fmt("%.6f", res.rate.kbps);
    std::cout << line << "\n";
    return 0;
}

int cmd_decode(const RunConfig& cfg) {
    require(cfg.checkpoints.size() == 1, "decode needs exactly one --checkpoint");
    ModelCheckpoint cp = load_checkpoint(cfg.checkpoints[0]);
    CompressedObject obj = load_object(cfg.input);
    Signal out = decode(obj, cp);
    save_signal(out, cfg.out);
    return 0;
}

namespace {

struct SignalEval {
    PatchLayout layout;
    std::vector<Modulations> phis;  // full precision, one per patch
};

double quantized_psnr(const SirenConfig& sc, const BaseParams& theta, const Signal& signal, const SignalEval& ev,
                      const QuantizerParams& qp) {
    Signal proto = signal;
    proto.feature_shape = ev.layout.patch_shape;
    proto.features.assign((size_t)proto.value_count(), 0.0);
    Array coords = signal_coords(proto);
    std::vector<Signal> recon;
    for (const Modulations& phi : ev.phis) {
        Modulations q = dequantize(quantize(phi, qp), qp);
        Array pred = forward(sc, theta, q, coords);
        Signal r = proto;
        for (long i = 0; i < pred.size(); i++) r.features[i] = std::clamp(pred[i], 0.0, 1.0);
        recon.push_back(std::move(r));
    }
    Signal rebuilt = reassemble(recon, ev.layout);
    return psnr_db(mean_squared_error(rebuilt.features, signal.features));
}

double fp_psnr(const SirenConfig& sc, const BaseParams& theta, const Signal& signal, const SignalEval& ev) {
    Signal proto = signal;
    proto.feature_shape = ev.layout.patch_shape;
    proto.features.assign((size_t)proto.value_count(), 0.0);
    Array coords = signal_coords(proto);
    std::vector<Signal> recon;
    for (const Modulations& phi : ev.phis) {
        Array pred = forward(sc, theta, phi, coords);
        Signal r = proto;
        for (long i = 0; i < pred.size(); i++) r.features[i] = std::clamp(pred[i], 0.0, 1.0);
        recon.push_back(std::move(r));
    }
    Signal rebuilt = reassemble(recon, ev.layout);
    return psnr_db(mean_squared_error(rebuilt.features, signal.features));
}

}  // namespace

int cmd_rd_sweep(const RunConfig& cfg) {
    require(!cfg.checkpoints.empty(), "rd-sweep needs at least one --checkpoint");
    require(!cfg.train_dir.empty(), "rd-sweep needs --train-dir for calibration");
    require(!cfg.val_dir.empty(), "rd-sweep needs --val-dir");
    DirLock lock(cfg.out);

    std::ofstream csv(fs::path(cfg.out) / "rd_sweep.csv", std::ios::trunc);
    csv << "checkpoint,bits,psnr_fp_db,bpp_fp,psnr_quant_db,bpp_quant_raw,bpp_entropy,bpp_entropy_per_value\n";

    std::vector<std::string> failures;
    int rc = 0;
    for (const std::string& path : cfg.checkpoints) {
        ModelCheckpoint cp;
        try {
            cp = load_checkpoint(path);
        } catch (const Error& e) {
            failures.push_back(path + ": " + e.what());
            rc = 1;
            continue;
        }
        std::vector<Signal> train_set = load_dir(cfg.train_dir, cp.modality, &failures);
        std::vector<Signal> val_set = load_dir(cfg.val_dir, cp.modality, &failures);
        require(!train_set.empty() && !val_set.empty(), "empty calibration or evaluation set");

        InnerConfig inner{cfg.encode_inner_steps(), cfg.inner_lr};
        auto train_corpus = adapt_corpus(cp.cfg, cp.theta, train_set, cp.patch_shape, inner);

        std::vector<SignalEval> evals;
        double fp_psnr_sum = 0, fp_bpp_sum = 0;
        for (const Signal& s : val_set) {
            SignalEval ev;
            auto [patches, layout] = partition(s, cp.patch_shape);
            ev.layout = layout;
            for (const Signal& p : patches) ev.phis.push_back(inner_adapt(cp.cfg, cp.theta, p, inner));
            fp_psnr_sum += fp_psnr(cp.cfg, cp.theta, s, ev);
            // full-precision modulations are stored as 64-bit reals
            fp_bpp_sum += 64.0 * cp.cfg.latent_dim * (double)ev.layout.patch_count() /
                          (double)Array::count(s.feature_shape);
            evals.push_back(std::move(ev));
        }

        for (int b : cfg.bits) {
            QuantizerParams qp = calibrate(train_corpus, b);
            SymbolStream train_symbols;
            for (const Modulations& m : train_corpus) {
                SymbolStream s = quantize(m, qp);
                train_symbols.insert(train_symbols.end(), s.begin(), s.end());
            }
            FrequencyModel fm = build_freq(train_symbols, b);

            double q_psnr_sum = 0, raw_bpp_sum = 0, ec_bpp_sum = 0, ec_bppv_sum = 0;
            for (size_t i = 0; i < val_set.size(); i++) {
                const Signal& s = val_set[i];
                const SignalEval& ev = evals[i];
                q_psnr_sum += quantized_psnr(cp.cfg, cp.theta, s, ev, qp);
                SymbolStream symbols;
                for (const Modulations& m : ev.phis) {
                    SymbolStream ps = quantize(m, qp);
                    symbols.insert(symbols.end(), ps.begin(), ps.end());
                }
                double pixels = (double)Array::count(s.feature_shape);
                raw_bpp_sum += (double)symbols.size() * b / pixels;
                double ec_bits = 8.0 * (double)ac_encode(symbols, fm).size();
                ec_bpp_sum += ec_bits / pixels;
                ec_bppv_sum += ec_bits / (pixels * s.channels);
            }
            const double n = (double)val_set.size();
            csv << path << "," << b << "," << fmt_psnr(fp_psnr_sum / n) << "," << fmt("%.6f", fp_bpp_sum / n) << ","
                << fmt_psnr(q_psnr_sum / n) << "," << fmt("%.6f", raw_bpp_sum / n) << ","
                << fmt("%.6f", ec_bpp_sum / n) << "," << fmt("%.6f", ec_bppv_sum / n) << "\n";
        }
    }
    for (const auto& f : failures) std::cerr << "failed: " << f << "\n";
    return failures.empty() ? rc : 1;
}

int cmd_ablate(const RunConfig& cfg) {
    Modality modality = parse_modality(cfg);
    DirLock lock(cfg.out);

    std::vector<std::string> failures;
    std::vector<Signal> train_set = load_dir(cfg.train_dir, modality, &failures);
    std::vector<Signal> val_set = load_dir(cfg.val_dir, modality, &failures);
    for (const auto& f : failures) std::cerr << "unreadable: " << f << "\n";
    require(!train_set.empty(), "empty training dataset");
    require(!val_set.empty(), "ablation needs --val-dir");

    std::vector<int> patch_shape = effective_patch_shape(cfg, train_set[0]);
    InnerConfig inner{cfg.train_inner_steps(), cfg.inner_lr};
    OuterConfig outer;
    outer.lr = cfg.outer_lr;
    outer.batch_size = cfg.batch_size;
    outer.epochs = cfg.epochs;
    outer.seed = cfg.seed;
    outer.max_outer_steps = cfg.max_outer_steps;

    std::ofstream csv(fs::path(cfg.out) / "ablate.csv", std::ios::trunc);
    csv << "modulation,val_psnr_db\n";

    for (const char* mode : {"shift", "scale", "scale_and_shift"}) {
        RunConfig mode_cfg = cfg;
        mode_cfg.modulation = mode;
        SirenConfig sc = siren_config_from(mode_cfg, modality, train_set[0].channels);
        TrainOptions options;
        options.patch_shape = patch_shape;
        TrainState state = train(train_set, val_set, sc, inner, outer, options);

        InnerConfig val_inner = inner;
        val_inner.steps = kValidationInnerSteps;
        double psnr_sum = 0;
        for (const Signal& v : val_set) psnr_sum += eval_signal_psnr(sc, state.theta, v, patch_shape, val_inner);
        csv << mode << "," << fmt_psnr(psnr_sum / (double)val_set.size()) << "\n";
        csv.flush();
    }
    return failures.empty() ? 0 : 1;
}

}  // namespace inrcodec
