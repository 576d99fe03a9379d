// milgrade: slide-level predominant-pattern classification from bags of
// patch embeddings. Subcommands cover patch extraction, synthetic cohorts,
// probe/MIL training, cross-validated evaluation, and attention maps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "milgrade/cv.hpp"
#include "milgrade/dataset.hpp"
#include "milgrade/errors.hpp"
#include "milgrade/extraction.hpp"
#include "milgrade/heatmap.hpp"
#include "milgrade/image.hpp"
#include "milgrade/metrics.hpp"
#include "milgrade/mil.hpp"
#include "milgrade/probe.hpp"
#include "milgrade/train.hpp"

namespace fs = std::filesystem;
using namespace milgrade;

namespace {

int env_threads() {
    const char* raw = std::getenv("MILGRADE_THREADS");
    if (raw == nullptr || *raw == '\0') return 0; // auto
    try {
        const int n = std::stoi(raw);
        return n < 0 ? 0 : n;
    } catch (const std::exception&) {
        throw UsageError("MILGRADE_THREADS must be an integer, got \"" + std::string(raw) +
                         "\"");
    }
}

Activation parse_activation(const std::string& s) {
    if (s == "rectified") return Activation::rectified;
    if (s == "linear") return Activation::linear;
    throw UsageError("unknown activation \"" + s + "\" (use rectified or linear)");
}

int parse_target_class(const std::string& s) {
    if (s == "predicted") return -1;
    for (int c = 0; c < kSlideClasses; ++c) {
        if (s == kClassNames[static_cast<std::size_t>(c)]) return c;
    }
    try {
        const int c = std::stoi(s);
        if (c >= 0 && c < kSlideClasses) return c;
    } catch (const std::exception&) {
    }
    throw UsageError("unknown class \"" + s +
                     "\" (use predicted, a class name, or an index 0-4)");
}

std::optional<std::array<double, kSlideClasses>> parse_class_weights(
    const std::vector<double>& raw) {
    if (raw.empty()) return std::nullopt;
    if (raw.size() != kSlideClasses) {
        throw UsageError("--class-weights needs exactly " + std::to_string(kSlideClasses) +
                         " values");
    }
    std::array<double, kSlideClasses> w{};
    std::copy(raw.begin(), raw.end(), w.begin());
    return w;
}

struct CommonMilFlags {
    std::size_t proj_dim = 512;
    std::size_t attn_dim = 256;
    std::string activation = "rectified";

    void attach(CLI::App* cmd) {
        cmd->add_option("--proj-dim", proj_dim, "Projection width")->capture_default_str();
        cmd->add_option("--attn-dim", attn_dim, "Attention branch width")
            ->capture_default_str();
        cmd->add_option("--activation", activation, "Projection activation (rectified|linear)")
            ->capture_default_str();
    }

    MilConfig config(std::size_t input_dim) const {
        MilConfig cfg;
        cfg.input_dim = input_dim;
        cfg.proj_dim = proj_dim;
        cfg.attn_dim = attn_dim;
        cfg.proj_activation = parse_activation(activation);
        return cfg;
    }
};

std::vector<Bag> select_by_id(const std::vector<Bag>& bags,
                              const std::vector<std::string>& ids) {
    std::vector<Bag> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) {
        for (const Bag& b : bags) {
            if (b.slide_id == id) {
                out.push_back(b);
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- extract

int run_extract(const std::string& image_path, const std::string& mask_path, int patch_size,
                double tissue_min, const std::string& out_dir) {
    const ImageRGB image = read_ppm(image_path);
    fs::create_directories(out_dir);
    const fs::path csv_path = fs::path(out_dir) / "patches.csv";
    std::ofstream os(csv_path, std::ios::binary);
    if (!os) throw FormatError("extract: cannot open " + csv_path.string());

    if (!mask_path.empty()) {
        const ImageGray mask = read_pgm(mask_path);
        const std::vector<PatchSample> patches =
            extract_labeled_patches(image, mask, patch_size, tissue_min);
        os << "x,y,label,tissue_fraction\n";
        char buf[32];
        for (const PatchSample& p : patches) {
            std::snprintf(buf, sizeof(buf), "%.6f", p.tissue_fraction);
            os << p.coord.x << "," << p.coord.y << "," << p.label << "," << buf << "\n";
        }
        std::cout << "extract: " << patches.size() << " labeled patches -> " << csv_path
                  << "\n";
    } else {
        const std::vector<Coord> coords = extract_tissue_patches(image, patch_size, tissue_min);
        os << "x,y\n";
        for (const Coord& c : coords) os << c.x << "," << c.y << "\n";
        std::cout << "extract: " << coords.size() << " tissue patches -> " << csv_path << "\n";
    }
    return 0;
}

// ------------------------------------------------------------------ synth

int run_synth(const SyntheticSpec& spec, const std::string& out_dir) {
    const SyntheticCohort cohort = synth_generate(spec);
    write_cohort(cohort, out_dir);
    std::cout << "synth: " << cohort.bags.size() << " slides, "
              << cohort.patches.embeddings.rows << " pooled patches -> " << out_dir << "\n";
    return 0;
}

// ------------------------------------------------------------ train-probe

int run_train_probe(const std::string& data_dir, const TrainConfig& tcfg,
                    const std::string& out_path, const std::string& log_path) {
    std::cout << "train-probe: lr=" << tcfg.learning_rate << " batch=" << tcfg.batch_size
              << " patience=" << tcfg.patience << " max_epochs=" << tcfg.max_epochs
              << " seed=" << tcfg.seed << "\n";
    const LabeledPatchSet pool = read_patch_set(fs::path(data_dir) / "patches.femb",
                                                fs::path(data_dir) / "patches.flab");
    auto [train, val] = split_patch_set(pool, tcfg.val_fraction, tcfg.seed);
    auto [params, log] = train_probe(train, val, tcfg);
    save_probe_checkpoint(params, out_path);
    if (!log_path.empty()) write_epoch_log_csv(log, log_path);
    std::cout << "train-probe: best epoch " << log.back().best_epoch << ", val loss "
              << log[log.back().best_epoch].val_loss << " -> " << out_path << "\n";
    return 0;
}

// -------------------------------------------------------------- train-mil

int run_train_mil(const std::string& bags_dir, const CommonMilFlags& mil_flags,
                  const TrainConfig& tcfg, const std::string& out_path,
                  const std::string& log_path) {
    std::cout << "train-mil: lr=" << tcfg.learning_rate << " batch=1 patience=" << tcfg.patience
              << " max_epochs=" << tcfg.max_epochs << " seed=" << tcfg.seed << "\n";
    const std::vector<Bag> bags = load_bags(bags_dir);
    if (bags.empty()) throw ContractError("train-mil: no bags in " + bags_dir);

    std::vector<SlideRecord> records;
    records.reserve(bags.size());
    for (const Bag& b : bags) records.push_back(record_from_bag(b));
    auto [train_ids, val_ids] = stratified_val_split(records, tcfg.seed, tcfg.val_fraction);

    const MilConfig config = mil_flags.config(bags[0].embeddings.cols);
    auto [model, log] =
        train_mil(select_by_id(bags, train_ids), select_by_id(bags, val_ids), config, tcfg);
    save_mil_checkpoint(model, out_path);
    if (!log_path.empty()) write_epoch_log_csv(log, log_path);
    std::cout << "train-mil: best epoch " << log.back().best_epoch << ", val loss "
              << log[log.back().best_epoch].val_loss << " -> " << out_path << "\n";
    return 0;
}

// --------------------------------------------------------------------- cv

int run_cv(const std::string& bags_dir, int k, const CommonMilFlags& mil_flags,
           const TrainConfig& tcfg, const std::string& report_path,
           const std::string& fold_plan_path) {
    std::cout << "cv: k=" << k << " lr=" << tcfg.learning_rate << " batch=1 patience="
              << tcfg.patience << " max_epochs=" << tcfg.max_epochs << " seed=" << tcfg.seed
              << "\n";
    const std::vector<Bag> bags = load_bags(bags_dir);
    if (bags.empty()) throw ContractError("cv: no bags in " + bags_dir);
    const MilConfig config = mil_flags.config(bags[0].embeddings.cols);
    const CvResult result = cross_validate(bags, k, config, tcfg, env_threads());
    write_cv_report_csv(result, report_path);
    if (!fold_plan_path.empty()) {
        std::ofstream os(fold_plan_path, std::ios::binary);
        if (!os) throw FormatError("cv: cannot open " + fold_plan_path);
        os << fold_plan_json(result.plan) << "\n";
    }
    std::cout << format_cv_table(result) << "report -> " << report_path << "\n";
    return 0;
}

// ------------------------------------------------------------------- eval

int run_eval(const std::string& bags_dir, const std::string& model_path,
             const std::string& report_path) {
    const std::vector<Bag> bags = load_bags(bags_dir);
    if (bags.empty()) throw ContractError("eval: no bags in " + bags_dir);
    const MilModel model = load_mil_checkpoint(model_path);
    const EvalResult result = evaluate_mil(model, bags);
    write_eval_report_csv(result, report_path);
    std::cout << format_eval_table(result) << "report -> " << report_path << "\n";
    return 0;
}

int run_vote_eval(const std::string& bags_dir, const std::string& probe_path,
                  const std::string& report_path) {
    const std::vector<Bag> bags = load_bags(bags_dir);
    if (bags.empty()) throw ContractError("vote-eval: no bags in " + bags_dir);
    const ProbeParams probe = load_probe_checkpoint(probe_path);
    const EvalResult result = evaluate_vote(probe, bags);
    write_eval_report_csv(result, report_path);
    std::cout << format_eval_table(result) << "report -> " << report_path << "\n";
    return 0;
}

// ---------------------------------------------------------------- heatmap

int run_heatmap(const std::string& bags_dir, const std::string& slide_id,
                const std::string& model_path, const std::string& target_class, int cell,
                double clip_lo, double clip_hi, const std::string& out_prefix) {
    const std::vector<SlideRecord> records = read_manifest(fs::path(bags_dir) / "manifest.jsonl");
    const SlideRecord* record = nullptr;
    for (const SlideRecord& r : records) {
        if (r.slide_id == slide_id) {
            record = &r;
            break;
        }
    }
    if (record == nullptr) {
        throw DataError("heatmap: slide " + slide_id + " not in " + bags_dir);
    }
    const Bag bag = read_bag(*record, bags_dir);
    const MilModel model = load_mil_checkpoint(model_path);

    HeatmapSpec spec;
    spec.target_class = parse_target_class(target_class);
    spec.cell = cell;
    spec.clip_lo = clip_lo;
    spec.clip_hi = clip_hi;
    const Heatmap map = render_attention_map(model, bag, spec);

    write_pgm(map.raster, out_prefix + ".pgm");
    write_heatmap_csv(map, out_prefix + ".csv");
    std::cout << "heatmap: class "
              << kClassNames[static_cast<std::size_t>(map.rendered_class)] << ", "
              << map.rows.size() << " patches -> " << out_prefix << ".pgm/.csv\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predominant growth pattern classification over patch-embedding bags"};
    app.require_subcommand(1);

    // extract
    auto* extract = app.add_subcommand("extract", "Grid patches from a PPM slide image");
    std::string ex_image, ex_mask, ex_out;
    int ex_patch = kDefaultPatchSize;
    double ex_tissue = kDefaultTissueMin;
    extract->add_option("--image", ex_image, "Slide raster (PPM P6)")->required();
    extract->add_option("--mask", ex_mask, "Label mask (PGM P5, values 0-6)");
    extract->add_option("--patch-size", ex_patch, "Patch edge in pixels")
        ->capture_default_str();
    extract->add_option("--tissue-min", ex_tissue, "Minimum tissue fraction")
        ->capture_default_str();
    extract->add_option("--out", ex_out, "Output directory")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
    SyntheticSpec spec;
    std::string sy_out, sy_remainder = "mix";
    std::vector<double> sy_weights;
    synth->add_option("--slides", spec.n_slides, "Number of slides")->required();
    synth->add_option("--dim", spec.dim, "Embedding dimension")->required();
    synth->add_option("--seed", spec.seed, "RNG seed")->capture_default_str();
    synth->add_option("--patches-min", spec.patches_min, "Min patches per slide")
        ->capture_default_str();
    synth->add_option("--patches-max", spec.patches_max, "Max patches per slide")
        ->capture_default_str();
    synth->add_option("--frac-min", spec.frac_min, "Min predominant fraction")
        ->capture_default_str();
    synth->add_option("--frac-max", spec.frac_max, "Max predominant fraction")
        ->capture_default_str();
    synth->add_option("--separation", spec.class_separation, "Class mean separation")
        ->capture_default_str();
    synth->add_option("--sigma", spec.noise_sigma, "Per-dimension noise sigma")
        ->capture_default_str();
    synth->add_option("--class-weights", sy_weights, "Slide class weights (5 values)")
        ->delimiter(',');
    synth->add_option("--remainder", sy_remainder,
                      "Non-predominant patches: mix (other classes + background) or confuser")
        ->capture_default_str();
    synth->add_option("--patch-size", spec.patch_size, "Patch edge in pixels")
        ->capture_default_str();
    synth->add_option("--out", sy_out, "Output directory")->required();

    // train-probe
    auto* tprobe = app.add_subcommand("train-probe", "Train the patch-level linear probe");
    TrainConfig probe_cfg = probe_train_config();
    std::string tp_data, tp_out, tp_log;
    tprobe->add_option("--data", tp_data, "Cohort dir with patches.femb/.flab")->required();
    tprobe->add_option("--lr", probe_cfg.learning_rate, "Adam learning rate")
        ->capture_default_str();
    tprobe->add_option("--batch", probe_cfg.batch_size, "Minibatch size")
        ->capture_default_str();
    tprobe->add_option("--patience", probe_cfg.patience, "Early-stop patience (epochs)")
        ->capture_default_str();
    tprobe->add_option("--max-epochs", probe_cfg.max_epochs, "Epoch cap")
        ->capture_default_str();
    tprobe->add_option("--val-fraction", probe_cfg.val_fraction, "Validation share")
        ->capture_default_str();
    tprobe->add_option("--seed", probe_cfg.seed, "RNG seed")->capture_default_str();
    tprobe->add_option("--out", tp_out, "Checkpoint path")->required();
    tprobe->add_option("--log", tp_log, "Epoch log CSV path");

    // train-mil
    auto* tmil = app.add_subcommand("train-mil", "Train the gated-attention MIL head");
    TrainConfig mil_cfg = mil_train_config();
    CommonMilFlags tm_flags;
    std::string tm_bags, tm_out, tm_log;
    tmil->add_option("--bags", tm_bags, "Cohort directory")->required();
    tmil->add_option("--lr", mil_cfg.learning_rate, "Adam learning rate")
        ->capture_default_str();
    tmil->add_option("--patience", mil_cfg.patience, "Early-stop patience (epochs)")
        ->capture_default_str();
    tmil->add_option("--max-epochs", mil_cfg.max_epochs, "Epoch cap")->capture_default_str();
    tmil->add_option("--val-fraction", mil_cfg.val_fraction, "Validation share")
        ->capture_default_str();
    tmil->add_option("--seed", mil_cfg.seed, "RNG seed")->capture_default_str();
    tm_flags.attach(tmil);
    tmil->add_option("--out", tm_out, "Checkpoint path")->required();
    tmil->add_option("--log", tm_log, "Epoch log CSV path");

    // cv
    auto* cv = app.add_subcommand("cv", "Patient-stratified k-fold cross-validation");
    TrainConfig cv_cfg = mil_train_config();
    CommonMilFlags cv_flags;
    std::string cv_bags, cv_report, cv_fold_plan;
    int cv_k = 5;
    cv->add_option("--bags", cv_bags, "Cohort directory")->required();
    cv->add_option("--k", cv_k, "Number of folds")->capture_default_str();
    cv->add_option("--lr", cv_cfg.learning_rate, "Adam learning rate")->capture_default_str();
    cv->add_option("--patience", cv_cfg.patience, "Early-stop patience (epochs)")
        ->capture_default_str();
    cv->add_option("--max-epochs", cv_cfg.max_epochs, "Epoch cap")->capture_default_str();
    cv->add_option("--val-fraction", cv_cfg.val_fraction, "Validation share")
        ->capture_default_str();
    cv->add_option("--seed", cv_cfg.seed, "RNG seed")->capture_default_str();
    cv_flags.attach(cv);
    cv->add_option("--report", cv_report, "Per-fold metrics CSV")->required();
    cv->add_option("--fold-plan-out", cv_fold_plan, "Fold plan JSON path");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a MIL checkpoint on labeled bags");
    std::string ev_bags, ev_model, ev_report;
    eval->add_option("--bags", ev_bags, "Cohort directory")->required();
    eval->add_option("--model", ev_model, "MIL checkpoint")->required();
    eval->add_option("--report", ev_report, "Metrics CSV")->required();

    // vote-eval
    auto* vote = app.add_subcommand("vote-eval",
                                    "Evaluate a probe + majority voting on labeled bags");
    std::string vo_bags, vo_probe, vo_report;
    vote->add_option("--bags", vo_bags, "Cohort directory")->required();
    vote->add_option("--probe", vo_probe, "Probe checkpoint")->required();
    vote->add_option("--report", vo_report, "Metrics CSV")->required();

    // heatmap
    auto* heat = app.add_subcommand("heatmap", "Render one slide's attention map");
    std::string hm_bags, hm_slide, hm_model, hm_class = "predicted", hm_out;
    int hm_cell = 8;
    double hm_lo = 1.0, hm_hi = 99.0;
    heat->add_option("--bags", hm_bags, "Cohort directory")->required();
    heat->add_option("--slide", hm_slide, "Slide id")->required();
    heat->add_option("--model", hm_model, "MIL checkpoint")->required();
    heat->add_option("--target-class", hm_class, "predicted, class name, or index 0-4")
        ->capture_default_str();
    heat->add_option("--cell", hm_cell, "Pixels per patch cell")->capture_default_str();
    heat->add_option("--clip-lo", hm_lo, "Lower clip percentile")->capture_default_str();
    heat->add_option("--clip-hi", hm_hi, "Upper clip percentile")->capture_default_str();
    heat->add_option("--out", hm_out, "Output prefix (.pgm and .csv)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 1;
    }

    try {
        if (extract->parsed()) {
            return run_extract(ex_image, ex_mask, ex_patch, ex_tissue, ex_out);
        }
        if (synth->parsed()) {
            spec.class_weights = parse_class_weights(sy_weights);
            if (sy_remainder == "mix") {
                spec.remainder = RemainderMode::class_mix;
            } else if (sy_remainder == "confuser") {
                spec.remainder = RemainderMode::confuser;
            } else {
                throw UsageError("unknown remainder mode \"" + sy_remainder +
                                 "\" (use mix or confuser)");
            }
            return run_synth(spec, sy_out);
        }
        if (tprobe->parsed()) return run_train_probe(tp_data, probe_cfg, tp_out, tp_log);
        if (tmil->parsed()) return run_train_mil(tm_bags, tm_flags, mil_cfg, tm_out, tm_log);
        if (cv->parsed()) return run_cv(cv_bags, cv_k, cv_flags, cv_cfg, cv_report, cv_fold_plan);
        if (eval->parsed()) return run_eval(ev_bags, ev_model, ev_report);
        if (vote->parsed()) return run_vote_eval(vo_bags, vo_probe, vo_report);
        if (heat->parsed()) {
            return run_heatmap(hm_bags, hm_slide, hm_model, hm_class, hm_cell, hm_lo, hm_hi,
                               hm_out);
        }
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        std::cerr << app.help() << std::flush;
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        // Dimension/domain/contract/format/data and filesystem errors.
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
