#include "milgrade/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "milgrade/binio.hpp"
#include "milgrade/errors.hpp"
#include "milgrade/numerics.hpp"
#include "milgrade/rng.hpp"
#include "milgrade/sampling.hpp"

namespace milgrade {

void LabeledPatchSet::validate() const {
    if (embeddings.rows == 0) throw ContractError("LabeledPatchSet: empty set");
    if (labels.size() != embeddings.rows) {
        throw ContractError("LabeledPatchSet: labels length " + std::to_string(labels.size()) +
                            " != rows " + std::to_string(embeddings.rows));
    }
    for (int l : labels) {
        if (l < 0 || l >= kPatchClasses) {
            throw ContractError("LabeledPatchSet: patch label " + std::to_string(l) +
                                " out of range");
        }
    }
}

ProbeParams init_probe(std::size_t dim) {
    // Zero init: the objective is convex, no symmetry to break.
    return ProbeParams{Matrix(kPatchClasses, dim), Matrix(kPatchClasses, 1)};
}

PatchPrediction probe_forward(const ProbeParams& params, std::span<const double> embedding,
                              Coord coord) {
    if (embedding.size() != params.w.cols) {
        throw DimensionError("probe_forward: embedding dim " + std::to_string(embedding.size()) +
                             " != probe dim " + std::to_string(params.w.cols));
    }
    std::vector<double> logits(params.w.rows);
    for (std::size_t c = 0; c < params.w.rows; ++c) {
        const double* wr = params.w.row(c);
        double acc = params.b(c, 0);
        for (std::size_t j = 0; j < params.w.cols; ++j) acc += wr[j] * embedding[j];
        logits[c] = acc;
    }
    PatchPrediction pred;
    pred.coord = coord;
    pred.probs = softmax(logits);
    pred.pred = argmax_lowest(pred.probs);
    return pred;
}

std::vector<PatchPrediction> probe_predict_bag(const ProbeParams& params, const Bag& bag) {
    bag.validate();
    std::vector<PatchPrediction> preds;
    preds.reserve(bag.embeddings.rows);
    for (std::size_t i = 0; i < bag.embeddings.rows; ++i) {
        preds.push_back(probe_forward(
            params, std::span<const double>(bag.embeddings.row(i), bag.embeddings.cols),
            bag.coords[i]));
    }
    return preds;
}

namespace {

double probe_mean_loss(const ProbeParams& params, const LabeledPatchSet& set) {
    double total = 0.0;
    for (std::size_t i = 0; i < set.embeddings.rows; ++i) {
        const double* x = set.embeddings.row(i);
        std::vector<double> logits(params.w.rows);
        for (std::size_t c = 0; c < params.w.rows; ++c) {
            const double* wr = params.w.row(c);
            double acc = params.b(c, 0);
            for (std::size_t j = 0; j < params.w.cols; ++j) acc += wr[j] * x[j];
            logits[c] = acc;
        }
        total += cross_entropy_from_logits(logits, set.labels[i]);
    }
    return total / static_cast<double>(set.embeddings.rows);
}

} // namespace

std::pair<ProbeParams, std::vector<EpochLog>> train_probe(const LabeledPatchSet& train,
                                                          const LabeledPatchSet& val,
                                                          const TrainConfig& cfg) {
    train.validate();
    val.validate();
    cfg.validate();
    if (train.embeddings.cols != val.embeddings.cols) {
        throw DimensionError("train_probe: train dim " + std::to_string(train.embeddings.cols) +
                             " != val dim " + std::to_string(val.embeddings.cols));
    }

    const std::size_t dim = train.embeddings.cols;
    const std::size_t n_train = train.embeddings.rows;
    ProbeParams params = init_probe(dim);
    AdamState st_w = make_adam_state(kPatchClasses, dim, cfg.learning_rate);
    AdamState st_b = make_adam_state(kPatchClasses, 1, cfg.learning_rate);

    Rng master(cfg.seed);
    std::vector<EpochLog> log;

    ProbeParams best = params;
    double best_val = probe_mean_loss(params, val);
    std::size_t best_epoch = 0;
    log.push_back({0, probe_mean_loss(params, train), best_val, 0});

    std::size_t stale = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const std::vector<std::size_t> order =
            weighted_sample_indices(train.labels, n_train, master.next_u64());

        double train_loss = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch_end = std::min(pos + cfg.batch_size, order.size());
            const double inv = 1.0 / static_cast<double>(batch_end - pos);
            Matrix gw(kPatchClasses, dim);
            Matrix gb(kPatchClasses, 1);
            for (std::size_t s = pos; s < batch_end; ++s) {
                const std::size_t idx = order[s];
                const double* x = train.embeddings.row(idx);
                const int y = train.labels[idx];
                std::vector<double> logits(params.w.rows);
                for (std::size_t c = 0; c < params.w.rows; ++c) {
                    const double* wr = params.w.row(c);
                    double acc = params.b(c, 0);
                    for (std::size_t j = 0; j < dim; ++j) acc += wr[j] * x[j];
                    logits[c] = acc;
                }
                train_loss += cross_entropy_from_logits(logits, y);
                std::vector<double> dlogits = softmax(logits);
                dlogits[static_cast<std::size_t>(y)] -= 1.0;
                for (std::size_t c = 0; c < params.w.rows; ++c) {
                    const double d = dlogits[c] * inv;
                    gb(c, 0) += d;
                    double* gwr = gw.row(c);
                    for (std::size_t j = 0; j < dim; ++j) gwr[j] += d * x[j];
                }
            }
            adam_step(params.w, gw, st_w);
            adam_step(params.b, gb, st_b);
            pos = batch_end;
        }
        train_loss /= static_cast<double>(order.size());

        const double val_loss = probe_mean_loss(params, val);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            throw NumericError("train_probe: non-finite loss at epoch " + std::to_string(epoch));
        }
        if (best_val - val_loss > kValImprovementMin) {
            best_val = val_loss;
            best = params;
            best_epoch = epoch;
            stale = 0;
        } else {
            ++stale;
        }
        log.push_back({epoch, train_loss, val_loss, best_epoch});
        if (stale >= cfg.patience) break;
    }
    return {best, log};
}

int majority_vote(const std::vector<PatchPrediction>& preds) {
    if (preds.empty()) throw ContractError("majority_vote: empty prediction list");

    // Background is excluded from the vote; tally the 5 slide classes.
    std::vector<std::size_t> votes(kSlideClasses, 0);
    std::vector<double> prob_sums(kSlideClasses, 0.0); // summed over all patches
    for (const PatchPrediction& p : preds) {
        if (p.probs.size() != kPatchClasses) {
            throw ContractError("majority_vote: prediction with " +
                                std::to_string(p.probs.size()) + " probabilities");
        }
        for (int c = 0; c < kSlideClasses; ++c) prob_sums[c] += p.probs[c + 1];
        if (p.pred >= 1) ++votes[p.pred - 1];
    }

    std::size_t max_votes = 0;
    for (std::size_t v : votes) max_votes = std::max(max_votes, v);
    if (max_votes == 0) {
        // Every patch predicted background.
        return argmax_lowest(prob_sums);
    }
    int winner = -1;
    for (int c = 0; c < kSlideClasses; ++c) {
        if (votes[c] != max_votes) continue;
        if (winner < 0 || prob_sums[c] > prob_sums[winner]) winner = c;
    }
    return winner;
}

std::pair<LabeledPatchSet, LabeledPatchSet> split_patch_set(const LabeledPatchSet& set,
                                                            double val_fraction,
                                                            std::uint64_t seed) {
    set.validate();
    if (!(val_fraction > 0.0) || !(val_fraction < 1.0)) {
        throw ContractError("split_patch_set: val_fraction must be in (0,1)");
    }
    Rng rng(seed);
    std::vector<std::size_t> val_rows;
    std::vector<std::size_t> train_rows;
    for (int cls = 0; cls < kPatchClasses; ++cls) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < set.labels.size(); ++i) {
            if (set.labels[i] == cls) rows.push_back(i);
        }
        rng.shuffle(rows);
        std::size_t n_val = static_cast<std::size_t>(val_fraction *
                                                     static_cast<double>(rows.size()));
        if (n_val == 0 && rows.size() >= 2) n_val = 1;
        for (std::size_t j = 0; j < rows.size(); ++j) {
            (j < n_val ? val_rows : train_rows).push_back(rows[j]);
        }
    }
    if (train_rows.empty() || val_rows.empty()) {
        throw ContractError("split_patch_set: split left an empty part");
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(val_rows.begin(), val_rows.end());

    auto take = [&](const std::vector<std::size_t>& rows) {
        LabeledPatchSet out;
        out.embeddings = Matrix(rows.size(), set.embeddings.cols);
        out.labels.reserve(rows.size());
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const double* src = set.embeddings.row(rows[j]);
            std::copy(src, src + set.embeddings.cols, out.embeddings.row(j));
            out.labels.push_back(set.labels[rows[j]]);
        }
        return out;
    };
    return {take(train_rows), take(val_rows)};
}

namespace {
constexpr char kProbeMagic[4] = {'P', 'R', 'B', '1'};
constexpr std::uint32_t kProbeVersion = 1;
} // namespace

void save_probe_checkpoint(const ProbeParams& params, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("save_probe_checkpoint: cannot open " + path.string());
    write_magic(os, kProbeMagic);
    write_u32le(os, kProbeVersion);
    write_u32le(os, static_cast<std::uint32_t>(params.w.rows));
    write_u32le(os, static_cast<std::uint32_t>(params.w.cols));
    for (double v : params.w.data) write_f64le(os, v);
    for (double v : params.b.data) write_f64le(os, v);
    if (!os) throw FormatError("save_probe_checkpoint: write failed for " + path.string());
}

ProbeParams load_probe_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("load_probe_checkpoint: cannot open " + path.string());
    const std::string what = "probe checkpoint " + path.string();
    expect_magic(is, kProbeMagic, what);
    expect_version(is, kProbeVersion, what);
    const std::uint32_t kp = read_u32le(is, what);
    const std::uint32_t dim = read_u32le(is, what);
    if (kp != kPatchClasses) {
        throw FormatError(what + ": expected " + std::to_string(kPatchClasses) +
                          " patch classes, found " + std::to_string(kp));
    }
    ProbeParams params{Matrix(kp, dim), Matrix(kp, 1)};
    for (double& v : params.w.data) v = read_f64le(is, what);
    for (double& v : params.b.data) v = read_f64le(is, what);
    return params;
}

} // namespace milgrade
