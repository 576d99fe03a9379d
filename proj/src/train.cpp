#include "milgrade/train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "milgrade/errors.hpp"
#include "milgrade/numerics.hpp"
#include "milgrade/rng.hpp"

namespace milgrade {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ContractError("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw ContractError("TrainConfig: batch_size must be >= 1");
    if (max_epochs < 1) throw ContractError("TrainConfig: max_epochs must be >= 1");
    if (patience < 1 || patience > max_epochs) {
        throw ContractError("TrainConfig: patience must be in [1, max_epochs]");
    }
    if (!(val_fraction > 0.0) || !(val_fraction < 1.0)) {
        throw ContractError("TrainConfig: val_fraction must be in (0,1)");
    }
}

TrainConfig mil_train_config() {
    TrainConfig cfg;
    cfg.learning_rate = 1e-4;
    cfg.batch_size = 1;
    cfg.patience = 20;
    return cfg;
}

TrainConfig probe_train_config() {
    TrainConfig cfg;
    cfg.learning_rate = 1e-5;
    cfg.batch_size = 8;
    cfg.patience = 15;
    return cfg;
}

void write_epoch_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("epoch log " + path.string() + ": cannot open");
    os << "epoch,train_loss,val_loss\n";
    char buf[96];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss);
        os << buf;
    }
    if (!os) throw FormatError("epoch log " + path.string() + ": write failed");
}

namespace {

struct PatientGroup {
    std::string patient_id;
    std::vector<std::size_t> slide_indices;
    int stratum = 0; // modal slide class, lowest index on ties
};

} // namespace

FoldPlan stratified_patient_folds(const std::vector<SlideRecord>& records, int k,
                                  std::uint64_t seed, double val_fraction) {
    if (k < 2) throw ContractError("stratified_patient_folds: k must be >= 2");
    if (records.empty()) throw ContractError("stratified_patient_folds: no records");
    if (!(val_fraction > 0.0) || !(val_fraction < 1.0)) {
        throw ContractError("stratified_patient_folds: val_fraction must be in (0,1)");
    }

    std::map<std::string, PatientGroup> by_patient;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const SlideRecord& r = records[i];
        if (!r.label) {
            throw ContractError("stratified_patient_folds: slide " + r.slide_id + " unlabeled");
        }
        if (r.patient_id.empty()) {
            throw ContractError("stratified_patient_folds: slide " + r.slide_id +
                                " has no patient_id");
        }
        PatientGroup& g = by_patient[r.patient_id];
        g.patient_id = r.patient_id;
        g.slide_indices.push_back(i);
    }
    if (static_cast<int>(by_patient.size()) < k) {
        throw ContractError("stratified_patient_folds: k=" + std::to_string(k) + " exceeds " +
                            std::to_string(by_patient.size()) + " patients");
    }

    for (auto& [id, g] : by_patient) {
        std::array<int, kSlideClasses> counts{};
        for (std::size_t i : g.slide_indices) ++counts[static_cast<std::size_t>(*records[i].label)];
        g.stratum = static_cast<int>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
    }

    // Deal patients per class, round-robin, with the start fold rotating by
    // the running patient count so remainders spread across folds.
    Rng rng(seed);
    std::vector<const PatientGroup*> patients;
    for (const auto& [id, g] : by_patient) patients.push_back(&g);

    std::map<const PatientGroup*, int> fold_of;
    std::size_t dealt = 0;
    for (int cls = 0; cls < kSlideClasses; ++cls) {
        std::vector<const PatientGroup*> group;
        for (const PatientGroup* p : patients) {
            if (p->stratum == cls) group.push_back(p);
        }
        rng.shuffle(group);
        for (std::size_t j = 0; j < group.size(); ++j) {
            fold_of[group[j]] = static_cast<int>((dealt + j) % static_cast<std::size_t>(k));
        }
        dealt += group.size();
    }

    FoldPlan plan;
    plan.k = k;
    plan.folds.resize(static_cast<std::size_t>(k));
    for (const PatientGroup* p : patients) {
        const int fold = fold_of[p];
        for (std::size_t i : p->slide_indices) {
            plan.assignments[records[i].slide_id] = fold;
            plan.folds[static_cast<std::size_t>(fold)].test_ids.push_back(records[i].slide_id);
        }
    }

    // Inner validation split: per class, a val_fraction share of the
    // remainder patients (at least one when the class has two or more).
    for (int f = 0; f < k; ++f) {
        FoldSplit& split = plan.folds[static_cast<std::size_t>(f)];
        for (int cls = 0; cls < kSlideClasses; ++cls) {
            std::vector<const PatientGroup*> rest;
            for (const PatientGroup* p : patients) {
                if (fold_of[p] != f && p->stratum == cls) rest.push_back(p);
            }
            rng.shuffle(rest);
            std::size_t n_val = static_cast<std::size_t>(
                std::floor(val_fraction * static_cast<double>(rest.size())));
            if (n_val == 0 && rest.size() >= 2) n_val = 1;
            for (std::size_t j = 0; j < rest.size(); ++j) {
                auto& target = j < n_val ? split.val_ids : split.train_ids;
                for (std::size_t i : rest[j]->slide_indices) {
                    target.push_back(records[i].slide_id);
                }
            }
        }
        std::sort(split.train_ids.begin(), split.train_ids.end());
        std::sort(split.val_ids.begin(), split.val_ids.end());
        std::sort(split.test_ids.begin(), split.test_ids.end());
    }
    return plan;
}

std::pair<std::vector<std::string>, std::vector<std::string>> stratified_val_split(
    const std::vector<SlideRecord>& records, std::uint64_t seed, double val_fraction) {
    if (records.size() < 2) {
        throw ContractError("stratified_val_split: need at least 2 slides");
    }
    if (!(val_fraction > 0.0) || !(val_fraction < 1.0)) {
        throw ContractError("stratified_val_split: val_fraction must be in (0,1)");
    }
    std::map<std::string, PatientGroup> by_patient;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].label) {
            throw ContractError("stratified_val_split: slide " + records[i].slide_id +
                                " unlabeled");
        }
        PatientGroup& g = by_patient[records[i].patient_id];
        g.patient_id = records[i].patient_id;
        g.slide_indices.push_back(i);
    }
    for (auto& [id, g] : by_patient) {
        std::array<int, kSlideClasses> counts{};
        for (std::size_t i : g.slide_indices) ++counts[static_cast<std::size_t>(*records[i].label)];
        g.stratum = static_cast<int>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
    }

    Rng rng(seed);
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    for (int cls = 0; cls < kSlideClasses; ++cls) {
        std::vector<const PatientGroup*> group;
        for (const auto& [id, g] : by_patient) {
            if (g.stratum == cls) group.push_back(&g);
        }
        rng.shuffle(group);
        std::size_t n_val = static_cast<std::size_t>(
            std::floor(val_fraction * static_cast<double>(group.size())));
        if (n_val == 0 && group.size() >= 2) n_val = 1;
        for (std::size_t j = 0; j < group.size(); ++j) {
            auto& target = j < n_val ? val_ids : train_ids;
            for (std::size_t i : group[j]->slide_indices) {
                target.push_back(records[i].slide_id);
            }
        }
    }
    if (val_ids.empty() && train_ids.size() >= 2) {
        val_ids.push_back(train_ids.back());
        train_ids.pop_back();
    }
    std::sort(train_ids.begin(), train_ids.end());
    std::sort(val_ids.begin(), val_ids.end());
    return {train_ids, val_ids};
}

std::string fold_plan_json(const FoldPlan& plan) {
    nlohmann::json j;
    j["k"] = plan.k;
    j["folds"] = nlohmann::json::array();
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        nlohmann::json fold;
        fold["fold"] = f;
        fold["train"] = plan.folds[f].train_ids;
        fold["val"] = plan.folds[f].val_ids;
        fold["test"] = plan.folds[f].test_ids;
        j["folds"].push_back(std::move(fold));
    }
    return j.dump(2);
}

namespace {

double mil_mean_loss(const MilModel& model, const std::vector<const Bag*>& bags) {
    double total = 0.0;
    for (const Bag* bag : bags) {
        total += cross_entropy_from_logits(mil_forward(model, *bag).logits, *bag->label);
    }
    return total / static_cast<double>(bags.size());
}

} // namespace

std::pair<MilModel, std::vector<EpochLog>> train_mil(const std::vector<const Bag*>& train,
                                                     const std::vector<const Bag*>& val,
                                                     const MilConfig& config,
                                                     const TrainConfig& tcfg) {
    if (train.empty() || val.empty()) {
        throw ContractError("train_mil: train and val sets must be non-empty");
    }
    config.validate();
    tcfg.validate();
    std::vector<int> labels;
    labels.reserve(train.size());
    for (const Bag* bag : train) {
        if (!bag->label) throw ContractError("train_mil: unlabeled bag " + bag->slide_id);
        labels.push_back(*bag->label);
    }
    for (const Bag* bag : val) {
        if (!bag->label) throw ContractError("train_mil: unlabeled val bag " + bag->slide_id);
    }

    Rng master(tcfg.seed);
    MilModel model = init_model(config, master.next_u64());

    MilParams& p = model.params;
    AdamState st_w_proj = make_adam_state(p.w_proj.rows, p.w_proj.cols, tcfg.learning_rate);
    AdamState st_b_proj = make_adam_state(p.b_proj.rows, 1, tcfg.learning_rate);
    AdamState st_v = make_adam_state(p.v_tanh.rows, p.v_tanh.cols, tcfg.learning_rate);
    AdamState st_u = make_adam_state(p.u_gate.rows, p.u_gate.cols, tcfg.learning_rate);
    AdamState st_w_attn = make_adam_state(p.w_attn.rows, p.w_attn.cols, tcfg.learning_rate);
    AdamState st_w_clf = make_adam_state(p.w_clf.rows, p.w_clf.cols, tcfg.learning_rate);
    AdamState st_b_clf = make_adam_state(p.b_clf.rows, 1, tcfg.learning_rate);

    std::vector<EpochLog> log;
    MilParams best = model.params;
    double best_val = mil_mean_loss(model, val);
    std::size_t best_epoch = 0;
    log.push_back({0, mil_mean_loss(model, train), best_val, 0});

    std::size_t stale = 0;
    for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        const std::vector<std::size_t> order =
            weighted_sample_indices(labels, train.size(), master.next_u64());
        double train_loss = 0.0;
        for (std::size_t idx : order) {
            const Bag& bag = *train[idx];
            auto [loss, grads] = mil_loss_and_grad(model, bag);
            if (!std::isfinite(loss)) {
                throw NumericError("train_mil: non-finite loss at epoch " +
                                   std::to_string(epoch) + " on slide " + bag.slide_id);
            }
            train_loss += loss;
            adam_step(p.w_proj, grads.w_proj, st_w_proj);
            adam_step(p.b_proj, grads.b_proj, st_b_proj);
            adam_step(p.v_tanh, grads.v_tanh, st_v);
            adam_step(p.u_gate, grads.u_gate, st_u);
            adam_step(p.w_attn, grads.w_attn, st_w_attn);
            adam_step(p.w_clf, grads.w_clf, st_w_clf);
            adam_step(p.b_clf, grads.b_clf, st_b_clf);
        }
        train_loss /= static_cast<double>(order.size());

        const double val_loss = mil_mean_loss(model, val);
        if (!std::isfinite(val_loss)) {
            throw NumericError("train_mil: non-finite validation loss at epoch " +
                               std::to_string(epoch));
        }
        if (best_val - val_loss > kValImprovementMin) {
            best_val = val_loss;
            best = model.params;
            best_epoch = epoch;
            stale = 0;
        } else {
            ++stale;
        }
        log.push_back({epoch, train_loss, val_loss, best_epoch});
        if (stale >= tcfg.patience) break;
    }
    model.params = std::move(best);
    return {std::move(model), std::move(log)};
}

std::pair<MilModel, std::vector<EpochLog>> train_mil(const std::vector<Bag>& train,
                                                     const std::vector<Bag>& val,
                                                     const MilConfig& config,
                                                     const TrainConfig& tcfg) {
    std::vector<const Bag*> train_ptrs;
    std::vector<const Bag*> val_ptrs;
    train_ptrs.reserve(train.size());
    val_ptrs.reserve(val.size());
    for (const Bag& b : train) train_ptrs.push_back(&b);
    for (const Bag& b : val) val_ptrs.push_back(&b);
    return train_mil(train_ptrs, val_ptrs, config, tcfg);
}

} // namespace milgrade
