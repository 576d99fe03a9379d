#include "milgrade/cv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "milgrade/errors.hpp"
#include "milgrade/rng.hpp"

namespace milgrade {

EvalResult evaluate_predictions(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                std::size_t k) {
    EvalResult r;
    r.cm = confusion(y_true, y_pred, k);
    r.weighted_f1 = weighted_f1(r.cm);
    r.kappa = cohen_kappa(r.cm);
    r.per_class_f1 = per_class_f1(r.cm);
    return r;
}

EvalResult evaluate_mil(const MilModel& model, const std::vector<Bag>& bags) {
    if (bags.empty()) throw ContractError("evaluate_mil: no bags");
    std::vector<int> y_true;
    std::vector<int> y_pred;
    y_true.reserve(bags.size());
    y_pred.reserve(bags.size());
    for (const Bag& bag : bags) {
        if (!bag.label) throw ContractError("evaluate_mil: unlabeled bag " + bag.slide_id);
        y_true.push_back(*bag.label);
        y_pred.push_back(predict(model, bag).cls);
    }
    return evaluate_predictions(y_true, y_pred, model.config.n_classes);
}

EvalResult evaluate_vote(const ProbeParams& probe, const std::vector<Bag>& bags) {
    if (bags.empty()) throw ContractError("evaluate_vote: no bags");
    std::vector<int> y_true;
    std::vector<int> y_pred;
    y_true.reserve(bags.size());
    y_pred.reserve(bags.size());
    for (const Bag& bag : bags) {
        if (!bag.label) throw ContractError("evaluate_vote: unlabeled bag " + bag.slide_id);
        y_true.push_back(*bag.label);
        y_pred.push_back(majority_vote(probe_predict_bag(probe, bag)));
    }
    return evaluate_predictions(y_true, y_pred, kSlideClasses);
}

namespace {

int resolve_threads(int n_threads, int k) {
    if (n_threads <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        n_threads = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return std::max(1, std::min(n_threads, k));
}

std::vector<Bag> select_bags(const std::vector<Bag>& bags,
                             const std::map<std::string, std::size_t>& index,
                             const std::vector<std::string>& ids) {
    std::vector<Bag> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) out.push_back(bags[index.at(id)]);
    return out;
}

} // namespace

CvResult cross_validate(const std::vector<Bag>& bags, int k, const MilConfig& config,
                        const TrainConfig& tcfg, int n_threads) {
    if (bags.empty()) throw ContractError("cross_validate: no bags");
    if (k < 2) throw ContractError("cross_validate: k must be >= 2");

    std::vector<SlideRecord> records;
    records.reserve(bags.size());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < bags.size(); ++i) {
        records.push_back(record_from_bag(bags[i]));
        index[bags[i].slide_id] = i;
    }

    CvResult result;
    result.plan = stratified_patient_folds(records, k, tcfg.seed, tcfg.val_fraction);
    result.folds.resize(static_cast<std::size_t>(k));

    // Folds are independent: per-fold seeds are derived up front, so any
    // thread schedule yields identical results.
    auto run_fold = [&](int f) {
        const FoldSplit& split = result.plan.folds[static_cast<std::size_t>(f)];
        const std::vector<Bag> train = select_bags(bags, index, split.train_ids);
        const std::vector<Bag> val = select_bags(bags, index, split.val_ids);
        const std::vector<Bag> test = select_bags(bags, index, split.test_ids);

        TrainConfig fold_cfg = tcfg;
        fold_cfg.seed = derive_seed(tcfg.seed, static_cast<std::uint64_t>(f));
        auto [model, log] = train_mil(train, val, config, fold_cfg);

        FoldMetrics fm;
        fm.fold = f;
        fm.eval = evaluate_mil(model, test);
        fm.best_epoch = log.back().best_epoch;
        fm.best_val_loss = log[fm.best_epoch].val_loss;
        result.folds[static_cast<std::size_t>(f)] = std::move(fm);
    };

    const int workers = resolve_threads(n_threads, k);
    if (workers <= 1) {
        for (int f = 0; f < k; ++f) run_fold(f);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int f = w; f < k; f += workers) run_fold(f);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (std::thread& t : pool) t.join();
        for (const std::exception_ptr& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<double> f1s;
    std::vector<double> kappas;
    for (const FoldMetrics& fm : result.folds) {
        f1s.push_back(fm.eval.weighted_f1);
        kappas.push_back(fm.eval.kappa);
    }
    result.weighted_f1 = fold_summary(f1s);
    result.kappa = fold_summary(kappas);
    return result;
}

std::vector<EvalResult> cross_validate_vote(const std::vector<Bag>& bags, const FoldPlan& plan,
                                            const ProbeParams& probe) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < bags.size(); ++i) index[bags[i].slide_id] = i;
    std::vector<EvalResult> out;
    out.reserve(plan.folds.size());
    for (const FoldSplit& split : plan.folds) {
        out.push_back(evaluate_vote(probe, select_bags(bags, index, split.test_ids)));
    }
    return out;
}

namespace {

std::string fmt_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt_f1_field(double v) {
    return std::isnan(v) ? std::string() : fmt_metric(v);
}

std::string csv_header(std::size_t k) {
    std::string header = "fold,weighted_f1,kappa";
    for (std::size_t c = 0; c < k; ++c) {
        header += ",f1_";
        header += c < kClassNames.size() ? kClassNames[c] : ("class" + std::to_string(c));
    }
    return header;
}

} // namespace

void write_cv_report_csv(const CvResult& result, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("report " + path.string() + ": cannot open");
    const std::size_t k = result.folds.empty() ? 0 : result.folds[0].eval.cm.k;
    os << csv_header(k) << "\n";
    for (const FoldMetrics& fm : result.folds) {
        os << fm.fold << "," << fmt_metric(fm.eval.weighted_f1) << ","
           << fmt_metric(fm.eval.kappa);
        for (double f1 : fm.eval.per_class_f1) os << "," << fmt_f1_field(f1);
        os << "\n";
    }
    // Summary rows; per-class columns average the folds where the class was
    // present.
    std::vector<std::string> mean_fields;
    std::vector<std::string> std_fields;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> vals;
        for (const FoldMetrics& fm : result.folds) {
            if (!std::isnan(fm.eval.per_class_f1[c])) vals.push_back(fm.eval.per_class_f1[c]);
        }
        if (vals.size() >= 2) {
            const Summary s = fold_summary(vals);
            mean_fields.push_back(fmt_metric(s.mean));
            std_fields.push_back(fmt_metric(s.stddev));
        } else if (vals.size() == 1) {
            mean_fields.push_back(fmt_metric(vals[0]));
            std_fields.push_back("");
        } else {
            mean_fields.push_back("");
            std_fields.push_back("");
        }
    }
    os << "mean," << fmt_metric(result.weighted_f1.mean) << "," << fmt_metric(result.kappa.mean);
    for (const std::string& f : mean_fields) os << "," << f;
    os << "\nstd," << fmt_metric(result.weighted_f1.stddev) << ","
       << fmt_metric(result.kappa.stddev);
    for (const std::string& f : std_fields) os << "," << f;
    os << "\n";
    if (!os) throw FormatError("report " + path.string() + ": write failed");
}

void write_eval_report_csv(const EvalResult& result, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("report " + path.string() + ": cannot open");
    std::string header = "weighted_f1,kappa";
    for (std::size_t c = 0; c < result.cm.k; ++c) {
        header += ",f1_";
        header += c < kClassNames.size() ? kClassNames[c] : ("class" + std::to_string(c));
    }
    os << header << "\n";
    os << fmt_metric(result.weighted_f1) << "," << fmt_metric(result.kappa);
    for (double f1 : result.per_class_f1) os << "," << fmt_f1_field(f1);
    os << "\n";
    if (!os) throw FormatError("report " + path.string() + ": write failed");
}

namespace {

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string mean_std(double mean, double stddev) {
    return fmt3(mean) + "±" + fmt3(stddev);
}

} // namespace

std::string format_cv_table(const CvResult& result) {
    std::ostringstream os;
    os << "metric            mean±std over " << result.folds.size() << " folds\n";
    os << "weighted F1       " << mean_std(result.weighted_f1.mean, result.weighted_f1.stddev)
       << "\n";
    os << "kappa             " << mean_std(result.kappa.mean, result.kappa.stddev) << "\n";
    const std::size_t k = result.folds.empty() ? 0 : result.folds[0].eval.cm.k;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> vals;
        for (const FoldMetrics& fm : result.folds) {
            if (!std::isnan(fm.eval.per_class_f1[c])) vals.push_back(fm.eval.per_class_f1[c]);
        }
        const std::string name =
            c < kClassNames.size() ? kClassNames[c] : ("class" + std::to_string(c));
        os << "F1 " << name << std::string(name.size() < 15 ? 15 - name.size() : 1, ' ');
        if (vals.size() >= 2) {
            const Summary s = fold_summary(vals);
            os << mean_std(s.mean, s.stddev);
        } else if (vals.size() == 1) {
            os << fmt3(vals[0]);
        } else {
            os << "undefined (class absent in all test folds)";
        }
        os << "\n";
    }
    return os.str();
}

std::string format_eval_table(const EvalResult& result) {
    std::ostringstream os;
    os << "weighted F1       " << fmt3(result.weighted_f1) << "\n";
    os << "kappa             " << fmt3(result.kappa) << "\n";
    for (std::size_t c = 0; c < result.cm.k; ++c) {
        const std::string name =
            c < kClassNames.size() ? kClassNames[c] : ("class" + std::to_string(c));
        os << "F1 " << name << std::string(name.size() < 15 ? 15 - name.size() : 1, ' ');
        if (std::isnan(result.per_class_f1[c])) {
            os << "undefined (no support)";
        } else {
            os << fmt3(result.per_class_f1[c]);
        }
        os << "\n";
    }
    return os.str();
}

} // namespace milgrade
