#include "elberto/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "elberto/kernels.hpp"
#include "json.hpp"

namespace elberto::train {

namespace k = elberto::kernels;
namespace fs = std::filesystem;
using objectives::Batch;
using objectives::FullModel;
using objectives::LossReport;
using objectives::QaItem;

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be > 0");
    if (warmup_fraction < 0 || warmup_fraction >= 1) {
        throw std::invalid_argument("warmup_fraction must be in [0, 1)");
    }
    weights.validate();
}

double lr_at(long long step, long long total_steps, const TrainConfig& config) {
    if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
    if (step < 0 || step > total_steps) throw std::invalid_argument("step out of range");
    const long long warmup =
        static_cast<long long>(std::ceil(config.warmup_fraction * static_cast<double>(total_steps)));
    if (step >= total_steps) return 0.0;
    if (step <= warmup && warmup > 0) {
        return config.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
    }
    return config.learning_rate * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
}

template <typename T>
double adam_step(FullModel<T>& model, FullModel<T>& grads, OptimizerState<T>& opt, double lr,
                 const TrainConfig& config) {
    double sq_norm = 0.0;
    for_each_model_tensor(grads, [&](const std::string&, const Mat<T>& g) {
        sq_norm += static_cast<double>(k::dot(g.data(), g.data(), static_cast<int>(g.size())));
    });
    const double norm = std::sqrt(sq_norm);
    if (config.clip_norm > 0.0 && norm > config.clip_norm) {
        const T factor = static_cast<T>(config.clip_norm / norm);
        for_each_model_tensor(grads, [&](const std::string&, Mat<T>& g) {
            k::scale(g.data(), factor, static_cast<int>(g.size()));
        });
    }

    opt.step += 1;
    const double bc1 = 1.0 / (1.0 - std::pow(config.adam_beta1, static_cast<double>(opt.step)));
    const double bc2 = 1.0 / (1.0 - std::pow(config.adam_beta2, static_cast<double>(opt.step)));

    // walk the three structures in lockstep via the manifest order
    std::vector<Mat<T>*> params, gs, ms, vs;
    for_each_model_tensor(model, [&](const std::string&, Mat<T>& t) { params.push_back(&t); });
    for_each_model_tensor(grads, [&](const std::string&, Mat<T>& t) { gs.push_back(&t); });
    for_each_model_tensor(opt.m, [&](const std::string&, Mat<T>& t) { ms.push_back(&t); });
    for_each_model_tensor(opt.v, [&](const std::string&, Mat<T>& t) { vs.push_back(&t); });
    for (size_t i = 0; i < params.size(); ++i) {
        k::adam_update(params[i]->data(), gs[i]->data(), ms[i]->data(), vs[i]->data(),
                       static_cast<int>(params[i]->size()), static_cast<T>(lr),
                       static_cast<T>(config.adam_beta1), static_cast<T>(config.adam_beta2),
                       static_cast<T>(config.adam_eps), static_cast<T>(bc1), static_cast<T>(bc2));
    }
    return norm;
}

std::vector<std::vector<int>> make_batches(int n_examples, int batch_size, uint64_t epoch_seed) {
    if (n_examples < 1) throw std::invalid_argument("empty QA set");
    std::vector<int> order(static_cast<size_t>(n_examples));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(epoch_seed);
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (int start = 0; start < n_examples; start += batch_size) {
        const int end = std::min(n_examples, start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

namespace {

// id -> instance pointers for batch assembly
struct StreamIndex {
    std::unordered_map<std::string, const taskgen::CrlInstance*> crl;
    std::unordered_map<std::string, const taskgen::JigsawInstance*> jp;
    std::unordered_map<std::string, const taskgen::BsopInstance*> bsop;
    std::unordered_map<std::string, const taskgen::MaskedInstance*> mem;
    std::unordered_map<std::string, const taskgen::MaskedInstance*> mlm;

    explicit StreamIndex(const taskgen::TaskStreams& s) {
        for (const auto& i : s.crl) crl.emplace(i.source_id, &i);
        for (const auto& i : s.jp) jp.emplace(i.source_id, &i);
        for (const auto& i : s.bsop) bsop.emplace(i.source_id, &i);
        for (const auto& i : s.mem) mem.emplace(i.source_id, &i);
        for (const auto& i : s.mlm) mlm.emplace(i.source_id, &i);
    }
};

template <typename T>
Batch assemble_batch(const std::vector<int>& indices, const std::vector<QaItem>& items,
                     const StreamIndex& index) {
    Batch b;
    for (int i : indices) {
        const QaItem& item = items[static_cast<size_t>(i)];
        b.qa.push_back(&item);
        if (auto it = index.crl.find(item.id); it != index.crl.end()) b.crl.push_back(it->second);
        if (auto it = index.jp.find(item.id); it != index.jp.end()) b.jp.push_back(it->second);
        if (auto it = index.bsop.find(item.id); it != index.bsop.end()) {
            b.bsop.push_back(it->second);
        }
        if (auto it = index.mem.find(item.id); it != index.mem.end()) b.mem.push_back(it->second);
        if (auto it = index.mlm.find(item.id); it != index.mlm.end()) b.mlm.push_back(it->second);
    }
    return b;
}

template <typename T>
void zero_model(FullModel<T>& m) {
    for_each_model_tensor(m, [](const std::string&, Mat<T>& t) { t.fill(T(0)); });
}

}  // namespace

template <typename T>
double qa_accuracy(const FullModel<T>& model, const corpus::Vocabulary& vocab,
                   const std::vector<corpus::QaExample>& dataset) {
    if (dataset.empty()) return 0.0;
    long long correct = 0;
    for (const auto& ex : dataset) {
        const QaItem item = objectives::encode_qa(ex, vocab);
        const auto r = objectives::qa_loss<T>(model, item, model::Mode::eval, nullptr, nullptr, 0.0);
        if (r.predicted == ex.gold) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

template <typename T>
TrainOutcome<T> train(const std::vector<corpus::QaExample>& train_set,
                      const std::vector<corpus::QaExample>& valid_set,
                      const corpus::Vocabulary& vocab, const taskgen::AntonymLexicon& lexicon,
                      const EncoderConfig& enc_config, const TrainConfig& config,
                      const std::string& out_dir) {
    config.validate();
    enc_config.validate();
    if (train_set.empty()) throw std::invalid_argument("empty QA training set");

    std::ofstream log;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        log.open(fs::path(out_dir) / "train_log.jsonl", std::ios::binary);
        if (!log) throw std::runtime_error("cannot write training log in " + out_dir);
    }

    TrainOutcome<T> outcome;
    const int n = static_cast<int>(train_set.size());
    outcome.steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    outcome.total_steps = static_cast<long long>(outcome.steps_per_epoch) * config.epochs;

    FullModel<T>& model = outcome.model;
    OptimizerState<T> opt = OptimizerState<T>::shaped(enc_config);
    int start_epoch = 0;
    if (!config.resume_from.empty()) {
        auto cp = checkpoint::load_checkpoint<T>(config.resume_from);
        model = std::move(cp.model);
        if (cp.has_optimizer) {
            opt.m = std::move(cp.adam_m);
            opt.v = std::move(cp.adam_v);
            opt.step = cp.adam_step;
        }
        start_epoch = static_cast<int>(cp.epoch) + 1;
    } else {
        Rng init_rng(derive_seed(config.seed, "init"));
        model = FullModel<T>::init(enc_config, init_rng);
    }

    std::vector<QaItem> items;
    items.reserve(train_set.size());
    for (const auto& ex : train_set) items.push_back(objectives::encode_qa(ex, vocab));

    FullModel<T> grads = FullModel<T>::shaped(enc_config);
    taskgen::TaskStreams streams;
    long long gstep = static_cast<long long>(start_epoch) * outcome.steps_per_epoch;

    for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
        const uint64_t ssl_epoch = config.regenerate_ssl_each_epoch ? static_cast<uint64_t>(epoch)
                                                                    : 0;
        streams = taskgen::build_streams(train_set, vocab, lexicon, config.gen,
                                         derive_seed(config.seed, "ssl", ssl_epoch));
        const StreamIndex index(streams);

        const auto batches =
            make_batches(n, config.batch_size, derive_seed(config.seed, "shuffle",
                                                           static_cast<uint64_t>(epoch)));
        double loss_sum = 0.0;
        for (const auto& batch_indices : batches) {
            const Batch batch = assemble_batch<T>(batch_indices, items, index);
            zero_model(grads);
            Rng step_rng(derive_seed(config.seed, "step", static_cast<uint64_t>(gstep)));
            const LossReport report =
                objectives::joint_loss(model, batch, config.weights, model::Mode::train,
                                       &step_rng, &grads);
            const double lr = lr_at(gstep + 1, outcome.total_steps, config);
            adam_step(model, grads, opt, lr, config);
            ++gstep;
            loss_sum += report.total;
            outcome.step_total_losses.push_back(report.total);
            if (log) log << report.to_json(gstep) << "\n";
        }

        EpochSummary summary;
        summary.epoch = epoch;
        summary.steps_done = gstep;
        summary.mean_total_loss = loss_sum / static_cast<double>(batches.size());
        summary.train_accuracy = qa_accuracy(model, vocab, train_set);
        summary.val_accuracy = valid_set.empty() ? 0.0 : qa_accuracy(model, vocab, valid_set);
        outcome.epochs.push_back(summary);
        if (log) {
            nlohmann::json j;
            j["epoch"] = summary.epoch;
            j["steps_done"] = summary.steps_done;
            j["mean_total_loss"] = summary.mean_total_loss;
            j["train_accuracy"] = summary.train_accuracy;
            j["val_accuracy"] = summary.val_accuracy;
            log << j.dump() << "\n";
        }

        if (!out_dir.empty()) {
            checkpoint::Checkpoint<T> cp;
            cp.model = model;
            cp.epoch = epoch;
            cp.has_optimizer = true;
            cp.adam_m = opt.m;
            cp.adam_v = opt.v;
            cp.adam_step = opt.step;
            checkpoint::save_checkpoint(
                (fs::path(out_dir) / ("checkpoint_epoch_" + std::to_string(epoch))).string(), cp);
        }
    }

    if (!out_dir.empty()) {
        checkpoint::Checkpoint<T> cp;
        cp.model = model;
        cp.epoch = config.epochs - 1;
        cp.has_optimizer = true;
        cp.adam_m = opt.m;
        cp.adam_v = opt.v;
        cp.adam_step = opt.step;
        checkpoint::save_checkpoint((fs::path(out_dir) / "final").string(), cp);
    }
    return outcome;
}

// ------------------------------------------------------------- ablation

std::vector<AblationSpec> table5_rows() {
    // baseline; each single task; three four/three-task mixes; CRL+JP; all five
    return {
        {"baseline", false, false, false, false, false},
        {"mlm", false, false, false, false, true},
        {"mem", false, false, false, true, false},
        {"bsop", false, false, true, false, false},
        {"jp", false, true, false, false, false},
        {"crl", true, false, false, false, false},
        {"mlm+mem+bsop+crl", true, false, true, true, true},
        {"mlm+mem+bsop+jp", false, true, true, true, true},
        {"mlm+mem+bsop", false, false, true, true, true},
        {"jp+crl", true, true, false, false, false},
        {"all", true, true, true, true, true},
    };
}

std::string AblationReport::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
        rows_json.push_back({{"name", r.spec.name},
                             {"tasks",
                              {{"crl", r.spec.crl},
                               {"jp", r.spec.jp},
                               {"bsop", r.spec.bsop},
                               {"mem", r.spec.mem},
                               {"mlm", r.spec.mlm}}},
                             {"val_accuracy", r.val_accuracy},
                             {"train_accuracy", r.train_accuracy}});
    }
    nlohmann::json j;
    j["seed"] = seed;
    j["rows"] = rows_json;
    return j.dump(2);
}

std::string AblationReport::to_text() const {
    std::ostringstream os;
    os << std::left << std::setw(4) << "#" << std::setw(20) << "tasks" << std::setw(6) << "crl"
       << std::setw(6) << "jp" << std::setw(6) << "bsop" << std::setw(6) << "mem" << std::setw(6)
       << "mlm" << std::right << std::setw(10) << "val_acc" << std::setw(12) << "train_acc"
       << "\n";
    int i = 0;
    for (const auto& r : rows) {
        os << std::left << std::setw(4) << ++i << std::setw(20) << r.spec.name << std::setw(6)
           << (r.spec.crl ? "x" : "") << std::setw(6) << (r.spec.jp ? "x" : "") << std::setw(6)
           << (r.spec.bsop ? "x" : "") << std::setw(6) << (r.spec.mem ? "x" : "") << std::setw(6)
           << (r.spec.mlm ? "x" : "") << std::right << std::setw(10) << std::fixed
           << std::setprecision(4) << r.val_accuracy << std::setw(12) << r.train_accuracy << "\n";
    }
    return os.str();
}

template <typename T>
AblationReport ablate(const std::vector<corpus::QaExample>& train_set,
                      const std::vector<corpus::QaExample>& valid_set,
                      const corpus::Vocabulary& vocab, const taskgen::AntonymLexicon& lexicon,
                      const EncoderConfig& enc_config, const TrainConfig& base_config,
                      const std::vector<AblationSpec>& subsets) {
    if (subsets.empty()) throw std::invalid_argument("ablate needs at least one subset");
    AblationReport report;
    report.seed = base_config.seed;
    for (const auto& spec : subsets) {
        TrainConfig cfg = base_config;  // identical seeds across rows
        cfg.gen.crl = spec.crl;
        cfg.gen.jp = spec.jp;
        cfg.gen.bsop = spec.bsop;
        cfg.gen.mem = spec.mem;
        cfg.gen.mlm = spec.mlm;
        const TrainOutcome<T> out =
            train<T>(train_set, valid_set, vocab, lexicon, enc_config, cfg, "");
        AblationRow row;
        row.spec = spec;
        row.val_accuracy = out.epochs.empty() ? 0.0 : out.epochs.back().val_accuracy;
        row.train_accuracy = out.epochs.empty() ? 0.0 : out.epochs.back().train_accuracy;
        report.rows.push_back(row);
    }
    return report;
}

// ------------------------------------------------------------- instantiations

template double adam_step<float>(FullModel<float>&, FullModel<float>&, OptimizerState<float>&,
                                 double, const TrainConfig&);
template double adam_step<double>(FullModel<double>&, FullModel<double>&, OptimizerState<double>&,
                                  double, const TrainConfig&);
template double qa_accuracy<float>(const FullModel<float>&, const corpus::Vocabulary&,
                                   const std::vector<corpus::QaExample>&);
template double qa_accuracy<double>(const FullModel<double>&, const corpus::Vocabulary&,
                                    const std::vector<corpus::QaExample>&);
template TrainOutcome<float> train<float>(const std::vector<corpus::QaExample>&,
                                          const std::vector<corpus::QaExample>&,
                                          const corpus::Vocabulary&,
                                          const taskgen::AntonymLexicon&, const EncoderConfig&,
                                          const TrainConfig&, const std::string&);
template TrainOutcome<double> train<double>(const std::vector<corpus::QaExample>&,
                                            const std::vector<corpus::QaExample>&,
                                            const corpus::Vocabulary&,
                                            const taskgen::AntonymLexicon&, const EncoderConfig&,
                                            const TrainConfig&, const std::string&);
template AblationReport ablate<float>(const std::vector<corpus::QaExample>&,
                                      const std::vector<corpus::QaExample>&,
                                      const corpus::Vocabulary&, const taskgen::AntonymLexicon&,
                                      const EncoderConfig&, const TrainConfig&,
                                      const std::vector<AblationSpec>&);
template AblationReport ablate<double>(const std::vector<corpus::QaExample>&,
                                       const std::vector<corpus::QaExample>&,
                                       const corpus::Vocabulary&, const taskgen::AntonymLexicon&,
                                       const EncoderConfig&, const TrainConfig&,
                                       const std::vector<AblationSpec>&);

}  // namespace elberto::train
