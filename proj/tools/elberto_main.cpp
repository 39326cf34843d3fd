// elberto command-line interface: vocabulary building, SSL task stream
// generation, joint training, evaluation, transfer evaluation, ablation
// sweeps and gradient checking. Every subcommand accepts --config (key=value
// file with [section] headers); explicit flags override config values.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "elberto/checkpoint.hpp"
#include "elberto/config.hpp"
#include "elberto/corpus.hpp"
#include "elberto/evaluate.hpp"
#include "elberto/gradcheck.hpp"
#include "elberto/kernels.hpp"
#include "elberto/lexicon.hpp"
#include "elberto/taskgen.hpp"
#include "elberto/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace elberto;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<uint64_t> seed;
    config::ConfigMap cfg;

    void load() {
        if (!config_path.empty()) cfg = config::parse_file(config_path);
    }
    uint64_t seed_value(uint64_t fallback) const {
        if (seed) return *seed;
        return static_cast<uint64_t>(cfg.get_i64("train.seed", static_cast<long long>(fallback)));
    }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value config file");
    cmd->add_option("--seed", args.seed, "random seed (overrides config)");
}

template <typename T>
T flag_or(CLI::Option* opt, const T& flag_value, const config::ConfigMap& cfg,
          const std::string& key, const T& fallback);

template <>
std::string flag_or(CLI::Option* opt, const std::string& v, const config::ConfigMap& cfg,
                    const std::string& key, const std::string& fallback) {
    if (opt != nullptr && opt->count() > 0) return v;
    return cfg.get_str(key, fallback);
}
template <>
int flag_or(CLI::Option* opt, const int& v, const config::ConfigMap& cfg, const std::string& key,
            const int& fallback) {
    if (opt != nullptr && opt->count() > 0) return v;
    return cfg.get_int(key, fallback);
}
template <>
double flag_or(CLI::Option* opt, const double& v, const config::ConfigMap& cfg,
               const std::string& key, const double& fallback) {
    if (opt != nullptr && opt->count() > 0) return v;
    return cfg.get_double(key, fallback);
}

model::EncoderConfig encoder_config_from(const config::ConfigMap& cfg, int vocab_size) {
    model::EncoderConfig ec;
    ec.vocab_size = vocab_size;
    ec.max_len = cfg.get_int("model.max_len", 180);
    ec.d_model = cfg.get_int("model.d_model", 64);
    ec.n_heads = cfg.get_int("model.n_heads", 4);
    ec.n_layers = cfg.get_int("model.n_layers", 2);
    ec.d_ff = cfg.get_int("model.d_ff", 256);
    ec.dropout_p = cfg.get_double("model.dropout", 0.1);
    ec.n_types = cfg.get_int("model.n_types", 2);
    return ec;
}

train::TrainConfig train_config_from(const config::ConfigMap& cfg, uint64_t seed) {
    train::TrainConfig tc;
    tc.epochs = cfg.get_int("train.epochs", 10);
    tc.batch_size = cfg.get_int("train.batch_size", 4);
    tc.learning_rate = cfg.get_double("train.lr", 1e-3);
    tc.warmup_fraction = cfg.get_double("train.warmup_fraction", 0.10);
    tc.clip_norm = cfg.get_double("train.clip_norm", 1.0);
    tc.weights.alpha = cfg.get_double("train.alpha", 0.2);
    tc.weights.beta = cfg.get_double("train.beta", 0.2);
    tc.weights.gamma = cfg.get_double("train.gamma", 0.2);
    tc.weights.lambda_ = cfg.get_double("train.lambda", 0.2);
    tc.weights.delta = cfg.get_double("train.delta", 0.2);
    tc.regenerate_ssl_each_epoch = cfg.get_bool("train.regenerate_ssl_each_epoch", true);
    tc.gen = taskgen::GenerationConfig::from_task_list(
        cfg.get_str("gen.tasks", "crl,jp,bsop,mem,mlm"));
    tc.gen.K = cfg.get_int("gen.K", 5);
    tc.gen.P = cfg.get_int("gen.P", 5);
    tc.gen.n_flips = cfg.get_int("gen.n_flips", 1);
    tc.gen.max_len = cfg.get_int("gen.max_len", cfg.get_int("model.max_len", 180));
    tc.seed = seed;
    return tc;
}

corpus::Vocabulary vocab_for_checkpoint(const std::string& checkpoint_dir,
                                        const std::string& vocab_flag) {
    if (!vocab_flag.empty()) return corpus::Vocabulary::load(vocab_flag);
    const fs::path sibling = fs::path(checkpoint_dir).parent_path() / "vocab.tsv";
    if (fs::exists(sibling)) return corpus::Vocabulary::load(sibling.string());
    const fs::path inside = fs::path(checkpoint_dir) / "vocab.tsv";
    if (fs::exists(inside)) return corpus::Vocabulary::load(inside.string());
    throw std::runtime_error("no vocab.tsv found near " + checkpoint_dir +
                             "; pass --vocab explicitly");
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::vector<train::AblationSpec> parse_ablation_rows(const std::string& rows) {
    if (rows == "table5") return train::table5_rows();
    std::vector<train::AblationSpec> specs;
    std::stringstream ss(rows);
    std::string row;
    while (std::getline(ss, row, ';')) {
        if (row.empty()) continue;
        train::AblationSpec spec;
        spec.name = row;
        if (row == "none" || row == "baseline") {
            specs.push_back(spec);
            continue;
        }
        if (row == "all") {
            spec.crl = spec.jp = spec.bsop = spec.mem = spec.mlm = true;
            specs.push_back(spec);
            continue;
        }
        std::stringstream ts(row);
        std::string task;
        while (std::getline(ts, task, '+')) {
            if (task == "crl") spec.crl = true;
            else if (task == "jp") spec.jp = true;
            else if (task == "bsop") spec.bsop = true;
            else if (task == "mem") spec.mem = true;
            else if (task == "mlm") spec.mlm = true;
            else throw std::runtime_error("unknown task in --rows: '" + task + "'");
        }
        specs.push_back(spec);
    }
    if (specs.empty()) throw std::runtime_error("--rows parsed to zero subsets");
    return specs;
}

// ------------------------------------------------------------- subcommands

int cmd_build_vocab(const CommonArgs& args, const std::string& data, const std::string& out,
                    int min_count) {
    const auto examples = corpus::load_dataset_strict(data);
    const auto vocab = corpus::Vocabulary::build(examples, min_count);
    vocab.dump(out);
    std::cout << "vocabulary: " << vocab.size() << " tokens (" << corpus::Vocabulary::n_specials
              << " specials) from " << examples.size() << " examples -> " << out << "\n";
    (void)args;
    return 0;
}

int cmd_gen_tasks(const CommonArgs& args, const std::string& data, const std::string& lexicon_path,
                  const std::string& out_dir, const taskgen::GenerationConfig& gen,
                  int min_count) {
    const auto examples = corpus::load_dataset_strict(data);
    const auto vocab = corpus::Vocabulary::build(examples, min_count);
    const auto lex = taskgen::load_lexicon(lexicon_path);
    const uint64_t seed = args.seed_value(1);
    const auto stats = taskgen::generate_stream(examples, vocab, lex.lexicon, gen, seed, out_dir);
    vocab.dump((fs::path(out_dir) / "vocab.tsv").string());
    std::cout << stats.to_json() << "\n";
    return 0;
}

template <typename T>
int run_train(const CommonArgs& args, const std::string& data, const std::string& valid,
              const std::string& lexicon_path, const std::string& out_dir,
              const std::string& resume) {
    const auto train_set = corpus::load_dataset_strict(data);
    std::vector<corpus::QaExample> valid_set;
    if (!valid.empty()) valid_set = corpus::load_dataset_strict(valid);
    const auto lex = taskgen::load_lexicon(lexicon_path);

    const int min_count = args.cfg.get_int("vocab.min_count", 2);
    const auto vocab = corpus::Vocabulary::build(train_set, min_count);
    const auto enc_cfg = encoder_config_from(args.cfg, vocab.size());
    train::TrainConfig tc = train_config_from(args.cfg, args.seed_value(1));
    tc.resume_from = resume;

    fs::create_directories(out_dir);
    vocab.dump((fs::path(out_dir) / "vocab.tsv").string());
    const auto outcome = train::train<T>(train_set, valid_set, vocab, lex.lexicon, enc_cfg, tc,
                                         out_dir);
    const auto& last = outcome.epochs.back();
    std::cout << "trained " << outcome.total_steps << " steps; final train_accuracy="
              << last.train_accuracy << " val_accuracy=" << last.val_accuracy << "\n"
              << "checkpoint: " << (fs::path(out_dir) / "final").string() << "\n";
    return 0;
}

template <typename T>
int run_eval(const std::string& checkpoint_dir, const std::string& data,
             const std::string& vocab_flag, const std::string& out, const std::string& csv,
             const std::string& source_data, bool transfer) {
    const auto cp = checkpoint::load_checkpoint<T>(checkpoint_dir);
    const auto vocab = vocab_for_checkpoint(checkpoint_dir, vocab_flag);
    if (vocab.size() != cp.model.config().vocab_size) {
        throw std::runtime_error("vocabulary size does not match checkpoint manifest");
    }
    const auto dataset = corpus::load_dataset_strict(data);
    const std::string fingerprint = checkpoint::checkpoint_fingerprint(checkpoint_dir);

    evalcli::EvalReport report;
    if (transfer) {
        const std::string source_fp = source_data.empty()
                                          ? fingerprint
                                          : checkpoint::file_fingerprint(source_data);
        report = evalcli::transfer_eval(cp.model, vocab, dataset, fingerprint, source_fp,
                                        checkpoint::file_fingerprint(data));
    } else {
        report = evalcli::evaluate(cp.model, vocab, dataset, fingerprint);
    }
    if (out.empty()) {
        std::cout << report.to_json() << "\n";
    } else {
        write_text_file(out, report.to_json() + "\n");
        std::cout << "overall_accuracy=" << report.overall_accuracy() << " (" << report.correct
                  << "/" << report.count << ") -> " << out << "\n";
    }
    if (!csv.empty()) write_text_file(csv, report.to_csv());
    return 0;
}

template <typename T>
int run_ablate(const CommonArgs& args, const std::string& data, const std::string& valid,
               const std::string& lexicon_path, const std::string& rows,
               const std::string& out_dir) {
    const auto train_set = corpus::load_dataset_strict(data);
    const auto valid_set = corpus::load_dataset_strict(valid);
    const auto lex = taskgen::load_lexicon(lexicon_path);
    const int min_count = args.cfg.get_int("vocab.min_count", 2);
    const auto vocab = corpus::Vocabulary::build(train_set, min_count);
    const auto enc_cfg = encoder_config_from(args.cfg, vocab.size());
    const train::TrainConfig tc = train_config_from(args.cfg, args.seed_value(1));

    const auto specs = parse_ablation_rows(rows);
    const auto report =
        train::ablate<T>(train_set, valid_set, vocab, lex.lexicon, enc_cfg, tc, specs);

    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "ablation.json").string(), report.to_json() + "\n");
    write_text_file((fs::path(out_dir) / "ablation.txt").string(), report.to_text());
    std::cout << report.to_text();
    return 0;
}

int cmd_gradcheck(const CommonArgs& args, int samples, double h, double threshold) {
    model::EncoderConfig cfg = gradcheck::toy_config();
    if (args.cfg.has("model.d_model")) {
        cfg = encoder_config_from(args.cfg, cfg.vocab_size);
        cfg.dropout_p = 0.0;
    }
    objectives::LossWeights weights;
    const auto res = gradcheck::run(cfg, weights, args.seed_value(1), samples, h);
    std::cout << "gradcheck: loss=" << res.loss << " checked=" << res.n_checked
              << " max_rel_error=" << res.max_rel_error << " (worst: " << res.worst_tensor << "["
              << res.worst_index << "] analytic=" << res.worst_analytic
              << " numeric=" << res.worst_numeric << ")\n";
    if (res.max_rel_error < threshold) {
        std::cout << "PASS (threshold " << threshold << ")\n";
        return 0;
    }
    std::cout << "FAIL (threshold " << threshold << ")\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"elberto: multi-task self-supervised commonsense QA pipeline"};
    app.require_subcommand(1);

    try {
        // ---- build-vocab
        CommonArgs vocab_args;
        std::string bv_data, bv_out = "vocab.tsv";
        int bv_min_count = 2;
        auto* bv = app.add_subcommand("build-vocab", "build a vocabulary dump from a dataset");
        add_common(bv, vocab_args);
        auto* bv_data_opt = bv->add_option("--data", bv_data, "dataset JSONL");
        bv->add_option("--out", bv_out, "output vocab path");
        auto* bv_mc_opt = bv->add_option("--min-count", bv_min_count, "frequency threshold");
        bv->callback([&] {
            vocab_args.load();
            const std::string data =
                flag_or(bv_data_opt, bv_data, vocab_args.cfg, "data.train", std::string());
            if (data.empty()) throw CLI::ValidationError("--data or config data.train required");
            const int mc = flag_or(bv_mc_opt, bv_min_count, vocab_args.cfg, "vocab.min_count", 2);
            std::exit(cmd_build_vocab(vocab_args, data, bv_out, mc));
        });

        // ---- gen-tasks
        CommonArgs gen_args;
        std::string gt_data, gt_lexicon, gt_out = "tasks", gt_tasks = "crl,jp,bsop,mem,mlm";
        int gt_k = 5, gt_p = 5, gt_flips = 1, gt_maxlen = 180;
        auto* gt = app.add_subcommand("gen-tasks", "construct the five SSL task streams");
        add_common(gt, gen_args);
        auto* gt_data_opt = gt->add_option("--data", gt_data, "dataset JSONL");
        auto* gt_lex_opt = gt->add_option("--lexicon", gt_lexicon, "antonym lexicon TSV");
        gt->add_option("--out", gt_out, "output directory");
        auto* gt_tasks_opt = gt->add_option("--tasks", gt_tasks, "comma list of tasks");
        auto* gt_k_opt = gt->add_option("--K", gt_k, "jigsaw segment count");
        auto* gt_p_opt = gt->add_option("--P", gt_p, "jigsaw candidate count");
        auto* gt_flips_opt = gt->add_option("--n-flips", gt_flips, "CRL flips per instance");
        auto* gt_ml_opt = gt->add_option("--max-len", gt_maxlen, "masked sequence budget");
        gt->callback([&] {
            gen_args.load();
            const std::string data =
                flag_or(gt_data_opt, gt_data, gen_args.cfg, "data.train", std::string());
            const std::string lexicon =
                flag_or(gt_lex_opt, gt_lexicon, gen_args.cfg, "data.lexicon", std::string());
            if (data.empty() || lexicon.empty()) {
                throw CLI::ValidationError("--data and --lexicon (or config) required");
            }
            auto gen = taskgen::GenerationConfig::from_task_list(
                flag_or(gt_tasks_opt, gt_tasks, gen_args.cfg, "gen.tasks",
                        std::string("crl,jp,bsop,mem,mlm")));
            gen.K = flag_or(gt_k_opt, gt_k, gen_args.cfg, "gen.K", 5);
            gen.P = flag_or(gt_p_opt, gt_p, gen_args.cfg, "gen.P", 5);
            gen.n_flips = flag_or(gt_flips_opt, gt_flips, gen_args.cfg, "gen.n_flips", 1);
            gen.max_len = flag_or(gt_ml_opt, gt_maxlen, gen_args.cfg, "gen.max_len", 180);
            std::exit(cmd_gen_tasks(gen_args, data, lexicon, gt_out, gen,
                                    gen_args.cfg.get_int("vocab.min_count", 2)));
        });

        // ---- train
        CommonArgs train_args;
        std::string tr_data, tr_valid, tr_lexicon, tr_out = "run", tr_resume, tr_precision;
        auto* tr = app.add_subcommand("train", "joint QA + SSL training");
        add_common(tr, train_args);
        auto* tr_data_opt = tr->add_option("--data", tr_data, "training JSONL");
        auto* tr_valid_opt = tr->add_option("--valid", tr_valid, "validation JSONL");
        auto* tr_lex_opt = tr->add_option("--lexicon", tr_lexicon, "antonym lexicon TSV");
        tr->add_option("--out", tr_out, "output directory");
        tr->add_option("--resume", tr_resume, "checkpoint directory to resume from");
        auto* tr_prec_opt = tr->add_option("--precision", tr_precision, "f32 or f64");
        tr->callback([&] {
            train_args.load();
            const std::string data =
                flag_or(tr_data_opt, tr_data, train_args.cfg, "data.train", std::string());
            const std::string valid =
                flag_or(tr_valid_opt, tr_valid, train_args.cfg, "data.valid", std::string());
            const std::string lexicon =
                flag_or(tr_lex_opt, tr_lexicon, train_args.cfg, "data.lexicon", std::string());
            if (data.empty() || lexicon.empty()) {
                throw CLI::ValidationError("--data and --lexicon (or config) required");
            }
            const std::string precision = flag_or(tr_prec_opt, tr_precision, train_args.cfg,
                                                  "model.precision", std::string("f32"));
            if (precision == "f32") {
                std::exit(run_train<float>(train_args, data, valid, lexicon, tr_out, tr_resume));
            } else if (precision == "f64") {
                std::exit(run_train<double>(train_args, data, valid, lexicon, tr_out, tr_resume));
            }
            throw CLI::ValidationError("unknown precision '" + precision + "'");
        });

        // ---- eval / transfer-eval
        for (const bool transfer : {false, true}) {
            auto* args = new CommonArgs();
            auto* ev_checkpoint = new std::string();
            auto* ev_data = new std::string();
            auto* ev_vocab = new std::string();
            auto* ev_out = new std::string();
            auto* ev_csv = new std::string();
            auto* ev_source = new std::string();
            auto* ev = app.add_subcommand(
                transfer ? "transfer-eval" : "eval",
                transfer ? "evaluate a checkpoint on an out-of-domain dataset"
                         : "evaluate a checkpoint with question-type breakdown");
            add_common(ev, *args);
            ev->add_option("--checkpoint", *ev_checkpoint, "checkpoint directory")->required();
            ev->add_option("--data", *ev_data, "dataset JSONL")->required();
            ev->add_option("--vocab", *ev_vocab, "vocabulary dump (default: near checkpoint)");
            ev->add_option("--out", *ev_out, "report JSON path (default: stdout)");
            ev->add_option("--csv", *ev_csv, "also write predictions CSV");
            if (transfer) {
                ev->add_option("--source-data", *ev_source,
                               "training dataset for the source fingerprint");
            }
            ev->callback([=] {
                args->load();
                const std::string dtype = checkpoint::checkpoint_dtype(*ev_checkpoint);
                if (dtype == "f32") {
                    std::exit(run_eval<float>(*ev_checkpoint, *ev_data, *ev_vocab, *ev_out,
                                              *ev_csv, *ev_source, transfer));
                }
                std::exit(run_eval<double>(*ev_checkpoint, *ev_data, *ev_vocab, *ev_out, *ev_csv,
                                           *ev_source, transfer));
            });
        }

        // ---- ablate
        CommonArgs ab_args;
        std::string ab_data, ab_valid, ab_lexicon, ab_rows = "table5", ab_out = "ablation",
                    ab_precision;
        auto* ab = app.add_subcommand("ablate", "train one model per task subset");
        add_common(ab, ab_args);
        auto* ab_data_opt = ab->add_option("--data", ab_data, "training JSONL");
        auto* ab_valid_opt = ab->add_option("--valid", ab_valid, "validation JSONL");
        auto* ab_lex_opt = ab->add_option("--lexicon", ab_lexicon, "antonym lexicon TSV");
        ab->add_option("--rows", ab_rows, "table5 or ';'-separated task subsets (e.g. none;jp+crl)");
        ab->add_option("--out", ab_out, "output directory");
        auto* ab_prec_opt = ab->add_option("--precision", ab_precision, "f32 or f64");
        ab->callback([&] {
            ab_args.load();
            const std::string data =
                flag_or(ab_data_opt, ab_data, ab_args.cfg, "data.train", std::string());
            const std::string valid =
                flag_or(ab_valid_opt, ab_valid, ab_args.cfg, "data.valid", std::string());
            const std::string lexicon =
                flag_or(ab_lex_opt, ab_lexicon, ab_args.cfg, "data.lexicon", std::string());
            if (data.empty() || valid.empty() || lexicon.empty()) {
                throw CLI::ValidationError("--data, --valid and --lexicon (or config) required");
            }
            const std::string precision = flag_or(ab_prec_opt, ab_precision, ab_args.cfg,
                                                  "model.precision", std::string("f32"));
            if (precision == "f32") {
                std::exit(run_ablate<float>(ab_args, data, valid, lexicon, ab_rows, ab_out));
            }
            std::exit(run_ablate<double>(ab_args, data, valid, lexicon, ab_rows, ab_out));
        });

        // ---- gradcheck
        CommonArgs gc_args;
        int gc_samples = 200;
        double gc_h = 1e-5, gc_threshold = 1e-4;
        auto* gc = app.add_subcommand("gradcheck",
                                      "finite-difference check of the joint-loss gradients");
        add_common(gc, gc_args);
        gc->add_option("--samples", gc_samples, "parameters to sample (default 200)");
        gc->add_option("--fd-h", gc_h, "central-difference step (default 1e-5)");
        gc->add_option("--threshold", gc_threshold, "max relative error (default 1e-4)");
        gc->callback([&] {
            gc_args.load();
            std::exit(cmd_gradcheck(gc_args, gc_samples, gc_h, gc_threshold));
        });

        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
