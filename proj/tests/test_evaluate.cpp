#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "elberto/config.hpp"
#include "elberto/corpus.hpp"
#include "elberto/evaluate.hpp"
#include "elberto/lexicon.hpp"
#include "elberto/trainer.hpp"
#include "json.hpp"

using namespace elberto;
using corpus::QaExample;
using corpus::Vocabulary;
using model::EncoderConfig;
using objectives::FullModel;
namespace fs = std::filesystem;

namespace {

std::string data_path(const std::string& name) {
    return std::string(ELBERTO_SOURCE_DIR) + "/data/" + name;
}

EncoderConfig eval_config(int vocab_size) {
    EncoderConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.max_len = 64;
    cfg.d_model = 16;
    cfg.n_heads = 4;
    cfg.n_layers = 1;
    cfg.d_ff = 32;
    cfg.dropout_p = 0.0;
    return cfg;
}

std::vector<QaExample> synthetic_dataset(int n, int n_options, uint64_t seed) {
    // random word soup; the model's predictions on it are arbitrary but fixed
    Rng rng(seed);
    const char* words[] = {"red", "blue", "green", "bird", "tree", "rock", "wind",
                           "rain", "fast", "slow", "more", "less"};
    auto sentence = [&](int len) {
        std::string s;
        for (int i = 0; i < len; ++i) {
            if (i) s += " ";
            s += words[rng.next_int(12)];
        }
        return s + " .";
    };
    std::vector<QaExample> out;
    for (int i = 0; i < n; ++i) {
        QaExample ex;
        char buf[16];
        std::snprintf(buf, sizeof buf, "syn-%04d", i);
        ex.id = buf;
        ex.context = sentence(8) + " " + sentence(6);
        ex.question = sentence(5);
        for (int t = 0; t < n_options; ++t) ex.options.push_back(words[rng.next_int(12)]);
        ex.gold = rng.next_int(n_options);
        ex.qtype = i % 3 == 0   ? corpus::QType::in_paragraph
                   : i % 3 == 1 ? corpus::QType::out_of_paragraph
                                : corpus::QType::no_effect;
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace

TEST_CASE("evaluate: idempotent, counts partition the dataset") {
    const auto dataset = synthetic_dataset(60, 3, 5);
    const auto vocab = Vocabulary::build(dataset, 1);
    Rng rng(1);
    const auto m = FullModel<double>::init(eval_config(vocab.size()), rng);

    const auto r1 = evalcli::evaluate(m, vocab, dataset, "fp");
    const auto r2 = evalcli::evaluate(m, vocab, dataset, "fp");
    CHECK(r1.to_json() == r2.to_json());
    CHECK(r1.count == 60);

    long long qtype_total = 0, qtype_correct = 0;
    for (const auto& [name, stat] : r1.per_qtype) {
        qtype_total += stat.count;
        qtype_correct += stat.correct;
    }
    CHECK(qtype_total == r1.count);
    CHECK(qtype_correct == r1.correct);

    // predictions are ordered by id
    for (size_t i = 1; i < r1.predictions.size(); ++i) {
        CHECK(r1.predictions[i - 1].id < r1.predictions[i].id);
    }
    CHECK_THROWS(evalcli::evaluate(m, vocab, {}, "fp"));
}

TEST_CASE("evaluate: untrained model scores near chance on random 3-option items") {
    const auto dataset = synthetic_dataset(3000, 3, 17);
    const auto vocab = Vocabulary::build(dataset, 1);
    Rng rng(2);
    const auto m = FullModel<double>::init(eval_config(vocab.size()), rng);
    const auto r = evalcli::evaluate(m, vocab, dataset, "fp");
    // binomial interval around 1/3 for random argmax at n=3000
    CHECK(r.overall_accuracy() > 0.28);
    CHECK(r.overall_accuracy() < 0.39);
}

TEST_CASE("evaluate: per-qtype arithmetic (2 of 2 in, 0 of 1 out)") {
    auto dataset = synthetic_dataset(3, 2, 23);
    const auto vocab = Vocabulary::build(dataset, 1);
    Rng rng(3);
    const auto m = FullModel<double>::init(eval_config(vocab.size()), rng);
    // align golds with the model's own argmax to force correctness pattern
    auto probe = evalcli::evaluate(m, vocab, dataset, "fp");
    dataset[0].qtype = corpus::QType::in_paragraph;
    dataset[1].qtype = corpus::QType::in_paragraph;
    dataset[2].qtype = corpus::QType::out_of_paragraph;
    for (int i = 0; i < 3; ++i) {
        const int predicted = probe.predictions[static_cast<size_t>(i)].predicted;
        dataset[static_cast<size_t>(i)].gold =
            i < 2 ? predicted : (1 - predicted);  // first two right, last wrong
    }
    const auto r = evalcli::evaluate(m, vocab, dataset, "fp");
    CHECK(std::abs(r.overall_accuracy() - 2.0 / 3.0) < 1e-12);
    CHECK(r.per_qtype.at("in_paragraph").accuracy() == 1.0);
    CHECK(r.per_qtype.at("out_of_paragraph").accuracy() == 0.0);
}

TEST_CASE("argmax ties break toward the lowest option index") {
    // identical options produce identical logits; prediction must be index 0
    QaExample ex;
    ex.id = "tie";
    ex.context = "same same same .";
    ex.question = "which ?";
    ex.options = {"same", "same", "same"};
    ex.gold = 1;
    const std::vector<QaExample> dataset = {ex};
    const auto vocab = Vocabulary::build(dataset, 1);
    Rng rng(4);
    const auto m = FullModel<double>::init(eval_config(vocab.size()), rng);
    const auto r = evalcli::evaluate(m, vocab, dataset, "fp");
    CHECK(r.predictions[0].predicted == 0);
}

TEST_CASE("transfer_eval: A = B reproduces evaluate; fingerprints are tagged") {
    const auto dataset = synthetic_dataset(40, 3, 29);
    const auto vocab = Vocabulary::build(dataset, 1);
    Rng rng(5);
    const auto m = FullModel<double>::init(eval_config(vocab.size()), rng);
    const auto plain = evalcli::evaluate(m, vocab, dataset, "fp");
    const auto transfer = evalcli::transfer_eval(m, vocab, dataset, "fp", "src-fp", "tgt-fp");
    CHECK(plain.overall_accuracy() == transfer.overall_accuracy());
    CHECK(plain.predictions.size() == transfer.predictions.size());
    CHECK(transfer.source_fingerprint == "src-fp");
    CHECK(transfer.target_fingerprint == "tgt-fp");
    const auto j = nlohmann::json::parse(transfer.to_json());
    CHECK(j["source_fingerprint"] == "src-fp");
}

TEST_CASE("transfer_eval: disjoint-vocabulary target runs UNK-heavy near chance") {
    const auto train_like = synthetic_dataset(30, 3, 31);
    const auto vocab = Vocabulary::build(train_like, 1);
    Rng rng(6);
    const auto m = FullModel<double>::init(eval_config(vocab.size()), rng);

    std::vector<QaExample> target;
    for (int i = 0; i < 200; ++i) {
        QaExample ex;
        char buf[16];
        std::snprintf(buf, sizeof buf, "tgt-%03d", i);
        ex.id = buf;
        ex.context = "zzyx qwub vrem plok .";
        ex.question = "gnar blib ?";
        ex.options = {"uno", "dos", "tres"};
        ex.gold = i % 3;
        target.push_back(std::move(ex));
    }
    const auto r = evalcli::transfer_eval(m, vocab, target, "fp", "s", "t");
    CHECK(r.count == 200);
    // all options encode to UNK -> identical logits -> predicted 0 always
    for (const auto& p : r.predictions) CHECK(p.predicted == 0);
    CHECK(r.overall_accuracy() > 0.2);
    CHECK(r.overall_accuracy() < 0.47);
}

TEST_CASE("csv report lists id,predicted,gold,qtype rows") {
    const auto dataset = synthetic_dataset(5, 2, 37);
    const auto vocab = Vocabulary::build(dataset, 1);
    Rng rng(7);
    const auto m = FullModel<double>::init(eval_config(vocab.size()), rng);
    const auto r = evalcli::evaluate(m, vocab, dataset, "fp");
    const auto csv = r.to_csv();
    CHECK(csv.rfind("id,predicted,gold,qtype\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
    CHECK(csv.find("syn-0000") != std::string::npos);
}

TEST_CASE("config parser: sections, overrides, line-numbered errors") {
    const auto cfg = config::parse_string(
        "# comment\n"
        "[model]\n"
        "d_model = 32\n"
        "dropout = 0.05\n"
        "[train]\n"
        "epochs = 3\n"
        "regenerate_ssl_each_epoch = false\n",
        "test.cfg");
    CHECK(cfg.get_int("model.d_model", 0) == 32);
    CHECK(cfg.get_double("model.dropout", 0) == 0.05);
    CHECK(cfg.get_int("train.epochs", 0) == 3);
    CHECK(cfg.get_bool("train.regenerate_ssl_each_epoch", true) == false);
    CHECK(cfg.get_int("train.batch_size", 4) == 4);  // fallback

    CHECK_THROWS_WITH_AS(config::parse_string("[model\nx = 1\n", "bad.cfg"),
                         doctest::Contains("line 1"), std::runtime_error);
    CHECK_THROWS_WITH_AS(config::parse_string("[a]\nnot a pair\n", "bad.cfg"),
                         doctest::Contains("line 2"), std::runtime_error);
    CHECK_THROWS(cfg.get_int("model.dropout", 0));  // 0.05 is not an integer
}

TEST_CASE("shipped toy.cfg parses and carries the documented defaults") {
    const auto cfg = config::parse_file(std::string(ELBERTO_SOURCE_DIR) + "/data/toy.cfg");
    CHECK(cfg.get_int("model.d_model", 0) == 64);
    CHECK(cfg.get_int("train.epochs", 0) == 10);
    CHECK(cfg.get_int("train.batch_size", 0) == 4);
    CHECK(cfg.get_double("train.alpha", 0) == 0.2);
    CHECK(cfg.get_double("train.delta", 0) == 0.2);
    CHECK(cfg.get_int("gen.K", 0) == 5);
    CHECK(cfg.get_int("gen.P", 0) == 5);
}

TEST_CASE("end-to-end: short train then evaluate reads back above chance on train data") {
    const auto examples = corpus::load_dataset_strict(data_path("overfit.jsonl"));
    const auto vocab = Vocabulary::build(examples, 2);
    const auto lexicon = taskgen::load_lexicon(data_path("antonyms.tsv")).lexicon;
    auto cfg = eval_config(vocab.size());
    train::TrainConfig tc;
    tc.epochs = 12;
    tc.seed = 9;
    const auto out = train::train<double>(examples, {}, vocab, lexicon, cfg, tc, "");
    const auto r = evalcli::evaluate(out.model, vocab, examples, "fp");
    CHECK(r.overall_accuracy() == out.epochs.back().train_accuracy);
}
