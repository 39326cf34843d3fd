#include "elberto/evaluate.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "elberto/threads.hpp"
#include "json.hpp"

namespace elberto::evalcli {

using objectives::FullModel;

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["overall_accuracy"] = overall_accuracy();
    j["count"] = count;
    j["correct"] = correct;
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [name, stat] : per_qtype) {
        per[name] = {{"accuracy", stat.accuracy()}, {"count", stat.count},
                     {"correct", stat.correct}};
    }
    j["per_qtype"] = per;
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& p : predictions) {
        preds.push_back({{"id", p.id},
                         {"predicted", p.predicted},
                         {"gold", p.gold},
                         {"qtype", corpus::qtype_name(p.qtype)}});
    }
    j["predictions"] = preds;
    j["config_fingerprint"] = config_fingerprint;
    if (!source_fingerprint.empty()) j["source_fingerprint"] = source_fingerprint;
    if (!target_fingerprint.empty()) j["target_fingerprint"] = target_fingerprint;
    return j.dump(2);
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "id,predicted,gold,qtype\n";
    for (const auto& p : predictions) {
        os << p.id << "," << p.predicted << "," << p.gold << "," << corpus::qtype_name(p.qtype)
           << "\n";
    }
    return os.str();
}

template <typename T>
EvalReport evaluate(const FullModel<T>& model, const corpus::Vocabulary& vocab,
                    const std::vector<corpus::QaExample>& dataset,
                    const std::string& config_fingerprint) {
    if (dataset.empty()) throw std::invalid_argument("empty dataset");

    const int n = static_cast<int>(dataset.size());
    std::vector<Prediction> preds(static_cast<size_t>(n));
    parallel_for(n, [&](int i) {
        const auto& ex = dataset[static_cast<size_t>(i)];
        const objectives::QaItem item = objectives::encode_qa(ex, vocab);
        const auto r = objectives::qa_loss<T>(model, item, model::Mode::eval, nullptr, nullptr, 0.0);
        preds[static_cast<size_t>(i)] = {ex.id, r.predicted, ex.gold, ex.qtype};
    });
    std::sort(preds.begin(), preds.end(),
              [](const Prediction& a, const Prediction& b) { return a.id < b.id; });

    EvalReport report;
    report.config_fingerprint = config_fingerprint;
    report.predictions = std::move(preds);
    for (const auto& p : report.predictions) {
        ++report.count;
        auto& stat = report.per_qtype[corpus::qtype_name(p.qtype)];
        ++stat.count;
        if (p.predicted == p.gold) {
            ++report.correct;
            ++stat.correct;
        }
    }
    return report;
}

template <typename T>
EvalReport transfer_eval(const FullModel<T>& model, const corpus::Vocabulary& vocab,
                         const std::vector<corpus::QaExample>& dataset,
                         const std::string& config_fingerprint,
                         const std::string& source_fingerprint,
                         const std::string& target_fingerprint) {
    EvalReport report = evaluate(model, vocab, dataset, config_fingerprint);
    report.source_fingerprint = source_fingerprint;
    report.target_fingerprint = target_fingerprint;
    return report;
}

template EvalReport evaluate<float>(const FullModel<float>&, const corpus::Vocabulary&,
                                    const std::vector<corpus::QaExample>&, const std::string&);
template EvalReport evaluate<double>(const FullModel<double>&, const corpus::Vocabulary&,
                                     const std::vector<corpus::QaExample>&, const std::string&);
template EvalReport transfer_eval<float>(const FullModel<float>&, const corpus::Vocabulary&,
                                         const std::vector<corpus::QaExample>&,
                                         const std::string&, const std::string&,
                                         const std::string&);
template EvalReport transfer_eval<double>(const FullModel<double>&, const corpus::Vocabulary&,
                                          const std::vector<corpus::QaExample>&,
                                          const std::string&, const std::string&,
                                          const std::string&);

}  // namespace elberto::evalcli
