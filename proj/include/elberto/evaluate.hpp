#pragma once

#include <map>
#include <string>
#include <vector>

#include "elberto/objectives.hpp"

namespace elberto::evalcli {

struct Prediction {
    std::string id;
    int predicted = 0;
    int gold = 0;
    corpus::QType qtype = corpus::QType::unlabeled;
};

struct QtypeStat {
    long long count = 0;
    long long correct = 0;

    double accuracy() const { return count > 0 ? static_cast<double>(correct) / count : 0.0; }
};

struct EvalReport {
    long long count = 0;
    long long correct = 0;
    std::map<std::string, QtypeStat> per_qtype;       // keyed by qtype name
    std::vector<Prediction> predictions;              // ordered by example id
    std::string config_fingerprint;
    std::string source_fingerprint;                   // transfer evaluation only
    std::string target_fingerprint;

    double overall_accuracy() const {
        return count > 0 ? static_cast<double>(correct) / count : 0.0;
    }
    std::string to_json() const;
    std::string to_csv() const;  // id,predicted,gold,qtype
};

// Argmax over option logits, ties broken by lowest option index; evaluation
// parallelizes over examples, report assembly is ordered by example id.
template <typename T>
EvalReport evaluate(const objectives::FullModel<T>& model, const corpus::Vocabulary& vocab,
                    const std::vector<corpus::QaExample>& dataset,
                    const std::string& config_fingerprint);

// Same prediction rule; tags source (training) and target corpus fingerprints.
template <typename T>
EvalReport transfer_eval(const objectives::FullModel<T>& model, const corpus::Vocabulary& vocab,
                         const std::vector<corpus::QaExample>& dataset,
                         const std::string& config_fingerprint,
                         const std::string& source_fingerprint,
                         const std::string& target_fingerprint);

}  // namespace elberto::evalcli
