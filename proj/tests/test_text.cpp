#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cctype>
#include <string>
#include <vector>

#include "doctest.h"
#include "elberto/rng.hpp"
#include "elberto/text.hpp"

using namespace elberto;

TEST_CASE("tokenizer rule table") {
    CHECK(text::tokenize("The seeds reach the ground.") ==
          std::vector<std::string>{"the", "seeds", "reach", "the", "ground", "."});
    CHECK(text::tokenize("") == std::vector<std::string>{});
    CHECK(text::tokenize("more/less") == std::vector<std::string>{"more", "/", "less"});
    CHECK(text::tokenize("don't") == std::vector<std::string>{"don", "'", "t"});
    CHECK(text::tokenize("  A   B\t\nC ") == std::vector<std::string>{"a", "b", "c"});
    CHECK(text::tokenize("x2, y-3!") ==
          std::vector<std::string>{"x2", ",", "y", "-", "3", "!"});
}

TEST_CASE("tokenizer is deterministic and offsets cover their tokens") {
    const std::string s = "Alan visited Lake Erie, twice.";
    const auto a = text::tokenize(s);
    const auto b = text::tokenize(s);
    CHECK(a == b);
    for (const auto& t : text::tokenize_with_offsets(s)) {
        CHECK(t.start < t.end);
        CHECK(t.end <= static_cast<int>(s.size()));
        // offsets point at the original bytes of the token (case aside)
        std::string raw = s.substr(static_cast<size_t>(t.start),
                                   static_cast<size_t>(t.end - t.start));
        for (auto& c : raw) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        CHECK(raw == t.token);
    }
}

TEST_CASE("non-ascii bytes stay inside word tokens") {
    const auto toks = text::tokenize("caf\xc3\xa9 time");
    REQUIRE(toks.size() == 2);
    CHECK(toks[0] == "caf\xc3\xa9");
}

TEST_CASE("split_sentences basic rules") {
    CHECK(text::split_sentences("A tree produces seeds. The seeds reach the ground.").size() == 2);
    CHECK(text::split_sentences("No punctuation here").size() == 1);
    CHECK(text::split_sentences("One! Two? Three.").size() == 3);

    const auto abbrev = text::split_sentences("Dr. Smith trains e.g. owls. They fly.");
    REQUIRE(abbrev.size() == 2);
    CHECK(abbrev[0] == "Dr. Smith trains e.g. owls.");
}

TEST_CASE("split_sentences is a partition of the normalized text") {
    const std::vector<std::string> inputs = {
        "A tree produces seeds.  The   seeds reach the ground. More trees!",
        "Is it so? Yes. Truly!   ",
        "Ellipsis wins... sometimes. Then what?",
        "Mr. Fox ran. He hid.",
        "trailing space after final period. ",
    };
    for (const auto& in : inputs) {
        const auto sentences = text::split_sentences(in);
        std::string joined;
        for (size_t i = 0; i < sentences.size(); ++i) {
            CHECK(!sentences[i].empty());
            if (i) joined += " ";
            joined += sentences[i];
        }
        CHECK(joined == text::normalize_whitespace(in));
    }
}

TEST_CASE("split_sentences partition property on random punctuation soup") {
    Rng rng(99);
    const std::string alphabet = "ab .!?x,Dr";
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        const int len = 1 + rng.next_int(60);
        for (int i = 0; i < len; ++i) {
            s.push_back(alphabet[static_cast<size_t>(rng.next_int(
                static_cast<int>(alphabet.size())))]);
        }
        const auto sentences = text::split_sentences(s);
        std::string joined;
        for (size_t i = 0; i < sentences.size(); ++i) {
            if (i) joined += " ";
            joined += sentences[i];
        }
        CHECK(joined == text::normalize_whitespace(s));
        for (const auto& sent : sentences) CHECK(!sent.empty());
    }
}
