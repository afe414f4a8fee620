#ifndef GRAMINSPECT_SYNTH_HPP
#define GRAMINSPECT_SYNTH_HPP

#include <string>
#include <vector>

#include "graminspect/corpus.hpp"
#include "graminspect/graphs.hpp"
#include "graminspect/numerics.hpp"
#include "graminspect/tagger.hpp"

namespace graminspect {

// Desk-scale synthetic corpus: template sentences over a small vocabulary
// with rule-injected R/M/S/W errors. The grammar is
//   [TIME] SUBJ [ADV] VERB OBJ [PART]
// with verb-specific object sets, so every error type leaves a local surface
// signature a character tagger can learn:
//   R duplicates a character, M deletes one (span on the following position),
//   S swaps the object against an incompatible verb, W swaps adjacent words.

struct SynthConfig {
    int train_count = 500;
    int test_count = 100;
    double error_rate = 0.65;
    std::uint64_t seed = 42;
    int frozen_width = 16;
};

struct SynthCorpus {
    std::vector<Sentence> train;
    std::vector<Sentence> test;
    std::vector<DependencyParse> train_parses;
    std::vector<DependencyParse> test_parses;
    std::vector<std::u32string> lexicon_words;
    FrozenEmbeddingTable train_frozen;
    FrozenEmbeddingTable test_frozen;
};

namespace synth_detail {

struct VerbEntry {
    const char* verb;
    const char* objects[2];
};

inline const std::vector<std::u32string>& time_words() {
    static const std::vector<std::u32string> v = {U"今天", U"昨天", U"明天"};
    return v;
}
inline const std::vector<std::u32string>& subj_words() {
    static const std::vector<std::u32string> v = {U"我", U"你", U"他",
                                                  U"老师", U"学生", U"朋友"};
    return v;
}
inline const std::vector<std::u32string>& adv_words() {
    static const std::vector<std::u32string> v = {U"很", U"都", U"也"};
    return v;
}
inline const std::vector<std::pair<std::u32string, std::vector<std::u32string>>>&
verb_objects() {
    static const std::vector<std::pair<std::u32string, std::vector<std::u32string>>> v = {
        {U"吃", {U"饭", U"菜"}}, {U"喝", {U"水", U"茶"}}, {U"看", {U"书", U"报"}},
        {U"写", {U"字", U"信"}}, {U"买", {U"票", U"花"}},
    };
    return v;
}
inline const std::u32string& particle() {
    static const std::u32string v = U"了";
    return v;
}

// A sentence under construction: a word list plus the injected error.
struct Draft {
    std::vector<std::u32string> words;
    std::vector<ErrorSpan> gold;
};

inline int char_offset_of_word(const std::vector<std::u32string>& words, std::size_t w) {
    int off = 1;
    for (std::size_t i = 0; i < w; ++i) off += static_cast<int>(words[i].size());
    return off;
}

inline int total_chars(const std::vector<std::u32string>& words) {
    int n = 0;
    for (const auto& w : words) n += static_cast<int>(w.size());
    return n;
}

inline void inject_error(Draft& d, ErrorType type, std::size_t subj_word,
                         std::size_t verb_word, std::size_t obj_word, Rng& rng) {
    std::vector<std::u32string>& words = d.words;
    switch (type) {
        case ErrorType::R: {
            const std::size_t w = rng.below(words.size());
            const std::size_t k = rng.below(words[w].size());
            const int pos = char_offset_of_word(words, w) + static_cast<int>(k);
            words[w].insert(words[w].begin() + k + 1, words[w][k]);
            d.gold.push_back({pos + 1, pos + 1, ErrorType::R});
            break;
        }
        case ErrorType::M: {
            // Delete from a mandatory slot: subject, verb or object.
            const std::size_t choices[3] = {subj_word, verb_word, obj_word};
            const std::size_t w = choices[rng.below(3)];
            const int word_off = char_offset_of_word(words, w);
            if (words[w].size() > 1) {
                const std::size_t k = rng.below(words[w].size());
                words[w].erase(words[w].begin() + k);
                const int pos = std::min(word_off + static_cast<int>(k), total_chars(words));
                d.gold.push_back({pos, pos, ErrorType::M});
            } else {
                words.erase(words.begin() + w);
                const int pos = std::min(word_off, total_chars(words));
                d.gold.push_back({pos, pos, ErrorType::M});
            }
            break;
        }
        case ErrorType::S: {
            // Replace the object with one belonging to a different verb.
            const auto& vo = verb_objects();
            std::vector<std::u32string> wrong;
            for (const auto& [verb, objs] : vo) {
                if (verb == words[verb_word]) continue;
                for (const auto& o : objs) wrong.push_back(o);
            }
            words[obj_word] = wrong[rng.below(wrong.size())];
            const int pos = char_offset_of_word(words, obj_word);
            d.gold.push_back({pos, pos + static_cast<int>(words[obj_word].size()) - 1,
                              ErrorType::S});
            break;
        }
        case ErrorType::W: {
            // Swap a pair of adjacent words: verb/object, or the sentence
            // opener pair when present.
            std::vector<std::size_t> firsts = {verb_word};
            if (verb_word >= 2) firsts.push_back(0);   // TIME+SUBJ or SUBJ+ADV pair
            const std::size_t w = firsts[rng.below(firsts.size())];
            std::swap(words[w], words[w + 1]);
            const int start = char_offset_of_word(words, w);
            const int end = char_offset_of_word(words, w + 2) - 1;
            d.gold.push_back({start, end, ErrorType::W});
            break;
        }
    }
}

inline Draft make_draft(Rng& rng, double error_rate) {
    Draft d;
    const bool with_time = rng.uniform() < 0.5;
    const bool with_adv = rng.uniform() < 0.5;
    const bool with_part = rng.uniform() < 0.5;
    if (with_time) d.words.push_back(time_words()[rng.below(time_words().size())]);
    const std::size_t subj_word = d.words.size();
    d.words.push_back(subj_words()[rng.below(subj_words().size())]);
    if (with_adv) d.words.push_back(adv_words()[rng.below(adv_words().size())]);
    const auto& vo = verb_objects();
    const auto& [verb, objects] = vo[rng.below(vo.size())];
    const std::size_t verb_word = d.words.size();
    d.words.push_back(verb);
    const std::size_t obj_word = d.words.size();
    d.words.push_back(objects[rng.below(objects.size())]);
    if (with_part) d.words.push_back(particle());

    if (rng.uniform() < error_rate) {
        const ErrorType type = static_cast<ErrorType>(rng.below(kErrorTypeCount));
        inject_error(d, type, subj_word, verb_word, obj_word, rng);
    }
    return d;
}

// Chain tree: first word is the root, every later word attaches to its left
// neighbour. Valid for any word sequence the mutations produce.
inline DependencyParse chain_parse(const std::vector<std::u32string>& words) {
    DependencyParse p;
    for (std::size_t i = 0; i < words.size(); ++i)
        p.words.push_back({words[i], static_cast<int>(i), i == 0 ? "root" : "dep"});
    return p;
}

// Frozen features keyed off the character identity: deterministic pseudo
// embeddings standing in for an external contextual encoder.
inline Tensor frozen_rows(const std::u32string& chars, int width) {
    Tensor t({chars.size(), static_cast<std::size_t>(width)});
    for (std::size_t i = 0; i < chars.size(); ++i) {
        Rng r(Rng::splitmix64(0x59EDULL ^ static_cast<std::uint64_t>(chars[i])));
        for (int j = 0; j < width; ++j) t(i, j) = r.normal();
    }
    return t;
}

}  // namespace synth_detail

inline SynthCorpus generate_synth_corpus(const SynthConfig& cfg) {
    SynthCorpus corpus;
    Rng rng(cfg.seed);
    const auto emit = [&](const std::string& prefix, int count,
                          std::vector<Sentence>& sentences,
                          std::vector<DependencyParse>& parses,
                          FrozenEmbeddingTable& frozen, Rng& stream) {
        for (int i = 0; i < count; ++i) {
            const synth_detail::Draft d = synth_detail::make_draft(stream, cfg.error_rate);
            Sentence s;
            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "%s-%04d", prefix.c_str(), i + 1);
            s.id = idbuf;
            for (const auto& w : d.words) s.chars += w;
            s.gold = d.gold;
            std::sort(s.gold.begin(), s.gold.end());
            parses.push_back(synth_detail::chain_parse(d.words));
            frozen.rows.emplace(s.id, synth_detail::frozen_rows(s.chars, cfg.frozen_width));
            sentences.push_back(std::move(s));
        }
        frozen.width = cfg.frozen_width;
    };
    Rng train_stream = rng.split(1);
    Rng test_stream = rng.split(2);
    emit("train", cfg.train_count, corpus.train, corpus.train_parses, corpus.train_frozen,
         train_stream);
    emit("test", cfg.test_count, corpus.test, corpus.test_parses, corpus.test_frozen,
         test_stream);

    for (const auto& w : synth_detail::time_words()) corpus.lexicon_words.push_back(w);
    for (const auto& w : synth_detail::subj_words()) corpus.lexicon_words.push_back(w);
    for (const auto& w : synth_detail::adv_words()) corpus.lexicon_words.push_back(w);
    for (const auto& [verb, objs] : synth_detail::verb_objects()) {
        corpus.lexicon_words.push_back(verb);
        for (const auto& o : objs) corpus.lexicon_words.push_back(o);
    }
    corpus.lexicon_words.push_back(synth_detail::particle());
    return corpus;
}

}  // namespace graminspect

#endif  // GRAMINSPECT_SYNTH_HPP
