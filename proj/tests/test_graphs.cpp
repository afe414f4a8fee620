#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "graminspect/graphs.hpp"
#include "graminspect/numerics.hpp"

using namespace graminspect;

namespace {

DependencyParse two_word_parse() {
    // 北京 (head = 离开) followed by 离开 (root).
    DependencyParse p;
    p.words.push_back({U"北京", 2, "dep"});
    p.words.push_back({U"离开", 0, "root"});
    return p;
}

Lexicon figure_lexicon() {
    Lexicon lex;
    for (const char32_t* w : {U"希尔", U"希尔顿", U"离开", U"北京", U"北京机场"})
        lex.insert(w);
    return lex;
}

}  // namespace

TEST_CASE("dep_to_char_adjacency") {
    SECTION("degenerate one-character root") {
        DependencyParse p;
        p.words.push_back({U"我", 0, "root"});
        const CharGraph g = dep_to_char_adjacency(p);
        CHECK(g.node_count() == 1);
        CHECK(g.edges().empty());
        CHECK(g.neighbors(0) == std::vector<int>{0});
    }
    SECTION("hand-constructed two-word example") {
        const CharGraph g = dep_to_char_adjacency(two_word_parse());
        REQUIRE(g.node_count() == 4);
        CHECK(g.has_edge(0, 1));
        CHECK(g.has_edge(2, 3));
        CHECK(g.has_edge(0, 2));
        CHECK(g.edge_tags(0, 1) == kEdgeIntraWord);
        CHECK(g.edge_tags(2, 3) == kEdgeIntraWord);
        CHECK(g.edge_tags(0, 2) == kEdgeDependency);
        CHECK(g.edges().size() == 3);
        // The root word contributes no dependency edge of its own.
        CHECK_FALSE(g.has_edge(1, 2));
    }
    SECTION("symmetry and self-loops on random parses") {
        Rng rng(31);
        for (int trial = 0; trial < 30; ++trial) {
            const int nwords = 1 + static_cast<int>(rng.below(8));
            DependencyParse p;
            const int root = static_cast<int>(rng.below(nwords));
            for (int w = 0; w < nwords; ++w) {
                std::u32string surface;
                const int len = 1 + static_cast<int>(rng.below(3));
                for (int c = 0; c < len; ++c)
                    surface.push_back(static_cast<char32_t>(U'a' + rng.below(26)));
                int head = 0;
                if (w != root) {
                    // Attach to any earlier-numbered word or the root; keep it a tree
                    // by always pointing at a distinct index.
                    do {
                        head = 1 + static_cast<int>(rng.below(nwords));
                    } while (head == w + 1);
                }
                p.words.push_back({surface, head, w == root ? "root" : "dep"});
            }
            const CharGraph g = dep_to_char_adjacency(p);
            CHECK(g.node_count() == p.char_count());
            for (std::size_t i = 0; i < g.node_count(); ++i) {
                const auto& nb = g.neighbors(static_cast<int>(i));
                CHECK(std::find(nb.begin(), nb.end(), static_cast<int>(i)) != nb.end());
                for (int j : nb) {
                    const auto& back = g.neighbors(j);
                    CHECK(std::find(back.begin(), back.end(), static_cast<int>(i)) !=
                          back.end());
                }
            }
        }
    }
    SECTION("parse validation") {
        DependencyParse two_roots;
        two_roots.words.push_back({U"a", 0, "root"});
        two_roots.words.push_back({U"b", 0, "root"});
        CHECK_THROWS_AS(dep_to_char_adjacency(two_roots), ParseError);

        DependencyParse bad_head;
        bad_head.words.push_back({U"a", 5, "dep"});
        CHECK_THROWS_AS(dep_to_char_adjacency(bad_head), ParseError);

        Sentence s;
        s.id = "s1";
        s.chars = U"北京离开";
        CHECK_THROWS_AS(check_parse_covers(two_word_parse(), s), ParseError);
        s.chars = U"北京离开了";
        CHECK_THROWS_AS(check_parse_covers(two_word_parse(), s), ParseError);
    }
}

TEST_CASE("lexicon_match finds every dictionary word occurrence") {
    SECTION("figure example") {
        const std::u32string sentence = U"希尔顿离开北京机场了";
        const std::vector<LexMatch> matches = lexicon_match(sentence, figure_lexicon());
        const std::vector<LexMatch> expected = {
            {1, 2, U"希尔"}, {1, 3, U"希尔顿"}, {4, 5, U"离开"},
            {6, 7, U"北京"}, {6, 9, U"北京机场"},
        };
        CHECK(matches == expected);
    }
    SECTION("empty lexicon") {
        CHECK(lexicon_match(U"希尔顿", Lexicon{}).empty());
    }
    SECTION("trie scan equals brute force on random instances") {
        Rng rng(47);
        for (int trial = 0; trial < 40; ++trial) {
            const int n = 1 + static_cast<int>(rng.below(16));
            std::u32string sentence;
            for (int i = 0; i < n; ++i)
                sentence.push_back(static_cast<char32_t>(U'a' + rng.below(4)));
            Lexicon lex;
            std::set<std::u32string> words;
            const int nwords = static_cast<int>(rng.below(10));
            for (int w = 0; w < nwords; ++w) {
                std::u32string word;
                const int len = 1 + static_cast<int>(rng.below(4));
                for (int c = 0; c < len; ++c)
                    word.push_back(static_cast<char32_t>(U'a' + rng.below(4)));
                words.insert(word);
                lex.insert(word);
            }
            // Brute force: test every substring against the word set.
            std::vector<LexMatch> expected;
            for (int s = 0; s < n; ++s)
                for (int e = s; e < n; ++e) {
                    const std::u32string sub = sentence.substr(s, e - s + 1);
                    if (words.count(sub)) expected.push_back({s + 1, e + 1, sub});
                }
            CHECK(lexicon_match(sentence, lex) == expected);
        }
    }
}

TEST_CASE("build_lexicon_graph") {
    SECTION("figure example: chain plus word-span edges") {
        const std::u32string sentence = U"希尔顿离开北京机场了";
        const CharGraph g = build_lexicon_graph(sentence, figure_lexicon());
        REQUIRE(g.node_count() == 10);
        for (int i = 0; i + 1 < 10; ++i) {
            CHECK(g.has_edge(i, i + 1));
            CHECK((g.edge_tags(i, i + 1) & kEdgeChain) != 0);
        }
        // Word edges, 0-based: (0,1) 希尔, (0,2) 希尔顿, (3,4) 离开, (5,6) 北京,
        // (5,8) 北京机场. The single-step ones coincide with chain edges.
        CHECK((g.edge_tags(0, 1) & kEdgeLexiconWord) != 0);
        CHECK((g.edge_tags(0, 2) & kEdgeLexiconWord) != 0);
        CHECK((g.edge_tags(3, 4) & kEdgeLexiconWord) != 0);
        CHECK((g.edge_tags(5, 6) & kEdgeLexiconWord) != 0);
        CHECK((g.edge_tags(5, 8) & kEdgeLexiconWord) != 0);
        CHECK(g.edges().size() == 9 + 2);   // chain + the two multi-step word edges
    }
    SECTION("no matches leaves a pure chain") {
        const CharGraph g = build_lexicon_graph(U"abc", Lexicon{});
        CHECK(g.edges().size() == 2);
        CHECK(g.edge_tags(0, 1) == kEdgeChain);
    }
    SECTION("single character sentence") {
        const CharGraph g = build_lexicon_graph(U"啊", Lexicon{});
        CHECK(g.node_count() == 1);
        CHECK(g.edges().empty());
    }
}

TEST_CASE("dependency file codec") {
    const std::string file =
        "1\t北京\t2\tdep\n"
        "2\t离开\t0\troot\n"
        "\n"
        "1\t我\t0\troot\n"
        "\n";
    std::istringstream in(file);
    const std::vector<DependencyParse> parses = read_dependency_file(in, "mem");
    REQUIRE(parses.size() == 2);
    CHECK(parses[0].words.size() == 2);
    CHECK(parses[0].words[0].surface == U"北京");
    CHECK(parses[0].words[0].head == 2);
    CHECK(parses[1].words[0].head == 0);

    std::ostringstream out;
    write_dependency_file(parses, out);
    CHECK(out.str() == file);

    std::istringstream bad("1\t北京\t2\n");
    CHECK_THROWS_WITH(read_dependency_file(bad, "mem"),
                      Catch::Matchers::ContainsSubstring("mem:1"));

    std::istringstream out_of_order("2\t北京\t0\troot\n");
    CHECK_THROWS_AS(read_dependency_file(out_of_order, "mem"), ParseError);
}

TEST_CASE("lexicon insert/contains") {
    Lexicon lex;
    lex.insert(U"北京");
    lex.insert(U"北京机场");
    CHECK(lex.contains(U"北京"));
    CHECK(lex.contains(U"北京机场"));
    CHECK_FALSE(lex.contains(U"北京机"));   // prefix but not a word
    CHECK_FALSE(lex.contains(U"机场"));
    CHECK(lex.size() == 2);
    CHECK_THROWS_AS(lex.insert(U""), ParseError);
}
