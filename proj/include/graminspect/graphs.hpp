#ifndef GRAMINSPECT_GRAPHS_HPP
#define GRAMINSPECT_GRAPHS_HPP

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "graminspect/common.hpp"
#include "graminspect/corpus.hpp"

namespace graminspect {

// ---------------------------------------------------------------------------
// Word-level dependency parse, as produced by an external parser and ingested
// from file. head == 0 means root.

struct DepWord {
    std::u32string surface;
    int head = 0;                 // 1-based word index, 0 = root
    std::string relation;
};

struct DependencyParse {
    std::vector<DepWord> words;

    std::size_t char_count() const {
        std::size_t n = 0;
        for (const DepWord& w : words) n += w.surface.size();
        return n;
    }

    // 1-based character offset of each word's first character.
    std::vector<int> first_char_offsets() const {
        std::vector<int> off;
        int pos = 1;
        for (const DepWord& w : words) {
            off.push_back(pos);
            pos += static_cast<int>(w.surface.size());
        }
        return off;
    }

    std::u32string surface() const {
        std::u32string s;
        for (const DepWord& w : words) s += w.surface;
        return s;
    }

    void validate() const {
        if (words.empty()) throw ParseError("dependency parse with no words");
        int roots = 0;
        for (std::size_t i = 0; i < words.size(); ++i) {
            const DepWord& w = words[i];
            if (w.surface.empty())
                throw ParseError("dependency word " + std::to_string(i + 1) + " has empty surface");
            if (w.head < 0 || w.head > static_cast<int>(words.size()))
                throw ParseError("dependency head out of range for word " + std::to_string(i + 1));
            if (w.head == static_cast<int>(i + 1))
                throw ParseError("dependency word " + std::to_string(i + 1) + " heads itself");
            if (w.head == 0) ++roots;
        }
        if (roots != 1)
            throw ParseError("dependency parse must have exactly one root, found " +
                             std::to_string(roots));
    }
};

// ---------------------------------------------------------------------------
// Character-level graph used by the GAT layers. Symmetric, a self-loop on
// every node, no duplicate edges. Non-self edges carry provenance tags.

enum EdgeTag : unsigned {
    kEdgeChain = 1u << 0,
    kEdgeIntraWord = 1u << 1,
    kEdgeDependency = 1u << 2,
    kEdgeLexiconWord = 1u << 3,
};

inline std::string edge_tag_names(unsigned mask) {
    std::string s;
    const auto add = [&](const char* name) {
        if (!s.empty()) s += ",";
        s += name;
    };
    if (mask & kEdgeChain) add("chain");
    if (mask & kEdgeIntraWord) add("intra-word");
    if (mask & kEdgeDependency) add("dependency");
    if (mask & kEdgeLexiconWord) add("lexicon-word");
    return s;
}

class CharGraph {
  public:
    explicit CharGraph(std::size_t n) : n_(n), nbrs_(n) {
        if (n == 0) throw std::invalid_argument("CharGraph: empty graph");
        for (std::size_t i = 0; i < n; ++i) nbrs_[i].push_back(static_cast<int>(i));
    }

    std::size_t node_count() const { return n_; }

    // i, j are 0-based node indices. Undirected; self pairs are ignored
    // (the mandatory self-loop is built in).
    void add_edge(int i, int j, unsigned tag) {
        if (i < 0 || j < 0 || i >= static_cast<int>(n_) || j >= static_cast<int>(n_))
            throw std::invalid_argument("CharGraph::add_edge out of range");
        if (i == j) return;
        const auto key = std::make_pair(std::min(i, j), std::max(i, j));
        auto [it, fresh] = edges_.try_emplace(key, tag);
        if (!fresh) {
            it->second |= tag;
            return;
        }
        nbrs_[i].push_back(j);
        nbrs_[j].push_back(i);
    }

    void finalize() {
        for (auto& v : nbrs_) std::sort(v.begin(), v.end());
    }

    // Sorted, includes the node itself.
    const std::vector<int>& neighbors(int i) const { return nbrs_[i]; }

    bool has_edge(int i, int j) const {
        if (i == j) return true;
        return edges_.count({std::min(i, j), std::max(i, j)}) > 0;
    }

    unsigned edge_tags(int i, int j) const {
        auto it = edges_.find({std::min(i, j), std::max(i, j)});
        return it == edges_.end() ? 0u : it->second;
    }

    // Non-self edges as (i, j, tagmask) with i < j, sorted.
    const std::map<std::pair<int, int>, unsigned>& edges() const { return edges_; }

  private:
    std::size_t n_;
    std::vector<std::vector<int>> nbrs_;
    std::map<std::pair<int, int>, unsigned> edges_;
};

// Project a word-level tree onto characters: a chain edge between adjacent
// characters of the same word, plus one edge between the first character of
// each dependent word and the first character of its head word. The root
// contributes only its intra-word edges.
inline CharGraph dep_to_char_adjacency(const DependencyParse& parse) {
    parse.validate();
    CharGraph g(parse.char_count());
    const std::vector<int> first = parse.first_char_offsets();
    for (std::size_t w = 0; w < parse.words.size(); ++w) {
        const int base = first[w] - 1;
        const int len = static_cast<int>(parse.words[w].surface.size());
        for (int k = 0; k + 1 < len; ++k)
            g.add_edge(base + k, base + k + 1, kEdgeIntraWord);
        const int head = parse.words[w].head;
        if (head != 0)
            g.add_edge(base, first[head - 1] - 1, kEdgeDependency);
    }
    g.finalize();
    return g;
}

// The parse must reconstruct the sentence characters exactly.
inline void check_parse_covers(const DependencyParse& parse, const Sentence& sentence) {
    if (parse.surface() != sentence.chars)
        throw ParseError("dependency parse does not reconstruct sentence '" +
                         sentence.id + "'");
}

// ---------------------------------------------------------------------------
// Lexicon: word set stored as a prefix trie over Unicode scalar values.

class Lexicon {
  public:
    Lexicon() : nodes_(1) {}

    void insert(const std::u32string& word) {
        if (word.empty()) throw ParseError("empty word in lexicon");
        int cur = 0;
        for (char32_t c : word) {
            auto it = nodes_[cur].next.find(c);
            if (it == nodes_[cur].next.end()) {
                nodes_.push_back({});
                it = nodes_[cur].next.emplace(c, static_cast<int>(nodes_.size()) - 1).first;
            }
            cur = it->second;
        }
        if (!nodes_[cur].terminal) {
            nodes_[cur].terminal = true;
            ++size_;
        }
    }

    bool contains(const std::u32string& word) const {
        int cur = 0;
        for (char32_t c : word) {
            auto it = nodes_[cur].next.find(c);
            if (it == nodes_[cur].next.end()) return false;
            cur = it->second;
        }
        return nodes_[cur].terminal;
    }

    std::size_t size() const { return size_; }

    // All dictionary words starting at `start` (0-based) in `chars`,
    // reported as 0-based end indices (inclusive).
    std::vector<int> match_ends(const std::u32string& chars, std::size_t start) const {
        std::vector<int> ends;
        int cur = 0;
        for (std::size_t i = start; i < chars.size(); ++i) {
            auto it = nodes_[cur].next.find(chars[i]);
            if (it == nodes_[cur].next.end()) break;
            cur = it->second;
            if (nodes_[cur].terminal) ends.push_back(static_cast<int>(i));
        }
        return ends;
    }

  private:
    struct Node {
        std::map<char32_t, int> next;
        bool terminal = false;
    };
    std::vector<Node> nodes_;
    std::size_t size_ = 0;
};

inline Lexicon read_lexicon(std::istream& is) {
    Lexicon lex;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        lex.insert(utf8_decode(line));
    }
    return lex;
}

inline Lexicon read_lexicon(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open lexicon file: " + path);
    return read_lexicon(is);
}

// One (start, end, word) per dictionary word occurring in the sentence,
// 1-based inclusive, sorted by (start, end). Nested matches are all kept.
struct LexMatch {
    int start = 0;
    int end = 0;
    std::u32string word;

    friend bool operator==(const LexMatch&, const LexMatch&) = default;
};

inline std::vector<LexMatch> lexicon_match(const std::u32string& chars,
                                           const Lexicon& lexicon) {
    std::vector<LexMatch> out;
    for (std::size_t s = 0; s < chars.size(); ++s) {
        for (int e : lexicon.match_ends(chars, s)) {
            out.push_back({static_cast<int>(s) + 1, e + 1,
                           chars.substr(s, e - static_cast<int>(s) + 1)});
        }
    }
    return out;
}

// Chain backbone over consecutive characters plus one edge per lexicon match
// between its first and last character.
inline CharGraph build_lexicon_graph(const std::u32string& chars, const Lexicon& lexicon) {
    CharGraph g(chars.size());
    for (std::size_t i = 0; i + 1 < chars.size(); ++i)
        g.add_edge(static_cast<int>(i), static_cast<int>(i) + 1, kEdgeChain);
    for (const LexMatch& m : lexicon_match(chars, lexicon))
        g.add_edge(m.start - 1, m.end - 1, kEdgeLexiconWord);
    g.finalize();
    return g;
}

// ---------------------------------------------------------------------------
// Dependency file codec: one token per line `index<TAB>word<TAB>head<TAB>rel`,
// blank line between sentences, order-aligned with the corpus.

inline std::vector<DependencyParse> read_dependency_file(std::istream& is,
                                                         const std::string& origin) {
    std::vector<DependencyParse> out;
    DependencyParse cur;
    std::string line;
    std::size_t lineno = 0;
    const auto flush = [&]() {
        if (cur.words.empty()) return;
        cur.validate();
        out.push_back(std::move(cur));
        cur = DependencyParse{};
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
            continue;
        }
        const std::string where = origin + ":" + std::to_string(lineno);
        const std::vector<std::string> f = split(line, '\t');
        if (f.size() != 4)
            throw ParseError(where + ": expected 'index<TAB>word<TAB>head<TAB>relation'");
        int index = 0, head = 0;
        try {
            index = std::stoi(f[0]);
            head = std::stoi(f[2]);
        } catch (const std::exception&) {
            throw ParseError(where + ": non-numeric index");
        }
        if (index != static_cast<int>(cur.words.size()) + 1)
            throw ParseError(where + ": token index " + std::to_string(index) +
                             " out of order");
        cur.words.push_back({utf8_decode(f[1]), head, f[3]});
    }
    flush();
    return out;
}

inline std::vector<DependencyParse> read_dependency_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open dependency file: " + path);
    return read_dependency_file(is, path);
}

inline void write_dependency_file(const std::vector<DependencyParse>& parses,
                                  std::ostream& os) {
    for (const DependencyParse& p : parses) {
        for (std::size_t i = 0; i < p.words.size(); ++i) {
            os << (i + 1) << "\t" << utf8_encode(p.words[i].surface) << "\t"
               << p.words[i].head << "\t" << p.words[i].relation << "\n";
        }
        os << "\n";
    }
}

inline void write_dependency_file(const std::vector<DependencyParse>& parses,
                                  const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot write dependency file: " + path);
    write_dependency_file(parses, os);
}

}  // namespace graminspect

#endif  // GRAMINSPECT_GRAPHS_HPP
