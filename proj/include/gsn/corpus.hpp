#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gsn/errors.hpp"
#include "gsn/tensor.hpp"  // next_uniform

namespace gsn {

// ---------------------------------------------------------------------------
// Domain types

struct Utterance {
  int index = 0;  // 1-based position within the session
  std::string speaker;
  std::vector<std::string> words;
  std::vector<int> tokens;     // vocabulary ids, filled by encode_session
  std::optional<int> parent;   // 1-based index this utterance replies to

  bool operator==(const Utterance&) const = default;
};

struct Session {
  std::vector<Utterance> utterances;
  int target = 0;         // index of the response to generate (always the last)
  int target_parent = 0;  // 0 when the target's parent is unresolved
  int warnings = 0;       // @-mentions that named a speaker never seen before

  int size() const { return static_cast<int>(utterances.size()); }
  const Utterance& at(int index1) const { return utterances[static_cast<std::size_t>(index1 - 1)]; }
  Utterance& at(int index1) { return utterances[static_cast<std::size_t>(index1 - 1)]; }

  bool operator==(const Session& o) const {
    return utterances == o.utterances && target == o.target && target_parent == o.target_parent;
  }
};

/// Square 0/1 matrix. Row/column k corresponds to utterance index k+1.
class BitMatrix {
 public:
  BitMatrix() = default;
  explicit BitMatrix(int m) : m_(m), bits_(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0) {
    if (m < 0) throw ShapeError("bit matrix: negative size");
  }

  int size() const { return m_; }
  bool get(int i, int j) const { return bits_[idx(i, j)] != 0; }
  void set(int i, int j, bool v = true) { bits_[idx(i, j)] = v ? 1 : 0; }

  BitMatrix transposed() const {
    BitMatrix t(m_);
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < m_; ++j)
        if (get(i, j)) t.set(j, i);
    return t;
  }

  /// Leading k x k submatrix (drops later utterances, e.g. the target).
  BitMatrix leading(int k) const {
    if (k < 0 || k > m_) throw ShapeError("bit matrix: bad submatrix size");
    BitMatrix s(k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        if (get(i, j)) s.set(i, j);
    return s;
  }

  int count() const {
    int n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  bool operator==(const BitMatrix& o) const { return m_ == o.m_ && bits_ == o.bits_; }

 private:
  std::size_t idx(int i, int j) const {
    if (i < 0 || j < 0 || i >= m_ || j >= m_) throw ShapeError("bit matrix: index out of range");
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(j);
  }

  int m_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct DialogueGraph {
  int m = 0;
  BitMatrix reply;    // reply(i,j): utterance j+1 replies to utterance i+1
  BitMatrix speaker;  // speaker(i,j): same speaker, i < j
};

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  Vocabulary() {
    for (const char* t : {"<pad>", "<sos>", "<eos>", "<unk>"}) add_token(t);
  }

  int add_token(const std::string& tok) {
    auto it = map_.find(tok);
    if (it != map_.end()) return it->second;
    const int id = static_cast<int>(list_.size());
    map_[tok] = id;
    list_.push_back(tok);
    return id;
  }

  int id(const std::string& tok) const {
    auto it = map_.find(tok);
    return it == map_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& tok) const { return map_.count(tok) != 0; }

  const std::string& token(int id) const {
    if (id < 0 || id >= size()) throw VocabError("token id out of range: " + std::to_string(id));
    return list_[static_cast<std::size_t>(id)];
  }

  int size() const { return static_cast<int>(list_.size()); }

  void save(std::ostream& out) const {
    for (const auto& t : list_) out << t << '\n';
  }

  static Vocabulary load(std::istream& in) {
    Vocabulary v;
    std::string line;
    int id = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (id < kReserved) {
        if (line != v.list_[static_cast<std::size_t>(id)])
          throw VocabError("reserved token slot " + std::to_string(id) + " holds '" + line + "'");
      } else {
        if (v.contains(line)) throw VocabError("duplicate vocabulary token: " + line);
        v.add_token(line);
      }
      ++id;
    }
    if (id < kReserved) throw VocabError("vocabulary file shorter than the reserved block");
    return v;
  }

 private:
  std::unordered_map<std::string, int> map_;
  std::vector<std::string> list_;
};

// ---------------------------------------------------------------------------
// Tokenization and raw-log parsing

inline std::string lowercased(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Lowercase whitespace tokenization.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(lowercased(tok));
  return out;
}

namespace detail {
inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}
}  // namespace detail

/// Parse one raw session given as `speaker<TAB>text` lines. A leading `@name`
/// token addresses the most recent earlier utterance by that speaker and is
/// stripped from the text; otherwise the utterance replies to the most recent
/// earlier utterance by a different speaker. An `@` naming a speaker never
/// seen before counts as a warning and falls back to the default rule.
inline Session parse_raw_session(const std::vector<std::string>& lines) {
  if (lines.empty()) throw MalformedSession("raw session: no lines");
  Session s;
  for (const std::string& line : lines) {
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 2) throw MalformedSession("raw line needs speaker<TAB>text: " + line);
    Utterance u;
    u.index = s.size() + 1;
    u.speaker = lowercased(fields[0]);
    if (u.speaker.empty()) throw MalformedSession("raw line with empty speaker: " + line);
    u.words = tokenize(fields[1]);

    std::string addressee;
    if (!u.words.empty() && u.words.front().size() > 1 && u.words.front()[0] == '@') {
      addressee = u.words.front().substr(1);
      u.words.erase(u.words.begin());
    }
    if (u.words.empty()) throw MalformedSession("raw line with no content tokens: " + line);

    if (!addressee.empty()) {
      for (int k = u.index - 1; k >= 1; --k) {
        if (s.at(k).speaker == addressee) {
          u.parent = k;
          break;
        }
      }
      if (!u.parent) ++s.warnings;
    }
    if (!u.parent) {
      for (int k = u.index - 1; k >= 1; --k) {
        if (s.at(k).speaker != u.speaker) {
          u.parent = k;
          break;
        }
      }
    }
    s.utterances.push_back(std::move(u));
  }
  s.target = s.size();
  s.target_parent = s.utterances.back().parent.value_or(0);
  return s;
}

/// Raw log file: sessions are blank-line-separated blocks of raw lines.
inline std::vector<Session> parse_raw_log(std::istream& in) {
  std::vector<Session> sessions;
  std::vector<std::string> block;
  std::string line;
  auto flush = [&] {
    if (!block.empty()) {
      sessions.push_back(parse_raw_session(block));
      block.clear();
    }
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty())
      flush();
    else
      block.push_back(line);
  }
  flush();
  return sessions;
}

// ---------------------------------------------------------------------------
// Graph construction and session-level operations

inline DialogueGraph build_graph(const Session& s) {
  DialogueGraph g;
  g.m = s.size();
  g.reply = BitMatrix(g.m);
  g.speaker = BitMatrix(g.m);
  for (const Utterance& u : s.utterances) {
    if (u.parent) {
      if (*u.parent < 1 || *u.parent >= u.index)
        throw MalformedSession("reply edge must point at an earlier utterance");
      g.reply.set(*u.parent - 1, u.index - 1);
    }
    for (int k = 1; k < u.index; ++k)
      if (s.at(k).speaker == u.speaker) g.speaker.set(k - 1, u.index - 1);
  }
  return g;
}

struct FilterRule {
  int min_utterances = 3;
  int max_utterances = 10;
  int min_speakers = 2;
  int max_speakers = 7;
};

/// Accept a session for training/evaluation.
inline bool filter_session(const Session& s, const FilterRule& rule = {}) {
  const int m = s.size();
  if (m < rule.min_utterances || m > rule.max_utterances) return false;
  std::unordered_set<std::string> speakers;
  for (const Utterance& u : s.utterances) speakers.insert(u.speaker);
  const int k = static_cast<int>(speakers.size());
  if (k < rule.min_speakers || k > rule.max_speakers) return false;
  return s.utterances.back().parent.has_value();
}

/// All maximal root-to-leaf reply chains, as 1-based utterance index lists.
/// Vertices with no reply edges at all form single-vertex paths.
inline std::vector<std::vector<int>> extract_forward_paths(const DialogueGraph& g) {
  std::vector<std::vector<int>> paths;
  std::vector<bool> has_parent(static_cast<std::size_t>(g.m), false);
  for (int j = 0; j < g.m; ++j)
    for (int i = 0; i < g.m; ++i)
      if (g.reply.get(i, j)) has_parent[static_cast<std::size_t>(j)] = true;

  std::vector<int> trail;
  auto dfs = [&](auto&& self, int v) -> void {
    trail.push_back(v + 1);
    bool leaf = true;
    for (int j = 0; j < g.m; ++j) {
      if (g.reply.get(v, j)) {
        leaf = false;
        self(self, j);
      }
    }
    if (leaf) paths.push_back(trail);
    trail.pop_back();
  };
  for (int v = 0; v < g.m; ++v)
    if (!has_parent[static_cast<std::size_t>(v)]) dfs(dfs, v);
  return paths;
}

// ---------------------------------------------------------------------------
// Vocabulary construction and id encoding

inline Vocabulary build_vocab(const std::vector<Session>& sessions, int cap) {
  if (cap < Vocabulary::kReserved + 1) throw ConfigError("vocab cap must be at least 5");
  std::unordered_map<std::string, std::int64_t> freq;
  for (const Session& s : sessions)
    for (const Utterance& u : s.utterances)
      for (const std::string& w : u.words) ++freq[w];

  std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  const int keep = cap - Vocabulary::kReserved;
  for (int i = 0; i < keep && i < static_cast<int>(ranked.size()); ++i)
    v.add_token(ranked[static_cast<std::size_t>(i)].first);
  return v;
}

/// Clip every utterance to max_len words and fill token ids (<unk> fallback).
inline void encode_session(Session& s, const Vocabulary& v, int max_len) {
  if (max_len < 1) throw ConfigError("max_len must be positive");
  for (Utterance& u : s.utterances) {
    if (u.words.empty()) throw MalformedSession("utterance with no words");
    if (static_cast<int>(u.words.size()) > max_len) u.words.resize(static_cast<std::size_t>(max_len));
    u.tokens.clear();
    u.tokens.reserve(u.words.size());
    for (const std::string& w : u.words) u.tokens.push_back(v.id(w));
  }
}

// ---------------------------------------------------------------------------
// Canonical session format
//
// Blocks separated by blank lines; one utterance per line:
//   <speaker>\t<parent index or ->\t<space-separated tokens>
// The last line of a block is the target response.

inline std::string serialize_session(const Session& s) {
  std::ostringstream out;
  for (const Utterance& u : s.utterances) {
    out << u.speaker << '\t';
    if (u.parent)
      out << *u.parent;
    else
      out << '-';
    out << '\t';
    for (std::size_t i = 0; i < u.words.size(); ++i) {
      if (i) out << ' ';
      out << u.words[i];
    }
    out << '\n';
  }
  return out.str();
}

inline Session parse_session_block(const std::vector<std::string>& lines) {
  if (lines.empty()) throw MalformedSession("empty session block");
  Session s;
  for (const std::string& line : lines) {
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3) throw MalformedSession("expected 3 tab-separated fields: " + line);
    Utterance u;
    u.index = s.size() + 1;
    u.speaker = fields[0];
    if (u.speaker.empty()) throw MalformedSession("empty speaker field: " + line);
    if (fields[1] != "-") {
      int p = 0;
      try {
        std::size_t used = 0;
        p = std::stoi(fields[1], &used);
        if (used != fields[1].size()) throw std::invalid_argument("trailing junk");
      } catch (const std::exception&) {
        throw MalformedSession("bad parent field '" + fields[1] + "'");
      }
      if (p < 1 || p >= u.index)
        throw MalformedSession("parent " + fields[1] + " out of range for utterance " +
                               std::to_string(u.index));
      u.parent = p;
    }
    std::istringstream toks(fields[2]);
    std::string w;
    while (toks >> w) u.words.push_back(w);
    if (u.words.empty()) throw MalformedSession("utterance with no tokens: " + line);
    s.utterances.push_back(std::move(u));
  }
  s.target = s.size();
  s.target_parent = s.utterances.back().parent.value_or(0);
  return s;
}

inline std::vector<Session> parse_sessions(std::istream& in) {
  std::vector<Session> sessions;
  std::vector<std::string> block;
  std::string line;
  auto flush = [&] {
    if (!block.empty()) {
      sessions.push_back(parse_session_block(block));
      block.clear();
    }
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty())
      flush();
    else
      block.push_back(line);
  }
  flush();
  return sessions;
}

inline void write_sessions(std::ostream& out, const std::vector<Session>& sessions) {
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    if (i) out << '\n';
    out << serialize_session(sessions[i]);
  }
}

// File helpers shared by the command-line tools.

inline std::vector<Session> read_session_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open session file: " + path);
  return parse_sessions(in);
}

inline void write_session_file(const std::string& path, const std::vector<Session>& sessions) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write session file: " + path);
  write_sessions(out, sessions);
}

inline Vocabulary read_vocab_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open vocabulary file: " + path);
  return Vocabulary::load(in);
}

inline void write_vocab_file(const std::string& path, const Vocabulary& v) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write vocabulary file: " + path);
  v.save(out);
}

/// Deterministic shuffled three-way split; returns per-session labels 0/1/2
/// (train/dev/test). Ratios are fractions of the whole; test takes the rest.
inline std::vector<int> three_way_split(int n, double train_ratio, double dev_ratio,
                                        std::mt19937_64& rng) {
  if (train_ratio < 0 || dev_ratio < 0 || train_ratio + dev_ratio > 1.0)
    throw ConfigError("split ratios must be nonnegative and sum to at most 1");
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  // Fisher-Yates with the hand-rolled uniform, for cross-platform stability.
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(next_uniform(rng) * (i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  const int n_train = static_cast<int>(train_ratio * n);
  const int n_dev = static_cast<int>(dev_ratio * n);
  std::vector<int> label(static_cast<std::size_t>(n), 2);
  for (int i = 0; i < n; ++i) {
    const int rank = static_cast<int>(std::find(order.begin(), order.end(), i) - order.begin());
    if (rank < n_train)
      label[static_cast<std::size_t>(i)] = 0;
    else if (rank < n_train + n_dev)
      label[static_cast<std::size_t>(i)] = 1;
  }
  return label;
}

}  // namespace gsn
