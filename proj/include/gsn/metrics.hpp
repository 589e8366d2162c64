#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsn/errors.hpp"

namespace gsn {

/// One hypothesis/reference pair of surface tokens.
struct EvalPair {
  std::vector<std::string> hypothesis;
  std::vector<std::string> reference;
};

// ---------------------------------------------------------------------------
// BLEU

namespace detail {

using NgramCounts = std::map<std::vector<std::string>, int>;

inline NgramCounts count_ngrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  return counts;
}

}  // namespace detail

/// Corpus-level cumulative BLEU over orders 1..n_max with uniform weights,
/// clipped counts, the standard brevity penalty, and no smoothing: a zero
/// precision at any order zeroes the score. Reported on a 0..100 scale.
inline double bleu_n(const std::vector<EvalPair>& pairs, int n_max) {
  if (n_max < 1 || n_max > 4) throw ConfigError("BLEU order must lie in 1..4");
  if (pairs.empty()) throw ConfigError("BLEU needs at least one pair");
  for (const EvalPair& p : pairs)
    if (p.reference.empty()) throw ConfigError("BLEU reference must not be empty");

  long long hyp_len = 0, ref_len = 0;
  std::vector<long long> matched(static_cast<std::size_t>(n_max), 0);
  std::vector<long long> total(static_cast<std::size_t>(n_max), 0);
  for (const EvalPair& p : pairs) {
    hyp_len += static_cast<long long>(p.hypothesis.size());
    ref_len += static_cast<long long>(p.reference.size());
    for (int n = 1; n <= n_max; ++n) {
      const auto hyp = detail::count_ngrams(p.hypothesis, n);
      const auto ref = detail::count_ngrams(p.reference, n);
      for (const auto& [gram, count] : hyp) {
        total[static_cast<std::size_t>(n - 1)] += count;
        const auto it = ref.find(gram);
        if (it != ref.end())
          matched[static_cast<std::size_t>(n - 1)] += std::min(count, it->second);
      }
    }
  }

  double log_precision = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    const long long m = matched[static_cast<std::size_t>(n - 1)];
    const long long t = total[static_cast<std::size_t>(n - 1)];
    if (m == 0 || t == 0) return 0.0;
    log_precision += std::log(static_cast<double>(m) / static_cast<double>(t)) / n_max;
  }
  double bp = 1.0;
  if (hyp_len == 0) return 0.0;
  if (hyp_len < ref_len)
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_precision);
}

// ---------------------------------------------------------------------------
// ROUGE-L

namespace detail {

inline int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace detail

/// Mean per-pair LCS F-measure with beta = 1.2 weighting recall, on a 0..100
/// scale.
inline double rouge_l(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw ConfigError("ROUGE needs at least one pair");
  const double beta2 = 1.2 * 1.2;
  double total = 0.0;
  for (const EvalPair& p : pairs) {
    if (p.reference.empty()) throw ConfigError("ROUGE reference must not be empty");
    if (p.hypothesis.empty()) continue;  // scores zero
    const int lcs = detail::lcs_length(p.hypothesis, p.reference);
    if (lcs == 0) continue;
    const double prec = static_cast<double>(lcs) / static_cast<double>(p.hypothesis.size());
    const double rec = static_cast<double>(lcs) / static_cast<double>(p.reference.size());
    total += (1.0 + beta2) * rec * prec / (rec + beta2 * prec);
  }
  return 100.0 * total / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Embedding-based scores

/// Token vectors of a fixed width; tokens outside the table read as zero.
class WordVectorTable {
 public:
  WordVectorTable() = default;
  explicit WordVectorTable(int dim) : dim_(dim) {
    if (dim < 1) throw ConfigError("word vector width must be positive");
  }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(table_.size()); }

  void add(const std::string& token, std::vector<double> vec) {
    if (static_cast<int>(vec.size()) != dim_)
      throw ConfigError("word vector for '" + token + "' has width " + std::to_string(vec.size()));
    table_[token] = std::move(vec);
  }

  std::vector<double> lookup(const std::string& token) const {
    const auto it = table_.find(token);
    if (it == table_.end()) return std::vector<double>(static_cast<std::size_t>(dim_), 0.0);
    return it->second;
  }

  /// Text format: `token v1 v2 ... v_dw`, one token per line.
  static WordVectorTable load(std::istream& in) {
    WordVectorTable t;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string token;
      fields >> token;
      std::vector<double> vec;
      double v;
      while (fields >> v) vec.push_back(v);
      if (token.empty() || vec.empty()) throw ConfigError("bad word vector line: " + line);
      if (t.dim_ == 0) t.dim_ = static_cast<int>(vec.size());
      t.add(token, std::move(vec));
    }
    if (t.dim_ == 0) throw ConfigError("word vector file holds no vectors");
    return t;
  }

 private:
  int dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

inline WordVectorTable read_word_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open word vector file: " + path);
  return WordVectorTable::load(in);
}

struct EmbeddingScores {
  double average = 0.0;
  double greedy = 0.0;
  double extrema = 0.0;
};

namespace detail {

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::vector<double> mean_vector(const std::vector<std::vector<double>>& vs) {
  std::vector<double> out(vs.front().size(), 0.0);
  for (const auto& v : vs)
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
  for (double& x : out) x /= static_cast<double>(vs.size());
  return out;
}

/// Per-dimension extreme-magnitude composition.
inline std::vector<double> extrema_vector(const std::vector<std::vector<double>>& vs) {
  std::vector<double> out(vs.front().size(), 0.0);
  for (std::size_t d = 0; d < out.size(); ++d) {
    double best = 0.0;
    for (const auto& v : vs)
      if (std::abs(v[d]) > std::abs(best)) best = v[d];
    out[d] = best;
  }
  return out;
}

/// Directed greedy matching: every token of `from` finds its best cosine in
/// `to`; the sum is normalized by the size of `to`, which lets the score pass
/// 1 when `from` is the longer side.
inline double greedy_directed(const std::vector<std::vector<double>>& from,
                              const std::vector<std::vector<double>>& to) {
  double sum = 0.0;
  for (const auto& f : from) {
    double best = 0.0;
    for (const auto& t : to) best = std::max(best, cosine(f, t));
    sum += best;
  }
  return sum / static_cast<double>(to.size());
}

inline std::vector<std::vector<double>> lookup_all(const std::vector<std::string>& tokens,
                                                   const WordVectorTable& table) {
  std::vector<std::vector<double>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(table.lookup(t));
  return out;
}

inline bool all_zero(const std::vector<std::vector<double>>& vs) {
  for (const auto& v : vs)
    for (double x : v)
      if (x != 0.0) return false;
  return true;
}

}  // namespace detail

/// Mean over pairs of the three embedding metrics. A sentence with no
/// in-table tokens contributes zero to each score.
inline EmbeddingScores embedding_scores(const std::vector<EvalPair>& pairs,
                                        const WordVectorTable& table) {
  if (pairs.empty()) throw ConfigError("embedding metrics need at least one pair");
  EmbeddingScores acc;
  for (const EvalPair& p : pairs) {
    if (p.reference.empty()) throw ConfigError("embedding reference must not be empty");
    if (p.hypothesis.empty()) continue;
    const auto hyp = detail::lookup_all(p.hypothesis, table);
    const auto ref = detail::lookup_all(p.reference, table);
    if (detail::all_zero(hyp) || detail::all_zero(ref)) continue;
    acc.average += detail::cosine(detail::mean_vector(hyp), detail::mean_vector(ref));
    acc.greedy += 0.5 * (detail::greedy_directed(hyp, ref) + detail::greedy_directed(ref, hyp));
    acc.extrema += detail::cosine(detail::extrema_vector(hyp), detail::extrema_vector(ref));
  }
  const double n = static_cast<double>(pairs.size());
  return EmbeddingScores{acc.average / n, acc.greedy / n, acc.extrema / n};
}

/// The standard evaluation report: `metric<TAB>value`, four decimals.
inline std::string metrics_report(const std::vector<EvalPair>& pairs, const WordVectorTable* table) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  for (int n = 1; n <= 4; ++n) out << "bleu-" << n << '\t' << bleu_n(pairs, n) << '\n';
  out << "rouge-l\t" << rouge_l(pairs) << '\n';
  if (table) {
    const EmbeddingScores es = embedding_scores(pairs, *table);
    out << "embed-average\t" << es.average << '\n';
    out << "embed-greedy\t" << es.greedy << '\n';
    out << "embed-extrema\t" << es.extrema << '\n';
  }
  return out.str();
}

}  // namespace gsn
