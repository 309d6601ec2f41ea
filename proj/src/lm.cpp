#include "latlab/lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace latlab {

namespace {
constexpr double kLn10 = 2.302585092994046;
}

std::uint64_t NGramModel::Key(const WordId* ids, size_t n) {
  if (n > 4) throw std::runtime_error("n-gram order above 4 is not supported");
  std::uint64_t key = 0;
  for (size_t i = 0; i < n; ++i) {
    if (ids[i] < 0 || ids[i] >= 0xffff) {
      throw std::runtime_error("word id out of packable range");
    }
    key |= static_cast<std::uint64_t>(ids[i] + 1) << (16 * i);
  }
  return key;
}

WordId NGramModel::Lookup(const std::string& word) const {
  auto it = vocab_.find(word);
  if (it != vocab_.end()) return it->second;
  return has_unk_ ? unk_id_ : kUnknownWord;
}

double NGramModel::Score(const std::vector<WordId>& history, WordId word) const {
  return ScoreIds(history.data(), history.size(), word);
}

double NGramModel::ScoreIds(const WordId* history, size_t history_len,
                            WordId word) const {
  if (word == kUnknownWord) {
    if (!has_unk_) return unknown_log10_;
    word = unk_id_;
  }
  size_t ctx = std::min(history_len, static_cast<size_t>(order_ - 1));
  const WordId* h = history + history_len - ctx;
  double accum = 0.0;
  for (;;) {
    const std::uint64_t hkey = Key(h, ctx);
    const std::uint64_t gkey =
        hkey | (static_cast<std::uint64_t>(word + 1) << (16 * ctx));
    auto it = prob_.find(gkey);
    if (it != prob_.end()) return accum + it->second;
    if (ctx == 0) return accum + unknown_log10_;
    auto bo = backoff_.find(hkey);
    if (bo != backoff_.end()) accum += bo->second;
    ++h;
    --ctx;
  }
}

double NGramModel::ScoreLn(const std::vector<WordId>& history, WordId word) const {
  return Score(history, word) * kLn10;
}

NGramModel NGramModel::FromEntries(
    int order, const std::vector<std::vector<Entry>>& by_order) {
  NGramModel m;
  m.order_ = order;
  // Unigrams define the vocabulary, in file order.
  for (const Entry& e : by_order[0]) {
    if (e.gram.size() != 1) throw std::runtime_error("unigram entry with arity != 1");
    WordId id = static_cast<WordId>(m.words_.size());
    m.words_.push_back(e.gram[0]);
    m.vocab_[e.gram[0]] = id;
    if (e.gram[0] == "<unk>") {
      m.has_unk_ = true;
      m.unk_id_ = id;
      m.unknown_log10_ = e.log10_prob;
    }
  }
  for (int k = 1; k <= order; ++k) {
    if (static_cast<size_t>(k) > by_order.size()) break;
    for (const Entry& e : by_order[k - 1]) {
      std::vector<WordId> ids;
      for (const auto& w : e.gram) {
        auto it = m.vocab_.find(w);
        if (it == m.vocab_.end()) {
          throw std::runtime_error("n-gram references word outside vocabulary: " + w);
        }
        ids.push_back(it->second);
      }
      if (e.log10_prob > 1e-9) {
        throw std::runtime_error("positive log probability for n-gram");
      }
      if (k > 1) {
        // Prefix context must itself be a stored (k-1)-gram.
        if (!m.prob_.count(Key(ids.data(), ids.size() - 1))) {
          throw std::runtime_error("n-gram prefix missing from model");
        }
      }
      m.prob_[Key(ids.data(), ids.size())] = e.log10_prob;
      if (e.has_backoff) {
        m.backoff_[Key(ids.data(), ids.size())] = e.log10_backoff;
      }
    }
  }
  return m;
}

NGramModel NGramModel::LoadArpa(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ARPA file: " + path);
  std::string line;
  int lineno = 0;
  auto next_line = [&](std::string& out) -> bool {
    while (std::getline(in, out)) {
      ++lineno;
      while (!out.empty() && (out.back() == '\r' || out.back() == '\n')) out.pop_back();
      return true;
    }
    return false;
  };

  // Find \data\.
  bool found = false;
  while (next_line(line)) {
    if (line == "\\data\\") {
      found = true;
      break;
    }
  }
  if (!found) throw LmParseError(path, lineno, "missing \\data\\ section");

  std::vector<size_t> declared;
  while (next_line(line)) {
    if (line.empty()) break;
    size_t eq = line.find('=');
    if (line.rfind("ngram ", 0) != 0 || eq == std::string::npos) {
      throw LmParseError(path, lineno, "malformed count line: " + line);
    }
    int k = std::atoi(line.c_str() + 6);
    size_t n = std::strtoull(line.c_str() + eq + 1, nullptr, 10);
    if (k != static_cast<int>(declared.size()) + 1) {
      throw LmParseError(path, lineno, "non-consecutive n-gram orders");
    }
    declared.push_back(n);
  }
  if (declared.empty()) throw LmParseError(path, lineno, "no n-gram counts declared");

  const int order = static_cast<int>(declared.size());
  std::vector<std::vector<Entry>> by_order(order);
  for (int k = 1; k <= order; ++k) {
    const std::string header = "\\" + std::to_string(k) + "-grams:";
    found = false;
    while (next_line(line)) {
      if (line.empty()) continue;
      if (line == header) {
        found = true;
        break;
      }
      throw LmParseError(path, lineno, "expected section " + header);
    }
    if (!found) throw LmParseError(path, lineno, "missing section " + header);
    int section_line = lineno;
    while (next_line(line)) {
      if (line.empty()) break;
      if (line[0] == '\\') {
        // Section ended without blank separator; rewind is awkward, treat
        // as error to keep the subset strict.
        throw LmParseError(path, lineno, "unexpected section marker inside " + header);
      }
      std::istringstream ls(line);
      Entry e;
      if (!(ls >> e.log10_prob)) {
        throw LmParseError(path, lineno, "malformed probability: " + line);
      }
      std::string tok;
      std::vector<std::string> toks;
      while (ls >> tok) toks.push_back(tok);
      e.has_backoff = false;
      e.log10_backoff = 0.0;
      if (static_cast<int>(toks.size()) == k + 1) {
        char* endp = nullptr;
        e.log10_backoff = std::strtod(toks.back().c_str(), &endp);
        if (endp == toks.back().c_str() || *endp != '\0') {
          throw LmParseError(path, lineno, "malformed backoff weight");
        }
        e.has_backoff = true;
        toks.pop_back();
      }
      if (static_cast<int>(toks.size()) != k) {
        throw LmParseError(path, lineno, "wrong arity in " + header);
      }
      e.gram = std::move(toks);
      by_order[k - 1].push_back(std::move(e));
    }
    if (by_order[k - 1].size() != declared[k - 1]) {
      throw LmParseError(path, section_line,
                         "declared " + std::to_string(declared[k - 1]) + " " +
                             std::to_string(k) + "-grams but parsed " +
                             std::to_string(by_order[k - 1].size()));
    }
  }
  while (next_line(line)) {
    if (line == "\\end\\") {
      try {
        return FromEntries(order, by_order);
      } catch (const std::runtime_error& e) {
        throw LmParseError(path, lineno, e.what());
      }
    }
    if (!line.empty()) throw LmParseError(path, lineno, "expected \\end\\");
  }
  throw LmParseError(path, lineno, "missing \\end\\");
}

void NGramModel::SaveArpa(const std::string& path) const {
  // Reconstruct per-order entries in deterministic (sorted id) order.
  std::vector<std::map<std::vector<WordId>, std::pair<double, const double*>>> grams(order_);
  for (const auto& [key, p] : prob_) {
    std::vector<WordId> ids;
    for (std::uint64_t k = key; k != 0; k >>= 16) {
      ids.push_back(static_cast<WordId>((k & 0xffff) - 1));
    }
    auto bo = backoff_.find(key);
    grams[ids.size() - 1][ids] = {p, bo == backoff_.end() ? nullptr : &bo->second};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ARPA file: " + path);
  out << "\\data\\\n";
  for (int k = 1; k <= order_; ++k) {
    out << "ngram " << k << "=" << grams[k - 1].size() << "\n";
  }
  out << "\n";
  char buf[64];
  for (int k = 1; k <= order_; ++k) {
    out << "\\" << k << "-grams:\n";
    for (const auto& [ids, pv] : grams[k - 1]) {
      std::snprintf(buf, sizeof(buf), "%.6f", pv.first);
      out << buf;
      for (size_t i = 0; i < ids.size(); ++i) {
        out << (i == 0 ? "\t" : " ") << words_[ids[i]];
      }
      if (pv.second) {
        std::snprintf(buf, sizeof(buf), "\t%.6f", *pv.second);
        out << buf;
      }
      out << "\n";
    }
    out << "\n";
  }
  out << "\\end\\\n";
}

NGramModel BuildCountingModel(
    const std::vector<std::vector<std::string>>& sentences, int order,
    double discount) {
  // Deterministic vocabulary: sorted unique tokens.
  std::set<std::string> vocab_set;
  for (const auto& s : sentences)
    for (const auto& w : s) vocab_set.insert(w);
  if (vocab_set.empty()) throw std::runtime_error("counting model: empty corpus");
  std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());
  std::map<std::string, int> ids;
  for (size_t i = 0; i < vocab.size(); ++i) ids[vocab[i]] = static_cast<int>(i);

  // counts[k-1]: k-gram (as id vector) -> count.
  std::vector<std::map<std::vector<int>, long>> counts(order);
  for (const auto& s : sentences) {
    std::vector<int> w;
    for (const auto& t : s) w.push_back(ids[t]);
    for (size_t i = 0; i < w.size(); ++i) {
      for (int k = 1; k <= order; ++k) {
        if (i + k > w.size()) break;
        counts[k - 1][std::vector<int>(w.begin() + i, w.begin() + i + k)]++;
      }
    }
  }

  std::vector<std::vector<NGramModel::Entry>> by_order(order);
  // Unigrams with absolute discounting; the reserved mass goes to <unk>.
  long total = 0;
  for (const auto& [g, c] : counts[0]) total += c;
  const double unk_mass =
      discount * static_cast<double>(counts[0].size()) / static_cast<double>(total);
  std::map<std::vector<int>, double> prob_by_gram;  // linear probs per gram
  {
    NGramModel::Entry unk;
    unk.gram = {"<unk>"};
    unk.log10_prob = std::log10(unk_mass);
    unk.has_backoff = false;
    by_order[0].push_back(unk);
    for (const auto& [g, c] : counts[0]) {
      NGramModel::Entry e;
      e.gram = {vocab[g[0]]};
      const double p = (static_cast<double>(c) - discount) / static_cast<double>(total);
      prob_by_gram[g] = p;
      e.log10_prob = std::log10(p);
      e.has_backoff = false;
      by_order[0].push_back(e);
    }
  }

  // Higher orders.  alpha(h) = d*N1+(h)/c(h) / (1 - sum_seen p_lower).
  std::map<std::vector<int>, double> backoff_by_ctx;
  for (int k = 2; k <= order; ++k) {
    std::map<std::vector<int>, long> ctx_total;
    std::map<std::vector<int>, long> ctx_types;
    for (const auto& [g, c] : counts[k - 1]) {
      std::vector<int> h(g.begin(), g.end() - 1);
      ctx_total[h] += c;
      ctx_types[h] += 1;
    }
    std::map<std::vector<int>, double> seen_lower_mass;
    std::map<std::vector<int>, double> new_probs;
    for (const auto& [g, c] : counts[k - 1]) {
      std::vector<int> h(g.begin(), g.end() - 1);
      const double p = (static_cast<double>(c) - discount) /
                       static_cast<double>(ctx_total[h]);
      new_probs[g] = p;
      std::vector<int> lower(g.begin() + 1, g.end());
      seen_lower_mass[h] += prob_by_gram.at(lower);
    }
    for (const auto& [h, tot] : ctx_total) {
      const double reserved = discount * static_cast<double>(ctx_types[h]) /
                              static_cast<double>(tot);
      backoff_by_ctx[h] = reserved / (1.0 - seen_lower_mass[h]);
    }
    // Emit (k-1)-gram entries now that their backoff weights are known.
    for (const auto& [g, p] : prob_by_gram) {
      if (g.size() != static_cast<size_t>(k - 1)) continue;
      NGramModel::Entry e;
      for (int id : g) e.gram.push_back(vocab[id]);
      e.log10_prob = std::log10(p);
      auto bo = backoff_by_ctx.find(g);
      e.has_backoff = bo != backoff_by_ctx.end();
      e.log10_backoff = e.has_backoff ? std::log10(bo->second) : 0.0;
      if (k == 2) {
        // Unigram entries were already emitted without backoff; replace.
        for (auto& u : by_order[0]) {
          if (u.gram == e.gram) {
            u.has_backoff = e.has_backoff;
            u.log10_backoff = e.log10_backoff;
          }
        }
      } else {
        by_order[k - 2].push_back(e);
      }
    }
    prob_by_gram = std::move(new_probs);
    backoff_by_ctx.clear();
  }
  // Top order entries (no backoff).  For order 1 the unigrams are already in.
  for (const auto& [g, p] : prob_by_gram) {
    if (order == 1 || g.size() != static_cast<size_t>(order)) continue;
    NGramModel::Entry e;
    for (int id : g) e.gram.push_back(vocab[id]);
    e.log10_prob = std::log10(p);
    e.has_backoff = false;
    by_order[order - 1].push_back(e);
  }
  return NGramModel::FromEntries(order, by_order);
}

}  // namespace latlab
