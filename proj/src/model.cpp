#include "latlab/model.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace latlab {

std::string Hypothesis::Text() const {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w.text;
  }
  return out;
}

void ValidateWordOrder(const std::vector<TimedWord>& words) {
  for (size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    if (w.text.empty() || w.text.find_first_of(" \t\n") != std::string::npos) {
      throw OrderingViolation("word text empty or contains whitespace");
    }
    if (!(w.start < w.end)) {
      throw OrderingViolation("word '" + w.text + "' has start >= end");
    }
    if (i > 0) {
      if (!(words[i - 1].start < w.start) || words[i - 1].end > w.start) {
        throw OrderingViolation("words '" + words[i - 1].text + "' and '" +
                                w.text + "' overlap or are unordered");
      }
    }
  }
}

namespace {

enum Op : unsigned char { kMatch, kSub, kIns, kDel };

}  // namespace

WerBreakdown ComputeWer(const std::vector<std::string>& reference,
                        const std::vector<std::string>& hypothesis) {
  const int m = static_cast<int>(reference.size());
  const int n = static_cast<int>(hypothesis.size());
  // cost[i][j] = minimal edits aligning reference[0..i) with hypothesis[0..j).
  // Tie order when costs are equal: substitution, then insertion, then
  // deletion.
  static thread_local std::vector<int> cost;
  static thread_local std::vector<unsigned char> op;
  const int stride = n + 1;
  cost.assign(static_cast<size_t>(m + 1) * stride, 0);
  op.assign(static_cast<size_t>(m + 1) * stride, kMatch);
  for (int j = 1; j <= n; ++j) {
    cost[j] = j;
    op[j] = kIns;
  }
  for (int i = 1; i <= m; ++i) {
    cost[i * stride] = i;
    op[i * stride] = kDel;
    const std::string& r = reference[i - 1];
    for (int j = 1; j <= n; ++j) {
      const int diag = cost[(i - 1) * stride + j - 1];
      if (r == hypothesis[j - 1]) {
        cost[i * stride + j] = diag;
        op[i * stride + j] = kMatch;
        continue;
      }
      const int sub = diag + 1;
      const int ins = cost[i * stride + j - 1] + 1;
      const int del = cost[(i - 1) * stride + j] + 1;
      int best = sub;
      unsigned char o = kSub;
      if (ins < best) {
        best = ins;
        o = kIns;
      }
      if (del < best) {
        best = del;
        o = kDel;
      }
      cost[i * stride + j] = best;
      op[i * stride + j] = o;
    }
  }

  WerBreakdown b;
  b.reference_length = m;
  int i = m, j = n;
  while (i > 0 || j > 0) {
    switch (op[i * stride + j]) {
      case kMatch:
        --i;
        --j;
        break;
      case kSub:
        ++b.substitutions;
        --i;
        --j;
        break;
      case kIns:
        ++b.insertions;
        --j;
        break;
      case kDel:
        ++b.deletions;
        --i;
        break;
    }
  }
  const int denom = m > 0 ? m : (n > 0 ? 1 : 0);
  b.wer = denom > 0 ? static_cast<double>(b.Edits()) / denom : 0.0;
  return b;
}

Hypothesis ConcatHypothesis(const Hypothesis& prefix, const Hypothesis& suffix) {
  if (prefix.segment_id != suffix.segment_id) {
    throw OrderingViolation("segment mismatch in hypothesis concat");
  }
  if (!prefix.words.empty() && !suffix.words.empty() &&
      prefix.words.back().end > suffix.words.front().start) {
    throw OrderingViolation("hypothesis concat would overlap in time");
  }
  Hypothesis out;
  out.segment_id = prefix.segment_id;
  out.score = prefix.score + suffix.score;
  out.words = prefix.words;
  out.words.insert(out.words.end(), suffix.words.begin(), suffix.words.end());
  return out;
}

Transcript LoadTranscript(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open transcript: " + path);
  Transcript t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TimedWord w;
    if (!std::getline(ls, w.text, '\t') || !(ls >> w.start)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed transcript line");
    }
    if (!(ls >> w.end)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": missing end time");
    }
    t.words.push_back(std::move(w));
  }
  ValidateWordOrder(t.words);
  return t;
}

void SaveTranscript(const Transcript& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write transcript: " + path);
  char buf[128];
  for (const auto& w : t.words) {
    std::snprintf(buf, sizeof(buf), "%s\t%.3f\t%.3f\n", w.text.c_str(), w.start,
                  w.end);
    out << buf;
  }
}

}  // namespace latlab
