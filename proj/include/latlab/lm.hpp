#ifndef LATLAB_LM_HPP
#define LATLAB_LM_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace latlab {

using WordId = std::int32_t;
constexpr WordId kUnknownWord = -1;

class LmParseError : public std::runtime_error {
 public:
  LmParseError(const std::string& path, int line, const std::string& msg)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + msg),
        line_number(line) {}
  int line_number;
};

// Back-off n-gram model loaded from an ARPA file.  Probabilities are stored
// in log10 as in the file; ScoreLn converts once-loaded values on the fly
// via a precomputed factor so the decoder works in natural log.
class NGramModel {
 public:
  static NGramModel LoadArpa(const std::string& path);

  int order() const { return order_; }
  size_t vocab_size() const { return words_.size(); }
  WordId Lookup(const std::string& word) const;
  const std::string& WordText(WordId id) const { return words_[id]; }
  const std::vector<std::string>& words() const { return words_; }

  // log10 p(word | history), standard Katz back-off.  History longer than
  // order-1 is truncated from the front; unknown ids fall back to the <unk>
  // entry or the configured floor.
  double Score(const std::vector<WordId>& history, WordId word) const;
  double ScoreIds(const WordId* history, size_t history_len, WordId word) const;
  // Natural-log variant used by the decoder inner loop.
  double ScoreLn(const std::vector<WordId>& history, WordId word) const;

  void SaveArpa(const std::string& path) const;

  double unknown_log10() const { return unknown_log10_; }

  // Builder interface (used by the fixture counting utility and tests).
  struct Entry {
    std::vector<std::string> gram;
    double log10_prob;
    double log10_backoff;  // NaN when absent
    bool has_backoff;
  };
  static NGramModel FromEntries(int order, const std::vector<std::vector<Entry>>& by_order);

 private:
  // n-gram keys pack up to 4 word ids into 16-bit fields (stored as id+1 so
  // the gram length is recoverable); caps the model at order 4 and 65534
  // words, plenty for this artifact's vocabularies.
  static std::uint64_t Key(const WordId* ids, size_t n);

  int order_ = 1;
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> vocab_;
  std::unordered_map<std::uint64_t, double> prob_;     // ngram -> log10 p
  std::unordered_map<std::uint64_t, double> backoff_;  // context -> log10 alpha
  double unknown_log10_ = -7.0;
  bool has_unk_ = false;
  WordId unk_id_ = kUnknownWord;
};

// Counts an order-n model from whitespace-tokenized text with absolute
// discounting, producing a properly normalized back-off model.  Used to
// build tiny test fixtures and the synthetic benchmark LM.
NGramModel BuildCountingModel(const std::vector<std::vector<std::string>>& sentences,
                              int order, double discount = 0.5);

}  // namespace latlab

#endif  // LATLAB_LM_HPP
